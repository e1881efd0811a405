#include "bto/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace bto {

namespace {

double apply_residual(const Operator& a, const Operator& b, const SupportedVector& v,
                      double drop_tol) {
  SupportedVector ia = a.apply(v, drop_tol);
  SupportedVector ib = b.apply(v, drop_tol);
  double nv = v.norm();
  if (nv == 0.0) return 0.0;
  return ia.minus(ib, 0.0).norm() / nv;
}

}  // namespace

std::vector<SupportedVector> random_probe_vectors(const IndexSet& space,
                                                  const ToleranceProfile& tol) {
  std::vector<SupportedVector> out;
  if (tol.random_probes == 0) return out;
  std::vector<Index> window = space.window(tol.probe_radius);
  if (window.empty()) return out;
  std::mt19937_64 rng(tol.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::uint64_t k = 0; k < tol.random_probes; ++k) {
    std::size_t support = 1 + static_cast<std::size_t>(rng() % 6);
    std::vector<std::pair<Index, cx>> terms;
    for (std::size_t s = 0; s < support; ++s) {
      const Index& ix = window[rng() % window.size()];
      terms.emplace_back(ix, cx(gauss(rng), gauss(rng)));
    }
    SupportedVector v = SupportedVector::from_terms(space, std::move(terms), 0.0);
    double n = v.norm();
    if (n > 0.0) out.push_back(v.scaled(cx(1.0 / n, 0.0), 0.0));
  }
  return out;
}

ProbeResult probe_equal(const Operator& a, const Operator& b,
                        const ToleranceProfile& tol, Exec exec) {
  if (!(a.domain() == b.domain()) || !(a.codomain() == b.codomain()))
    throw StructuralError("probe_equal shape mismatch: " + a.domain().str() + "->" +
                          a.codomain().str() + " vs " + b.domain().str() + "->" +
                          b.codomain().str());
  std::vector<SupportedVector> probes;
  for (const Index& ix : a.domain().window(tol.probe_radius))
    probes.push_back(SupportedVector::basis(a.domain(), ix));
  for (SupportedVector& v : random_probe_vectors(a.domain(), tol)) probes.push_back(std::move(v));

  std::vector<double> residuals(probes.size(), 0.0);
  parallel_for(exec, probes.size(), [&](std::size_t i) {
    residuals[i] = apply_residual(a, b, probes[i], tol.drop_tol);
  });

  ProbeResult res;
  res.probes = probes.size();
  res.ok = true;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    res.max_residual = std::max(res.max_residual, residuals[i]);
    if (res.ok && residuals[i] > tol.identity_tol) {
      res.ok = false;
      res.witness = ProbeWitness{probes[i], residuals[i], ""};
    }
  }
  return res;
}

ProbeResult probe_zero(const Operator& a, const ToleranceProfile& tol, Exec exec) {
  return probe_equal(a, Operator::zero(a.domain(), a.codomain()), tol, exec);
}

ProbeResult probe_adjoint_consistency(const Operator& a, const ToleranceProfile& tol) {
  Operator astar = Operator::adjoint(a);
  std::vector<Index> dw = capped_window(a.domain(), tol.probe_radius, 48);
  std::vector<Index> cw = capped_window(a.codomain(), tol.probe_radius, 48);
  ProbeResult res;
  res.ok = true;
  for (const Index& j : dw) {
    SupportedVector u = SupportedVector::basis(a.domain(), j);
    SupportedVector au = a.apply(u, tol.drop_tol);
    for (const Index& i : cw) {
      SupportedVector v = SupportedVector::basis(a.codomain(), i);
      cx lhs = au.inner(v);
      cx rhs = u.inner(astar.apply(v, tol.drop_tol));
      double r = std::abs(lhs - rhs);
      ++res.probes;
      res.max_residual = std::max(res.max_residual, r);
      if (res.ok && r > tol.identity_tol) {
        res.ok = false;
        res.witness = ProbeWitness{u, r, "pair (" + a.domain().path_string(j) + ", " +
                                              a.codomain().path_string(i) + ")"};
      }
    }
  }
  return res;
}

ProbeResult probe_isometry(const Operator& a, const ToleranceProfile& tol) {
  return probe_equal(Operator::compose(Operator::adjoint(a), a),
                     Operator::identity(a.domain()), tol);
}

std::optional<Operator> certify_isometry(const Operator& a, const ToleranceProfile& tol) {
  if (a.isometry_certified()) return a;
  if (probe_isometry(a, tol).ok) return a.certified_isometry();
  return std::nullopt;
}

ProbeResult probe_partial_isometry(const Operator& a, const ToleranceProfile& tol) {
  Operator aaa = Operator::compose(a, Operator::compose(Operator::adjoint(a), a));
  return probe_equal(aaa, a, tol);
}

std::vector<Index> capped_window(const IndexSet& space, std::uint64_t radius,
                                 std::size_t max_count) {
  std::uint64_t r = radius;
  std::vector<Index> w = space.window(r);
  while (w.size() > max_count && r > 1) {
    r = r / 2;
    w = space.window(r);
  }
  if (w.size() > max_count) w.resize(max_count);
  return w;
}

CMatrix compression(const Operator& op, const std::vector<Index>& window, Exec exec) {
  const std::size_t n = window.size();
  CMatrix m(n, n);
  parallel_for(exec, n, [&](std::size_t j) {
    SupportedVector col = op.apply(SupportedVector::basis(op.domain(), window[j]), 0.0);
    for (std::size_t i = 0; i < n; ++i) m.at(i, j) = col.at(window[i]);
  });
  return m;
}

PsdProbe psd_probe(const Operator& op, const ToleranceProfile& tol, std::size_t max_window) {
  PsdProbe out;
  // a nonnegative diagonal view certifies psd without dense work
  if (auto v = diagonal_view(op)) {
    if (v->nonnegative(tol.psd_tol)) {
      out.psd = true;
      out.min_eigenvalue = v->lo;
      out.window_size = 0;
      return out;
    }
  }
  std::vector<Index> w = capped_window(op.domain(), tol.probe_radius, max_window);
  CMatrix m = compression(op, w);
  // symmetrize against roundoff; entries of an honest Hermitian op already match
  CMatrix h(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j)
      h.at(i, j) = 0.5 * (m.at(i, j) + std::conj(m.at(j, i)));
  out.window_size = w.size();
  out.psd = psd_check(h, tol.psd_tol, &out.min_eigenvalue);
  return out;
}

// ---------------------------------------------------------------------------
// diagonal view engine

namespace {

DiagonalView const_view(const IndexSet& space, cx v) {
  DiagonalView d;
  d.space = space;
  d.entry = [v](const Index&) { return v; };
  d.is_const = true;
  d.const_value = v;
  d.real = std::imag(v) == 0.0;
  d.lo = d.hi = std::real(v);
  d.lo_attained = d.hi_attained = true;
  d.sup = std::abs(v);
  d.sup_tight = true;
  return d;
}

void finalize_real_stats(DiagonalView& d) {
  d.sup = std::max(std::abs(d.lo), std::abs(d.hi));
  d.sup_tight = (std::abs(d.lo) >= std::abs(d.hi)) ? d.lo_attained : d.hi_attained;
}

// exact scan of a finite list of real values
DiagonalView seq_view_from_values(const IndexSet& space, std::vector<cx> values, cx tail,
                                  bool tail_used) {
  DiagonalView d;
  d.space = space;
  auto vals = std::make_shared<std::vector<cx>>(std::move(values));
  IndexSet sp = space;
  d.entry = [sp, vals, tail](const Index& ix) {
    auto r = sp.rank_of(ix);
    if (r && *r < vals->size()) return (*vals)[*r];
    return tail;
  };
  bool real = std::imag(tail) == 0.0;
  for (const cx& z : *vals) real = real && std::imag(z) == 0.0;
  d.real = real;
  if (real) {
    d.lo = std::numeric_limits<double>::infinity();
    d.hi = -std::numeric_limits<double>::infinity();
    for (const cx& z : *vals) {
      d.lo = std::min(d.lo, std::real(z));
      d.hi = std::max(d.hi, std::real(z));
    }
    if (tail_used) {
      d.lo = std::min(d.lo, std::real(tail));
      d.hi = std::max(d.hi, std::real(tail));
    }
    if (vals->empty() && !tail_used) {
      d.lo = d.hi = 0.0;
    }
    d.lo_attained = d.hi_attained = true;
    finalize_real_stats(d);
  } else {
    double s = tail_used ? std::abs(tail) : 0.0;
    for (const cx& z : *vals) s = std::max(s, std::abs(z));
    d.sup = s;
    d.sup_tight = true;
  }
  d.is_const = vals->empty() && tail_used;
  d.const_value = d.is_const ? tail : cx(0, 0);
  return d;
}

std::optional<DiagonalView> view_of(const Operator& op);

std::optional<DiagonalView> add_views(const DiagonalView& a, const DiagonalView& b) {
  DiagonalView d;
  d.space = a.space;
  auto ea = a.entry, eb = b.entry;
  d.entry = [ea, eb](const Index& ix) { return ea(ix) + eb(ix); };
  if (a.is_const && b.is_const) return const_view(a.space, a.const_value + b.const_value);
  if (a.real && b.real) {
    d.real = true;
    d.lo = a.lo + b.lo;
    d.hi = a.hi + b.hi;
    bool pin = a.is_const || b.is_const;  // the const side attains everywhere
    d.lo_attained = pin && (a.is_const ? b.lo_attained : a.lo_attained);
    d.hi_attained = pin && (a.is_const ? b.hi_attained : a.hi_attained);
    finalize_real_stats(d);
  } else {
    d.sup = a.sup + b.sup;
    d.sup_tight = false;
  }
  return d;
}

std::optional<DiagonalView> mul_views(const DiagonalView& a, const DiagonalView& b) {
  if (a.is_const && b.is_const) return const_view(a.space, a.const_value * b.const_value);
  DiagonalView d;
  d.space = a.space;
  auto ea = a.entry, eb = b.entry;
  d.entry = [ea, eb](const Index& ix) { return ea(ix) * eb(ix); };
  if (a.real && b.real) {
    d.real = true;
    double c[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
    d.lo = *std::min_element(c, c + 4);
    d.hi = *std::max_element(c, c + 4);
    bool pin = a.is_const || b.is_const;
    d.lo_attained = pin;
    d.hi_attained = pin;
    if (pin) {
      // scaling by a constant: attained flags follow the non-const side,
      // swapped when the constant is negative
      const DiagonalView& v = a.is_const ? b : a;
      double cval = std::real(a.is_const ? a.const_value : b.const_value);
      d.lo_attained = cval >= 0 ? v.lo_attained : v.hi_attained;
      d.hi_attained = cval >= 0 ? v.hi_attained : v.lo_attained;
    }
    finalize_real_stats(d);
  } else {
    d.sup = a.sup * b.sup;
    d.sup_tight = (a.is_const && b.sup_tight) || (b.is_const && a.sup_tight);
  }
  return d;
}

DiagonalView scale_view(cx c, const DiagonalView& v) {
  DiagonalView cv = const_view(v.space, c);
  return *mul_views(cv, v);
}

DiagonalView split_view(const IndexSet& space, const DiagonalView& a, const DiagonalView& b) {
  DiagonalView d;
  d.space = space;
  auto ea = a.entry, eb = b.entry;
  d.entry = [ea, eb](const Index& ix) {
    Index rest(std::vector<std::int64_t>(ix.atoms.begin() + 1, ix.atoms.end()));
    return ix.atoms[0] == 0 ? ea(rest) : eb(rest);
  };
  if (a.is_const && b.is_const && a.const_value == b.const_value) {
    d.is_const = true;
    d.const_value = a.const_value;
  }
  if (a.real && b.real) {
    d.real = true;
    d.lo = std::min(a.lo, b.lo);
    d.hi = std::max(a.hi, b.hi);
    d.lo_attained = a.lo <= b.lo ? a.lo_attained : b.lo_attained;
    d.hi_attained = a.hi >= b.hi ? a.hi_attained : b.hi_attained;
    finalize_real_stats(d);
  } else {
    d.sup = std::max(a.sup, b.sup);
    d.sup_tight = a.sup >= b.sup ? a.sup_tight : b.sup_tight;
  }
  return d;
}

DiagonalView tensor_view(const IndexSet& space, const DiagonalView& a, const DiagonalView& b) {
  if (a.is_const && b.is_const) return const_view(space, a.const_value * b.const_value);
  DiagonalView d = *mul_views(a, b);  // interval/sup algebra matches
  d.space = space;
  // independent coordinates: extremes are genuinely attained jointly
  if (a.real && b.real) {
    d.lo_attained = a.lo_attained && b.lo_attained && a.hi_attained && b.hi_attained;
    d.hi_attained = d.lo_attained;
    finalize_real_stats(d);
  } else {
    d.sup_tight = a.sup_tight && b.sup_tight;
  }
  IndexSet sa = a.space;
  auto ea = a.entry, eb = b.entry;
  d.entry = [sa, ea, eb](const Index& ix) {
    struct W {
      static std::size_t consumed(const IndexSet& s, const Index& ix, std::size_t pos) {
        switch (s.kind()) {
          case IndexSet::Kind::Nat:
          case IndexSet::Kind::Int:
          case IndexSet::Kind::Fin:
            return pos + 1;
          case IndexSet::Kind::Union:
            return consumed(ix.atoms[pos] == 0 ? s.left() : s.right(), ix, pos + 1);
          case IndexSet::Kind::Product:
            return consumed(s.right(), ix, consumed(s.left(), ix, pos));
        }
        return pos;
      }
    };
    std::size_t split = W::consumed(sa, ix, 0);
    Index ia(std::vector<std::int64_t>(ix.atoms.begin(), ix.atoms.begin() + split));
    Index ib(std::vector<std::int64_t>(ix.atoms.begin() + split, ix.atoms.end()));
    return ea(ia) * eb(ib);
  };
  return d;
}

// gram view of a unilateral weighted shift: S^*S has entries w(r)^2,
// SS^* has entries 0, w(0)^2, w(1)^2, ...
DiagonalView shift_gram_view(const WeightSequence& w, bool star_first) {
  IndexSet nat = IndexSet::nat();
  DiagonalView d;
  d.space = nat;
  WeightSequence ws = w;
  if (star_first) {
    d.entry = [ws](const Index& ix) {
      double v = ws.weight(static_cast<std::uint64_t>(ix.atoms[0]));
      return cx(v * v, 0);
    };
  } else {
    d.entry = [ws](const Index& ix) {
      if (ix.atoms[0] == 0) return cx(0, 0);
      double v = ws.weight(static_cast<std::uint64_t>(ix.atoms[0] - 1));
      return cx(v * v, 0);
    };
  }
  d.real = true;
  if (w.kind() == WeightSequence::Kind::MomentGenerated) {
    // moment ratios increase to the largest atom location
    double w0 = w.weight(0);
    d.lo = star_first ? w0 * w0 : 0.0;
    d.hi = w.measure().max_location();
    d.lo_attained = true;
    d.hi_attained = true;  // attained as the limit
  } else {
    double lo = w.tail() * w.tail(), hi = lo;
    for (double p : w.prefix()) {
      lo = std::min(lo, p * p);
      hi = std::max(hi, p * p);
    }
    if (!star_first) lo = std::min(lo, 0.0);
    d.lo = lo;
    d.hi = hi;
    d.lo_attained = d.hi_attained = true;
  }
  finalize_real_stats(d);
  return d;
}

DiagonalView indicator_view(const Operator& incl) {
  // incl o incl^*: orthogonal projection onto the image index class
  const InjectionSpec& spec = incl.injection();
  DiagonalView d;
  d.space = incl.codomain();
  auto inv = spec.inverse;
  d.entry = [inv](const Index& ix) { return inv(ix) ? cx(1, 0) : cx(0, 0); };
  d.real = true;
  d.lo = spec.surjective ? 1.0 : 0.0;
  d.hi = 1.0;
  d.lo_attained = d.hi_attained = true;
  finalize_real_stats(d);
  return d;
}

bool is_adjoint_pair(const Operator& a, const Operator& b) {
  return a.kind() == OpKind::Adjoint && a.child(0).same_node(b);
}

// (X^*, X) and (X, X^*) pairs that reduce to diagonals
std::optional<DiagonalView> pair_view(const Operator& a, const Operator& b) {
  if (is_adjoint_pair(a, b)) {
    const Operator& x = b;
    switch (x.kind()) {
      case OpKind::UnilateralShift:
        return shift_gram_view(x.shift_weights(), true);
      case OpKind::BilateralShift:
        return const_view(x.domain(), cx(x.bilateral_weight() * x.bilateral_weight(), 0));
      case OpKind::Inclusion:
        return const_view(x.domain(), cx(1, 0));
      case OpKind::Embedding:
        if (x.embedding().orthonormal_columns) return const_view(x.domain(), cx(1, 0));
        return std::nullopt;
      default:
        return std::nullopt;
    }
  }
  if (is_adjoint_pair(b, a)) {
    const Operator& x = a;
    switch (x.kind()) {
      case OpKind::UnilateralShift:
        return shift_gram_view(x.shift_weights(), false);
      case OpKind::BilateralShift:
        return const_view(x.domain(), cx(x.bilateral_weight() * x.bilateral_weight(), 0));
      case OpKind::Inclusion:
        return indicator_view(x);
      default:
        return std::nullopt;
    }
  }
  return std::nullopt;
}

// (X^*, D, X) conjugation: shifts move the diagonal one step, inclusions
// pull it back along the index map
std::optional<DiagonalView> conjugated_view(const Operator& x, const DiagonalView& d) {
  auto ed = d.entry;
  switch (x.kind()) {
    case OpKind::UnilateralShift: {
      DiagonalView g = shift_gram_view(x.shift_weights(), true);
      DiagonalView out;
      out.space = x.domain();
      auto eg = g.entry;
      out.entry = [ed, eg](const Index& ix) {
        return ed(Index::scalar(ix.atoms[0] + 1)) * eg(ix);
      };
      out.real = d.real && g.real;
      if (out.real) {
        double c[4] = {d.lo * g.lo, d.lo * g.hi, d.hi * g.lo, d.hi * g.hi};
        out.lo = *std::min_element(c, c + 4);
        out.hi = *std::max_element(c, c + 4);
        out.lo_attained = out.hi_attained = false;
        finalize_real_stats(out);
        out.sup_tight = false;
      } else {
        out.sup = d.sup * g.sup;
        out.sup_tight = false;
      }
      return out;
    }
    case OpKind::BilateralShift: {
      double t2 = x.bilateral_weight() * x.bilateral_weight();
      DiagonalView out;
      out.space = x.domain();
      out.entry = [ed, t2](const Index& ix) {
        return ed(Index::scalar(ix.atoms[0] + 1)) * t2;
      };
      out.real = d.real;
      out.lo = std::min(d.lo * t2, d.hi * t2);
      out.hi = std::max(d.lo * t2, d.hi * t2);
      out.lo_attained = out.hi_attained = false;
      if (out.real) {
        finalize_real_stats(out);
        out.sup_tight = false;
      } else {
        out.sup = d.sup * t2;
        out.sup_tight = false;
      }
      return out;
    }
    case OpKind::Inclusion: {
      auto fwd = x.injection().forward;
      DiagonalView out = d;
      out.space = x.domain();
      out.entry = [ed, fwd](const Index& ix) { return ed(fwd(ix)); };
      out.is_const = d.is_const;
      // interval bounds remain valid (subset of the original entries);
      // attainedness is lost unless constant
      if (!d.is_const) {
        out.lo_attained = out.hi_attained = false;
        if (out.real)
          finalize_real_stats(out);
        else
          out.sup_tight = false;
      }
      return out;
    }
    default:
      return std::nullopt;
  }
}

void flatten_compose(const Operator& op, cx& coeff, std::vector<Operator>& factors) {
  switch (op.kind()) {
    case OpKind::Compose:
      flatten_compose(op.child(0), coeff, factors);
      flatten_compose(op.child(1), coeff, factors);
      return;
    case OpKind::ScalarMul:
      coeff *= op.scalar();
      flatten_compose(op.child(0), coeff, factors);
      return;
    case OpKind::Identity:
      return;
    default:
      factors.push_back(op);
      return;
  }
}

std::optional<DiagonalView> chain_view(const Operator& op) {
  cx coeff(1, 0);
  std::vector<Operator> factors;
  flatten_compose(op, coeff, factors);

  for (const Operator& f : factors)
    if (f.kind() == OpKind::ZeroOp) return const_view(op.domain(), cx(0, 0));

  bool changed = true;
  while (changed && !factors.empty()) {
    changed = false;
    // certified isometry pairs X^* X vanish
    for (std::size_t i = 0; i + 1 < factors.size(); ++i) {
      if (is_adjoint_pair(factors[i], factors[i + 1]) &&
          factors[i + 1].isometry_certified()) {
        factors.erase(factors.begin() + i, factors.begin() + i + 2);
        changed = true;
        break;
      }
    }
    if (changed) continue;
    // remaining special pairs become materialized diagonals
    for (std::size_t i = 0; i + 1 < factors.size(); ++i) {
      if (auto pv = pair_view(factors[i], factors[i + 1])) {
        Operator d = diagonal_from_view(*pv);
        factors.erase(factors.begin() + i, factors.begin() + i + 2);
        factors.insert(factors.begin() + i, d);
        changed = true;
        break;
      }
    }
    if (changed) continue;
    // conjugation triples X^* D X
    for (std::size_t i = 0; i + 2 < factors.size(); ++i) {
      if (factors[i].kind() == OpKind::Adjoint &&
          factors[i].child(0).same_node(factors[i + 2])) {
        auto dv = view_of(factors[i + 1]);
        if (!dv) continue;
        auto cv = conjugated_view(factors[i + 2], *dv);
        if (!cv) continue;
        Operator d = diagonal_from_view(*cv);
        factors.erase(factors.begin() + i, factors.begin() + i + 3);
        factors.insert(factors.begin() + i, d);
        changed = true;
        break;
      }
    }
  }

  DiagonalView acc = const_view(op.domain(), cx(1, 0));
  for (const Operator& f : factors) {
    auto fv = view_of(f);
    if (!fv) return std::nullopt;
    auto m = mul_views(acc, *fv);
    if (!m) return std::nullopt;
    acc = *m;
    acc.space = op.domain();
  }
  if (coeff != cx(1, 0)) acc = scale_view(coeff, acc);
  acc.space = op.domain();
  return acc;
}

std::optional<DiagonalView> view_of(const Operator& op) {
  if (!(op.domain() == op.codomain()) && op.kind() != OpKind::Compose &&
      op.kind() != OpKind::ZeroOp)
    return std::nullopt;
  switch (op.kind()) {
    case OpKind::Identity:
      return const_view(op.domain(), cx(1, 0));
    case OpKind::ZeroOp:
      if (!(op.domain() == op.codomain())) return std::nullopt;
      return const_view(op.domain(), cx(0, 0));
    case OpKind::ScalarMul: {
      auto v = view_of(op.child(0));
      if (!v) return std::nullopt;
      return scale_view(op.scalar(), *v);
    }
    case OpKind::Diagonal: {
      const DiagonalSpec& spec = op.diagonal();
      if (spec.gen) {
        DiagonalView d;
        d.space = op.domain();
        IndexSet sp = op.domain();
        auto g = spec.gen;
        d.entry = [sp, g](const Index& ix) {
          auto r = sp.rank_of(ix);
          return r ? g(*r) : cx(0, 0);
        };
        d.real = spec.gen_real;
        d.lo = spec.gen_lo;
        d.hi = spec.gen_hi;
        d.lo_attained = spec.gen_lo_attained;
        d.hi_attained = spec.gen_hi_attained;
        d.sup = spec.gen_sup;
        d.sup_tight = spec.gen_sup_tight;
        return d;
      }
      Dim dim = op.domain().dim();
      bool tail_used = !dim.is_finite() || dim.n > spec.prefix.size();
      std::vector<cx> values = spec.prefix;
      if (dim.is_finite() && values.size() > dim.n) values.resize(dim.n);
      return seq_view_from_values(op.domain(), std::move(values), spec.tail, tail_used);
    }
    case OpKind::DenseMatrix: {
      const CMatrix& m = op.dense();
      if (m.rows != m.cols) return std::nullopt;
      std::vector<cx> diag(m.rows);
      for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j)
          if (i != j && m.at(i, j) != cx(0, 0)) return std::nullopt;
        diag[i] = m.at(i, i);
      }
      return seq_view_from_values(op.domain(), std::move(diag), cx(0, 0), false);
    }
    case OpKind::Add: {
      auto a = view_of(op.child(0));
      auto b = view_of(op.child(1));
      if (!a || !b) return std::nullopt;
      return add_views(*a, *b);
    }
    case OpKind::DirectSum: {
      auto a = view_of(op.child(0));
      auto b = view_of(op.child(1));
      if (!a || !b) return std::nullopt;
      return split_view(op.domain(), *a, *b);
    }
    case OpKind::Tensor: {
      auto a = view_of(op.child(0));
      auto b = view_of(op.child(1));
      if (!a || !b) return std::nullopt;
      return tensor_view(op.domain(), *a, *b);
    }
    case OpKind::Compose:
      return chain_view(op);
    default:
      return std::nullopt;
  }
}

}  // namespace

std::optional<DiagonalView> diagonal_view(const Operator& op) {
  if (!(op.domain() == op.codomain())) return std::nullopt;
  return view_of(op);
}

Operator diagonal_from_view(const DiagonalView& view) {
  DiagonalSpec spec;
  IndexSet sp = view.space;
  auto e = view.entry;
  spec.gen = [sp, e](std::uint64_t r) { return e(sp.index_at(r)); };
  spec.gen_tag = "view";
  spec.gen_sup = view.sup;
  spec.gen_sup_tight = view.sup_tight;
  spec.gen_real = view.real;
  spec.gen_lo = view.lo;
  spec.gen_hi = view.hi;
  spec.gen_lo_attained = view.lo_attained;
  spec.gen_hi_attained = view.hi_attained;
  return Operator::diagonal(view.space, std::move(spec));
}

std::optional<Operator> structural_sqrt(const Operator& op, double psd_tol) {
  if (auto v = diagonal_view(op)) {
    if (!v->nonnegative(psd_tol)) return std::nullopt;
    DiagonalView s;
    s.space = v->space;
    auto e = v->entry;
    s.entry = [e](const Index& ix) {
      return cx(std::sqrt(std::max(0.0, std::real(e(ix)))), 0.0);
    };
    s.real = true;
    s.lo = std::sqrt(std::max(0.0, v->lo));
    s.hi = std::sqrt(std::max(0.0, v->hi));
    s.lo_attained = v->lo_attained;
    s.hi_attained = v->hi_attained;
    s.sup = s.hi;
    s.sup_tight = v->hi_attained;
    s.is_const = v->is_const;
    if (v->is_const) s.const_value = cx(std::sqrt(std::max(0.0, std::real(v->const_value))), 0);
    return diagonal_from_view(s);
  }
  if (op.kind() == OpKind::DenseMatrix) {
    try {
      return Operator::dense_matrix(hermitian_sqrt(op.dense(), psd_tol));
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// norm bounds

namespace {

NormBounds structural_bounds(const Operator& op) {
  const double inf = std::numeric_limits<double>::infinity();
  switch (op.kind()) {
    case OpKind::Identity:
      return {1, 1, true};
    case OpKind::ZeroOp:
      return {0, 0, true};
    case OpKind::ScalarMul: {
      NormBounds c = structural_bounds(op.child(0));
      double s = std::abs(op.scalar());
      return {s * c.lower, s * c.upper, c.tight};
    }
    case OpKind::UnilateralShift: {
      double s = op.shift_weights().sup();
      return {s, s, true};
    }
    case OpKind::BilateralShift:
      return {op.bilateral_weight(), op.bilateral_weight(), true};
    case OpKind::Diagonal: {
      auto v = diagonal_view(op);
      if (v) return {v->sup_tight ? v->sup : 0.0, v->sup, v->sup_tight};
      return {0, inf, false};
    }
    case OpKind::DenseMatrix: {
      double s = spectral_norm(op.dense());
      return {s, s, true};
    }
    case OpKind::Adjoint:
      return structural_bounds(op.child(0));
    case OpKind::Compose: {
      NormBounds a = structural_bounds(op.child(0));
      NormBounds b = structural_bounds(op.child(1));
      // a certified-isometric outer factor preserves norms exactly
      if (op.child(0).isometry_certified()) return b;
      return {0, a.upper * b.upper, false};
    }
    case OpKind::Add: {
      NormBounds a = structural_bounds(op.child(0));
      NormBounds b = structural_bounds(op.child(1));
      return {0, a.upper + b.upper, false};
    }
    case OpKind::DirectSum: {
      NormBounds a = structural_bounds(op.child(0));
      NormBounds b = structural_bounds(op.child(1));
      return {std::max(a.lower, b.lower), std::max(a.upper, b.upper), a.tight && b.tight};
    }
    case OpKind::Tensor: {
      NormBounds a = structural_bounds(op.child(0));
      NormBounds b = structural_bounds(op.child(1));
      return {a.lower * b.lower, a.upper * b.upper, a.tight && b.tight};
    }
    case OpKind::Inclusion:
      return {1, 1, true};
    case OpKind::Embedding:
      if (op.embedding().orthonormal_columns) return {1, 1, true};
      return {0, inf, false};
  }
  return {0, inf, false};
}

}  // namespace

NormBounds norm_bounds(const Operator& op, const ToleranceProfile& tol) {
  if (auto v = diagonal_view(op)) {
    if (v->sup_tight) return {v->sup, v->sup, true};
  }
  NormBounds s = structural_bounds(op);
  if (s.tight) return s;
  if (auto v = diagonal_view(op)) s.upper = std::min(s.upper, v->sup);
  double lo = s.lower;
  for (const Index& ix : capped_window(op.domain(), tol.probe_radius, 256)) {
    SupportedVector v = SupportedVector::basis(op.domain(), ix);
    lo = std::max(lo, op.apply(v, tol.drop_tol).norm());
  }
  for (const SupportedVector& v : random_probe_vectors(op.domain(), tol))
    lo = std::max(lo, op.apply(v, tol.drop_tol).norm());
  s.lower = std::min(lo, s.upper);
  s.tight = s.upper - s.lower <= tol.identity_tol;
  return s;
}

std::optional<double> modulus_lower_bound(const Operator& modulus,
                                          const ToleranceProfile& tol) {
  (void)tol;
  auto v = diagonal_view(modulus);
  if (!v) return std::nullopt;
  if (v->is_const) return std::abs(v->const_value);
  if (!v->real) return std::nullopt;
  // the interval contains every entry, so it certifies inf |entry|
  if (v->lo <= 0.0 && v->hi >= 0.0) return 0.0;
  return std::min(std::abs(v->lo), std::abs(v->hi));
}

// ---------------------------------------------------------------------------
// polar decomposition for supported forms

namespace {

bool view_positive(const Operator& op, const ToleranceProfile& tol) {
  auto v = diagonal_view(op);
  return v && v->nonnegative(tol.psd_tol);
}

}  // namespace

PolarPair polar_and_modulus(const Operator& e, const ToleranceProfile& tol) {
  switch (e.kind()) {
    case OpKind::ZeroOp:
      return {e, Operator::zero(e.domain(), e.domain())};
    case OpKind::Identity:
      return {e, e};
    case OpKind::ScalarMul: {
      cx c = e.scalar();
      if (c == cx(0, 0))
        return {Operator::zero(e.domain(), e.codomain()),
                Operator::zero(e.domain(), e.domain())};
      PolarPair inner = polar_and_modulus(e.child(0), tol);
      cx phase = c / std::abs(c);
      Operator w = phase == cx(1, 0) ? inner.partial_isometry
                                     : Operator::scalar_mul(phase, inner.partial_isometry);
      return {w, Operator::scalar_mul(cx(std::abs(c), 0), inner.modulus)};
    }
    case OpKind::UnilateralShift: {
      const WeightSequence& w = e.shift_weights();
      std::vector<cx> prefix;
      for (const double p : w.prefix()) prefix.push_back(cx(p, 0));
      DiagonalSpec spec;
      if (w.kind() == WeightSequence::Kind::ExplicitConstTail) {
        spec.prefix = std::move(prefix);
        spec.tail = cx(w.tail(), 0);
      } else {
        WeightSequence ws = w;
        spec.gen = [ws](std::uint64_t r) { return cx(ws.weight(r), 0); };
        spec.gen_tag = "shift_weights";
        spec.gen_real = true;
        spec.gen_lo = ws.weight(0);
        spec.gen_hi = ws.sup();
        spec.gen_sup = ws.sup();
        spec.gen_sup_tight = true;
        spec.gen_lo_attained = true;
        spec.gen_hi_attained = true;
      }
      Operator u = Operator::unilateral_shift(WeightSequence::constant(1.0));
      return {u, Operator::diagonal(IndexSet::nat(), std::move(spec))};
    }
    case OpKind::DirectSum: {
      PolarPair a = polar_and_modulus(e.child(0), tol);
      PolarPair b = polar_and_modulus(e.child(1), tol);
      return {Operator::direct_sum(a.partial_isometry, b.partial_isometry),
              Operator::direct_sum(a.modulus, b.modulus)};
    }
    case OpKind::Tensor: {
      PolarPair a = polar_and_modulus(e.child(0), tol);
      PolarPair b = polar_and_modulus(e.child(1), tol);
      return {Operator::tensor(a.partial_isometry, b.partial_isometry),
              Operator::tensor(a.modulus, b.modulus)};
    }
    case OpKind::DenseMatrix: {
      DensePolar p = dense_polar(e.dense(), tol.drop_tol * 100);
      return {Operator::dense_matrix(p.partial_isometry), Operator::dense_matrix(p.modulus)};
    }
    case OpKind::Compose: {
      // isometry composed with a positive diagonal
      const Operator& w = e.child(0);
      const Operator& p = e.child(1);
      if (view_positive(p, tol)) {
        auto wc = certify_isometry(w, tol);
        if (wc) return {*wc, p};
      }
      break;
    }
    default:
      break;
  }
  // a bare (partial) isometry: E = E * (E^*E) with E^*E the range projection
  if (auto c = certify_isometry(e, tol))
    return {*c, Operator::identity(e.domain())};
  if (probe_partial_isometry(e, tol).ok) {
    Operator gram = Operator::compose(Operator::adjoint(e), e);
    return {e, gram};
  }
  throw UnsupportedFormError("unsupported polar form: " + e.describe());
}

}  // namespace bto
