#include "bto/extension.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

namespace bto {

// ---------------------------------------------------------------------------
// basis families

BasisFamily empty_family(const IndexSet& space) {
  BasisFamily f;
  f.space = space;
  f.size = Dim::finite(0);
  f.column = [space](std::uint64_t) -> SupportedVector {
    throw StructuralError("empty family has no columns");
  };
  f.candidates = [](const Index&) { return std::vector<std::uint64_t>{}; };
  return f;
}

BasisFamily family_from_vectors(const IndexSet& space, std::vector<SupportedVector> vecs) {
  BasisFamily f;
  f.space = space;
  f.size = Dim::finite(vecs.size());
  auto store = std::make_shared<std::vector<SupportedVector>>(std::move(vecs));
  auto reverse = std::make_shared<std::map<Index, std::vector<std::uint64_t>>>();
  for (std::uint64_t r = 0; r < store->size(); ++r)
    for (const auto& e : (*store)[r].entries()) (*reverse)[e.first].push_back(r);
  f.column = [store](std::uint64_t r) { return store->at(r); };
  f.candidates = [reverse](const Index& ix) {
    auto it = reverse->find(ix);
    return it == reverse->end() ? std::vector<std::uint64_t>{} : it->second;
  };
  return f;
}

BasisFamily family_from_index_list(const IndexSet& space, std::vector<Index> indices) {
  std::vector<SupportedVector> vecs;
  vecs.reserve(indices.size());
  for (const Index& ix : indices) vecs.push_back(SupportedVector::basis(space, ix));
  return family_from_vectors(space, std::move(vecs));
}

BasisFamily family_from_enumeration(const IndexSet& space) {
  BasisFamily f;
  f.space = space;
  f.size = space.dim();
  IndexSet sp = space;
  f.column = [sp](std::uint64_t r) { return SupportedVector::basis(sp, sp.index_at(r)); };
  f.candidates = [sp](const Index& ix) -> std::vector<std::uint64_t> {
    auto r = sp.rank_of(ix);
    if (!r) return {};
    return {*r};
  };
  return f;
}

BasisFamily family_from_index_progression(
    const IndexSet& space, Dim size, std::function<Index(std::uint64_t)> at,
    std::function<std::optional<std::uint64_t>(const Index&)> rank_of) {
  BasisFamily f;
  f.space = space;
  f.size = size;
  IndexSet sp = space;
  f.column = [sp, at](std::uint64_t r) { return SupportedVector::basis(sp, at(r)); };
  f.candidates = [rank_of](const Index& ix) -> std::vector<std::uint64_t> {
    auto r = rank_of(ix);
    if (!r) return {};
    return {*r};
  };
  return f;
}

BasisFamily family_take(const BasisFamily& f, std::uint64_t k) {
  if (f.size.is_finite() && k >= f.size.n) return f;
  BasisFamily out = f;
  out.size = Dim::finite(k);
  auto cand = f.candidates;
  out.candidates = [cand, k](const Index& ix) {
    std::vector<std::uint64_t> rs;
    for (std::uint64_t r : cand(ix))
      if (r < k) rs.push_back(r);
    return rs;
  };
  return out;
}

BasisFamily family_drop(const BasisFamily& f, std::uint64_t k) {
  if (k == 0) return f;
  BasisFamily out;
  out.space = f.space;
  if (f.size.is_finite())
    out.size = Dim::finite(f.size.n > k ? f.size.n - k : 0);
  else
    out.size = Dim::aleph0();
  auto col = f.column;
  auto cand = f.candidates;
  out.column = [col, k](std::uint64_t r) { return col(r + k); };
  out.candidates = [cand, k](const Index& ix) {
    std::vector<std::uint64_t> rs;
    for (std::uint64_t r : cand(ix))
      if (r >= k) rs.push_back(r - k);
    return rs;
  };
  return out;
}

BasisFamily family_concat(const BasisFamily& a, const BasisFamily& b) {
  if (!(a.space == b.space)) throw StructuralError("family_concat: space mismatch");
  if (a.size.is_finite() && a.size.n == 0) return b;
  if (b.size.is_finite() && b.size.n == 0) return a;
  BasisFamily out;
  out.space = a.space;
  out.size = a.size + b.size;
  auto ca = a.column, cb = b.column;
  auto qa = a.candidates, qb = b.candidates;
  if (a.size.is_finite()) {
    std::uint64_t na = a.size.n;
    out.column = [ca, cb, na](std::uint64_t r) { return r < na ? ca(r) : cb(r - na); };
    out.candidates = [qa, qb, na](const Index& ix) {
      std::vector<std::uint64_t> rs = qa(ix);
      for (std::uint64_t r : qb(ix)) rs.push_back(r + na);
      return rs;
    };
  } else if (b.size.is_finite()) {
    std::uint64_t nb = b.size.n;
    out.column = [ca, cb, nb](std::uint64_t r) { return r < nb ? cb(r) : ca(r - nb); };
    out.candidates = [qa, qb, nb](const Index& ix) {
      std::vector<std::uint64_t> rs = qb(ix);
      for (std::uint64_t r : qa(ix)) rs.push_back(r + nb);
      return rs;
    };
  } else {
    out.column = [ca, cb](std::uint64_t r) { return r % 2 == 0 ? ca(r / 2) : cb(r / 2); };
    out.candidates = [qa, qb](const Index& ix) {
      std::vector<std::uint64_t> rs;
      for (std::uint64_t r : qa(ix)) rs.push_back(2 * r);
      for (std::uint64_t r : qb(ix)) rs.push_back(2 * r + 1);
      return rs;
    };
  }
  return out;
}

BasisFamily family_map(const BasisFamily& f, const IndexSet& target,
                       std::function<Index(const Index&)> forward,
                       std::function<std::optional<Index>(const Index&)> backward) {
  BasisFamily out;
  out.space = target;
  out.size = f.size;
  auto col = f.column;
  auto cand = f.candidates;
  IndexSet tgt = target;
  out.column = [col, forward, tgt](std::uint64_t r) {
    SupportedVector v = col(r);
    std::vector<std::pair<Index, cx>> terms;
    terms.reserve(v.entries().size());
    for (const auto& e : v.entries()) terms.emplace_back(forward(e.first), e.second);
    return SupportedVector::from_terms(tgt, std::move(terms), 0.0);
  };
  out.candidates = [cand, backward](const Index& ix) -> std::vector<std::uint64_t> {
    auto pre = backward(ix);
    if (!pre) return {};
    return cand(*pre);
  };
  return out;
}

Operator family_embedding(const IndexSet& domain, const BasisFamily& fam) {
  if (domain.dim() != fam.size)
    throw StructuralError("family_embedding: domain dimension " + domain.dim().str() +
                          " does not match family size " + fam.size.str());
  EmbeddingSpec spec;
  spec.tag = "family";
  spec.orthonormal_columns = true;
  IndexSet dom = domain;
  auto col = fam.column;
  auto cand = fam.candidates;
  spec.column = [dom, col](const Index& ix) {
    auto r = dom.rank_of(ix);
    if (!r) throw StructuralError("family_embedding: index outside domain");
    return col(*r);
  };
  spec.candidates = [dom, cand](const Index& ix) {
    std::vector<Index> out;
    Dim d = dom.dim();
    for (std::uint64_t r : cand(ix)) {
      if (d.is_finite() && r >= d.n) continue;
      out.push_back(dom.index_at(r));
    }
    return out;
  };
  return Operator::embedding(domain, fam.space, std::move(spec));
}

BasisFamily gram_schmidt_family(const Operator& positive_projection,
                                const ToleranceProfile& tol, std::size_t max_window) {
  const IndexSet& space = positive_projection.domain();
  std::vector<SupportedVector> basis;
  for (const Index& ix : capped_window(space, tol.probe_radius, max_window)) {
    SupportedVector v =
        positive_projection.apply(SupportedVector::basis(space, ix), tol.drop_tol);
    for (const SupportedVector& u : basis) v = v.minus(u.scaled(v.inner(u)), 0.0);
    double n = v.norm();
    if (n > 1e-8) basis.push_back(v.scaled(cx(1.0 / n, 0), tol.drop_tol));
  }
  return family_from_vectors(space, std::move(basis));
}

// ---------------------------------------------------------------------------
// minimal normal extensions

Operator nat_in_int_inclusion() {
  InjectionSpec spec;
  spec.tag = "nat_in_int";
  spec.forward = [](const Index& ix) { return ix; };
  spec.inverse = [](const Index& ix) -> std::optional<Index> {
    if (ix.atoms[0] < 0) return std::nullopt;
    return ix;
  };
  return Operator::inclusion(IndexSet::nat(), IndexSet::integers(), std::move(spec));
}

namespace {

// Unit vector over the atom coordinate at moment order c:
// v_c[j] = sqrt(w_j) r_j^c / sqrt(gamma_c) with r_j = sqrt(t_j).
std::vector<double> atom_profile(const BergerMeasure& mu, std::uint64_t c) {
  const auto& atoms = mu.atoms();
  std::vector<double> v(atoms.size());
  double gamma = mu.moment(c);
  for (std::size_t j = 0; j < atoms.size(); ++j)
    v[j] = std::sqrt(atoms[j].mass) * std::pow(std::sqrt(atoms[j].location),
                                               static_cast<double>(c)) /
           std::sqrt(gamma);
  return v;
}

// Householder complement of v inside C^k: columns 1..k-1 of the reflector
// sending e_0 to v (v real unit, v != e_0); they span v-perp.
std::vector<std::vector<double>> householder_complement(const std::vector<double>& v) {
  const std::size_t k = v.size();
  std::vector<std::vector<double>> cols;
  if (k <= 1) return cols;
  std::vector<double> u(v);
  u[0] -= 1.0;
  double uu = 0.0;
  for (double x : u) uu += x * x;
  for (std::size_t s = 1; s < k; ++s) {
    std::vector<double> col(k, 0.0);
    col[s] = 1.0;
    if (uu > 1e-28) {
      double factor = 2.0 * u[s] / uu;
      for (std::size_t i = 0; i < k; ++i) col[i] -= factor * u[i];
    }
    cols.push_back(std::move(col));
  }
  return cols;
}

// Complement of the embedded copy of H2 inside K2 = Fin(k) x Int for the
// atomic construction: full atom fibres over negative moment orders plus
// the Householder complements of the profile vectors over c >= 0.
BasisFamily atomic_complement_family(const IndexSet& k2, const BergerMeasure& mu) {
  const std::size_t k = mu.atom_count();
  auto class_count = [k](std::int64_t c) -> std::uint64_t {
    return c < 0 ? k : k - 1;
  };
  BasisFamily f;
  f.space = k2;
  f.size = Dim::aleph0();
  BergerMeasure measure = mu;
  IndexSet space = k2;

  // enumeration: walk Int classes in zigzag order, `class_count` slots each
  auto locate = [class_count](std::uint64_t r) -> std::pair<std::int64_t, std::uint64_t> {
    std::uint64_t base = 0;
    for (std::uint64_t rho = 0;; ++rho) {
      std::int64_t c = zigzag_value(rho);
      std::uint64_t n = class_count(c);
      if (r < base + n) return {c, r - base};
      base += n;
    }
  };
  auto base_of = [class_count](std::int64_t c) -> std::uint64_t {
    std::uint64_t rho_c = zigzag_rank(c);
    std::uint64_t base = 0;
    for (std::uint64_t rho = 0; rho < rho_c; ++rho) base += class_count(zigzag_value(rho));
    return base;
  };

  f.column = [measure, space, locate, k](std::uint64_t r) {
    auto [c, slot] = locate(r);
    std::vector<std::pair<Index, cx>> terms;
    if (c < 0) {
      terms.emplace_back(Index({static_cast<std::int64_t>(slot), c}), cx(1, 0));
    } else {
      std::vector<double> v = atom_profile(measure, static_cast<std::uint64_t>(c));
      auto cols = householder_complement(v);
      const std::vector<double>& col = cols.at(slot);
      for (std::size_t j = 0; j < k; ++j)
        if (col[j] != 0.0)
          terms.emplace_back(Index({static_cast<std::int64_t>(j), c}), cx(col[j], 0));
    }
    return SupportedVector::from_terms(space, std::move(terms), 0.0);
  };
  f.candidates = [class_count, base_of](const Index& ix) {
    std::int64_t c = ix.atoms[1];
    std::uint64_t n = class_count(c);
    std::uint64_t base = base_of(c);
    std::vector<std::uint64_t> rs(n);
    for (std::uint64_t s = 0; s < n; ++s) rs[s] = base + s;
    return rs;
  };
  return f;
}

void verify_mne(MneBundle& b, const ToleranceProfile& tol) {
  ProbeResult jj = probe_equal(Operator::compose(Operator::adjoint(b.j), b.j),
                               Operator::identity(b.s.domain()), tol);
  ProbeResult intertwine =
      probe_equal(Operator::compose(b.n, b.j), Operator::compose(b.j, b.s), tol);
  ProbeResult normal =
      probe_equal(Operator::compose(Operator::adjoint(b.n), b.n),
                  Operator::compose(b.n, Operator::adjoint(b.n)), tol);
  b.max_residual = std::max({jj.max_residual, intertwine.max_residual, normal.max_residual});
  if (!jj.ok) throw StructuralError("mne: embedding is not isometric on probes");
  if (!intertwine.ok) throw StructuralError("mne: N J = J S fails on probes");
  if (!normal.ok) throw StructuralError("mne: extension is not normal on probes");
}

}  // namespace

MneBundle build_mne(const Operator& s, const MneCertificate& cert,
                    const ToleranceProfile& tol) {
  MneCertificate::Kind kind = cert.kind;
  if (kind == MneCertificate::Kind::Auto) {
    if (s.kind() == OpKind::UnilateralShift &&
        s.shift_weights().kind() == WeightSequence::Kind::MomentGenerated)
      kind = MneCertificate::Kind::AtomicShift;
    else if (s.kind() == OpKind::DirectSum)
      kind = MneCertificate::Kind::DirectSum;
    else if (probe_equal(Operator::compose(Operator::adjoint(s), s),
                         Operator::compose(s, Operator::adjoint(s)), tol)
                 .ok)
      kind = MneCertificate::Kind::NormalSelf;
    else
      throw UnsupportedFormError("unsupported mne form: " + s.describe());
  }

  MneBundle b;
  b.s = s;
  switch (kind) {
    case MneCertificate::Kind::NormalSelf: {
      if (!probe_equal(Operator::compose(Operator::adjoint(s), s),
                       Operator::compose(s, Operator::adjoint(s)), tol)
               .ok)
        throw StructuralError("normal_self certificate: operator is not normal on probes");
      b.kind = MneKind::NormalSelf;
      b.k2 = s.domain();
      b.n = s;
      b.j = Operator::identity(s.domain());
      b.p = Operator::identity(s.domain());
      b.complement = empty_family(b.k2);
      b.complement_dim = Dim::finite(0);
      break;
    }
    case MneCertificate::Kind::AtomicShift: {
      if (s.kind() != OpKind::UnilateralShift ||
          s.shift_weights().kind() != WeightSequence::Kind::MomentGenerated)
        throw UnsupportedFormError(
            "atomic_shift certificate needs a moment-generated unilateral shift");
      const BergerMeasure& mu = s.shift_weights().measure();
      const std::size_t k = mu.atom_count();
      b.kind = MneKind::AtomicShift;
      b.measure = mu;
      b.k2 = IndexSet::product(IndexSet::fin(k), IndexSet::integers());
      DiagonalSpec radii;
      for (const auto& atom : mu.atoms())
        radii.prefix.push_back(cx(std::sqrt(atom.location), 0));
      radii.tail = radii.prefix.back();
      b.n = Operator::tensor(Operator::diagonal(IndexSet::fin(k), std::move(radii)),
                             Operator::bilateral_shift(1.0));
      // J e_c = sum_j v_c[j] f_c^{(j)}
      EmbeddingSpec je;
      je.tag = "mne_atomic";
      je.orthonormal_columns = true;
      IndexSet k2 = b.k2;
      BergerMeasure measure = mu;
      je.column = [k2, measure, k](const Index& ix) {
        std::int64_t c = ix.atoms[0];
        std::vector<double> v = atom_profile(measure, static_cast<std::uint64_t>(c));
        std::vector<std::pair<Index, cx>> terms;
        for (std::size_t j = 0; j < k; ++j)
          terms.emplace_back(Index({static_cast<std::int64_t>(j), c}), cx(v[j], 0));
        return SupportedVector::from_terms(k2, std::move(terms), 0.0);
      };
      je.candidates = [](const Index& ix) -> std::vector<Index> {
        std::int64_t c = ix.atoms[1];
        if (c < 0) return {};
        return {Index::scalar(c)};
      };
      b.j = Operator::embedding(IndexSet::nat(), b.k2, std::move(je));
      b.p = Operator::compose(b.j, Operator::adjoint(b.j));
      b.complement = atomic_complement_family(b.k2, mu);
      b.complement_dim = Dim::aleph0();
      break;
    }
    case MneCertificate::Kind::DirectSum: {
      if (s.kind() != OpKind::DirectSum)
        throw UnsupportedFormError("direct_sum certificate needs a DirectSum operator");
      MneCertificate sub;
      MneBundle left = build_mne(s.child(0), sub, tol);
      MneBundle right = build_mne(s.child(1), sub, tol);
      b.kind = MneKind::DirectSumOf;
      b.k2 = IndexSet::disjoint_union(left.k2, right.k2);
      b.n = Operator::direct_sum(left.n, right.n);
      b.j = Operator::direct_sum(left.j, right.j);
      b.p = Operator::direct_sum(left.p, right.p);
      IndexSet k2 = b.k2;
      auto fwdL = [](const Index& ix) { return ix.prefixed(0); };
      auto bwdL = [](const Index& ix) -> std::optional<Index> {
        if (ix.atoms[0] != 0) return std::nullopt;
        return Index(std::vector<std::int64_t>(ix.atoms.begin() + 1, ix.atoms.end()));
      };
      auto fwdR = [](const Index& ix) { return ix.prefixed(1); };
      auto bwdR = [](const Index& ix) -> std::optional<Index> {
        if (ix.atoms[0] != 1) return std::nullopt;
        return Index(std::vector<std::int64_t>(ix.atoms.begin() + 1, ix.atoms.end()));
      };
      b.complement = family_concat(family_map(left.complement, k2, fwdL, bwdL),
                                   family_map(right.complement, k2, fwdR, bwdR));
      b.complement_dim = left.complement_dim + right.complement_dim;
      b.children.push_back(std::move(left));
      b.children.push_back(std::move(right));
      break;
    }
    case MneCertificate::Kind::Explicit: {
      if (!cert.explicit_n || !cert.explicit_j || !cert.explicit_complement)
        throw StructuralError("explicit mne certificate needs N, J and the complement family");
      b.kind = MneKind::Explicit;
      b.n = *cert.explicit_n;
      b.j = *cert.explicit_j;
      b.k2 = b.n.domain();
      b.p = Operator::compose(b.j, Operator::adjoint(b.j));
      b.complement = *cert.explicit_complement;
      b.complement_dim = b.complement.size;
      bool s_normal = probe_equal(Operator::compose(Operator::adjoint(s), s),
                                  Operator::compose(s, Operator::adjoint(s)), tol)
                          .ok;
      if (!s_normal && b.complement_dim.is_finite())
        throw StructuralError(
            "finite nonzero codimension is impossible for a non-normal operand");
      break;
    }
    case MneCertificate::Kind::Auto:
      break;
  }
  verify_mne(b, tol);
  b.j = b.j.certified_isometry();
  return b;
}

namespace {

// class key of a K2 index for the span-witness grouping
struct ClassKeyExtract {
  std::size_t atom_count;
  std::function<std::pair<std::int64_t, std::size_t>(const Index&)> coord;  // (class, slot)
};

std::optional<ClassKeyExtract> class_extract(const MneBundle& mne) {
  if (mne.kind == MneKind::AtomicShift) {
    ClassKeyExtract e;
    e.atom_count = mne.measure->atom_count();
    e.coord = [](const Index& ix) {
      return std::make_pair(ix.atoms[1], static_cast<std::size_t>(ix.atoms[0]));
    };
    return e;
  }
  if (mne.kind == MneKind::Explicit && mne.k2.kind() == IndexSet::Kind::Int) {
    ClassKeyExtract e;
    e.atom_count = 1;
    e.coord = [](const Index& ix) { return std::make_pair(ix.atoms[0], std::size_t(0)); };
    return e;
  }
  return std::nullopt;
}

}  // namespace

MinimalityCheck mne_minimality_check(const MneBundle& mne, std::uint64_t window,
                                     double rank_tol, std::uint64_t power_step) {
  MinimalityCheck out;
  out.window = window;
  if (mne.kind == MneKind::NormalSelf) {
    out.pass = true;  // K2 = H2, nothing to span
    return out;
  }
  if (mne.kind == MneKind::DirectSumOf) {
    out.pass = true;
    for (const MneBundle& child : mne.children) {
      MinimalityCheck c = mne_minimality_check(child, window, rank_tol, power_step);
      out.pass = out.pass && c.pass;
      out.class_ranks.insert(out.class_ranks.end(), c.class_ranks.begin(),
                             c.class_ranks.end());
      out.predicted_ranks.insert(out.predicted_ranks.end(), c.predicted_ranks.begin(),
                                 c.predicted_ranks.end());
    }
    return out;
  }
  auto extract = class_extract(mne);
  if (!extract) {
    out.pass = false;
    return out;
  }
  const std::size_t k = extract->atom_count;
  Operator n_star = Operator::adjoint(mne.n);

  // vectors N^{* step a} J e_b, grouped by coordinate class
  std::map<std::int64_t, std::vector<std::vector<cx>>> classes;
  for (std::uint64_t b = 0; b <= window; ++b) {
    SupportedVector v = mne.j.apply(
        SupportedVector::basis(mne.s.domain(), mne.s.domain().index_at(b)), 0.0);
    for (std::uint64_t a = 0; a + b <= window; ++a) {
      if (a > 0)
        for (std::uint64_t st = 0; st < power_step; ++st) v = n_star.apply(v, 0.0);
      if (v.empty()) continue;
      std::int64_t cls = extract->coord(v.entries().front().first).first;
      std::vector<cx> coords(k, cx(0, 0));
      bool single_class = true;
      for (const auto& e : v.entries()) {
        auto [c2, slot] = extract->coord(e.first);
        if (c2 != cls) single_class = false;
        coords[slot] = e.second;
      }
      if (!single_class) {
        out.pass = false;
        return out;
      }
      classes[cls].push_back(std::move(coords));
    }
  }

  out.pass = true;
  for (const auto& [cls, vecs] : classes) {
    CMatrix m(k, vecs.size());
    for (std::size_t c = 0; c < vecs.size(); ++c)
      for (std::size_t r = 0; r < k; ++r) m.at(r, c) = vecs[c][r];
    std::size_t rank = numeric_rank(m, rank_tol);
    std::size_t predicted = std::min(k, vecs.size());
    out.class_ranks.push_back(rank);
    out.predicted_ranks.push_back(predicted);
    if (rank != predicted) out.pass = false;
  }
  return out;
}

namespace {

Operator restrict_block(const Operator& op, const Operator& inc) {
  return Operator::compose(Operator::adjoint(inc), Operator::compose(op, inc));
}

}  // namespace

Operator lift_modulus(const Operator& mod_e, const MneBundle& mne,
                      const ToleranceProfile& tol) {
  // precondition: |E| commutes with S and S^*
  Operator s = mne.s;
  if (!probe_equal(Operator::compose(mod_e, s), Operator::compose(s, mod_e), tol).ok ||
      !probe_equal(Operator::compose(mod_e, Operator::adjoint(s)),
                   Operator::compose(Operator::adjoint(s), mod_e), tol)
           .ok)
    throw StructuralError("lift: operand does not commute with the shift part on probes");

  Operator b = Operator::identity(mne.k2);  // replaced below
  switch (mne.kind) {
    case MneKind::NormalSelf:
      b = mod_e;
      break;
    case MneKind::AtomicShift:
    case MneKind::Explicit: {
      // irreducible shift summand: the commutant of {S, S^*} is scalar
      auto view = diagonal_view(mod_e);
      cx c = view && view->is_const ? view->const_value
                                    : mod_e.matrix_element(s.domain().index_at(0),
                                                           s.domain().index_at(0));
      if (std::abs(std::imag(c)) > tol.psd_tol || std::real(c) < -tol.psd_tol)
        throw UnsupportedFormError("unsupported lift form: non-positive scalar candidate");
      c = cx(std::max(0.0, std::real(c)), 0);
      if (!probe_equal(mod_e, Operator::scalar_mul(c, Operator::identity(s.domain())), tol).ok)
        throw UnsupportedFormError(
            "unsupported lift form: operand is not scalar on an irreducible shift summand");
      b = Operator::scalar_mul(c, Operator::identity(mne.k2));
      break;
    }
    case MneKind::DirectSumOf: {
      const IndexSet& h21 = mne.children[0].s.domain();
      const IndexSet& h22 = mne.children[1].s.domain();
      Operator incl = union_left_inclusion(h21, h22);
      Operator incr = union_right_inclusion(h21, h22);
      if (!probe_zero(Operator::compose(Operator::adjoint(incl),
                                        Operator::compose(mod_e, incr)),
                      tol)
               .ok ||
          !probe_zero(Operator::compose(Operator::adjoint(incr),
                                        Operator::compose(mod_e, incl)),
                      tol)
               .ok)
        throw UnsupportedFormError("unsupported lift form: operand mixes the summands");
      Operator b1 = lift_modulus(restrict_block(mod_e, incl), mne.children[0], tol);
      Operator b2 = lift_modulus(restrict_block(mod_e, incr), mne.children[1], tol);
      b = Operator::direct_sum(b1, b2);
      break;
    }
  }

  // defining identities of the lift
  ProbeResult through_j =
      probe_equal(Operator::compose(b, mne.j), Operator::compose(mne.j, mod_e), tol);
  ProbeResult commutes_n =
      probe_equal(Operator::compose(b, mne.n), Operator::compose(mne.n, b), tol);
  ProbeResult commutes_p =
      probe_equal(Operator::compose(b, mne.p), Operator::compose(mne.p, b), tol);
  if (!through_j.ok || !commutes_n.ok || !commutes_p.ok)
    throw StructuralError("lift verification failed on probes");
  PsdProbe pos = psd_probe(b, tol);
  if (!pos.psd) throw StructuralError("lift verification failed: not positive");
  // determination on the minimality window
  Operator n_star = Operator::adjoint(mne.n);
  for (std::uint64_t a = 1; a <= 3; ++a) {
    Operator pw = operator_pow(n_star, a);
    ProbeResult det =
        probe_equal(Operator::compose(b, Operator::compose(pw, mne.j)),
                    Operator::compose(pw, Operator::compose(mne.j, mod_e)), tol);
    if (!det.ok) throw StructuralError("lift determination check failed on probes");
  }
  return b;
}

// ---------------------------------------------------------------------------
// basic construction

namespace {

// family spanning K2 (-) J(closure ran |E|), aligned with the lift structure
BasisFamily modulus_range_complement(const MneBundle& mne, const Operator& mod_e,
                                     const ToleranceProfile& tol) {
  auto view = diagonal_view(mod_e);
  switch (mne.kind) {
    case MneKind::AtomicShift:
    case MneKind::Explicit: {
      if (view && view->is_const) {
        if (std::abs(view->const_value) > tol.identity_tol) return mne.complement;
        return family_from_enumeration(mne.k2);
      }
      break;
    }
    case MneKind::NormalSelf: {
      if (view) {
        if (view->is_const && std::abs(view->const_value) <= tol.identity_tol)
          return family_from_enumeration(mne.k2);
        if (view->real && view->lo > tol.identity_tol) return empty_family(mne.k2);
        if (view->is_const) return empty_family(mne.k2);
      }
      break;
    }
    case MneKind::DirectSumOf: {
      const IndexSet& h21 = mne.children[0].s.domain();
      const IndexSet& h22 = mne.children[1].s.domain();
      Operator incl = union_left_inclusion(h21, h22);
      Operator incr = union_right_inclusion(h21, h22);
      BasisFamily left =
          modulus_range_complement(mne.children[0], restrict_block(mod_e, incl), tol);
      BasisFamily right =
          modulus_range_complement(mne.children[1], restrict_block(mod_e, incr), tol);
      IndexSet k2 = mne.k2;
      auto fwdL = [](const Index& ix) { return ix.prefixed(0); };
      auto bwdL = [](const Index& ix) -> std::optional<Index> {
        if (ix.atoms[0] != 0) return std::nullopt;
        return Index(std::vector<std::int64_t>(ix.atoms.begin() + 1, ix.atoms.end()));
      };
      auto fwdR = [](const Index& ix) { return ix.prefixed(1); };
      auto bwdR = [](const Index& ix) -> std::optional<Index> {
        if (ix.atoms[0] != 1) return std::nullopt;
        return Index(std::vector<std::int64_t>(ix.atoms.begin() + 1, ix.atoms.end()));
      };
      return family_concat(family_map(left, k2, fwdL, bwdL),
                           family_map(right, k2, fwdR, bwdR));
    }
  }
  throw UnsupportedFormError(
      "unsupported modulus range structure for the basic construction");
}

void verify_family_orthogonality(const BasisFamily& fam,
                                 const std::vector<Operator>& adjoints,
                                 const ToleranceProfile& tol, const char* what) {
  std::uint64_t count = fam.size.is_finite() ? std::min<std::uint64_t>(fam.size.n, 8) : 8;
  for (std::uint64_t i = 0; i < count; ++i) {
    SupportedVector v = fam.column(i);
    for (std::uint64_t j = 0; j < i; ++j) {
      if (std::abs(v.inner(fam.column(j))) > 1e-9)
        throw StructuralError(std::string(what) + ": family is not orthonormal");
    }
    if (std::abs(v.norm() - 1.0) > 1e-9)
      throw StructuralError(std::string(what) + ": family vectors are not unit");
    for (const Operator& a : adjoints) {
      if (a.apply(v, tol.drop_tol).norm() > 1e-9)
        throw StructuralError(std::string(what) +
                              ": family vector is not orthogonal to the required ranges");
    }
  }
}

}  // namespace

Operator complement_projection_of(const IndexSet& space,
                                  const std::vector<Operator>& partial_isometries) {
  Operator p = Operator::identity(space);
  for (const Operator& w : partial_isometries)
    p = Operator::add(p, Operator::scalar_mul(cx(-1, 0),
                                              Operator::compose(w, Operator::adjoint(w))));
  return p;
}

std::size_t defect_window_count(const Operator& complement_projection,
                                const ToleranceProfile& tol, double rank_tol,
                                std::size_t max_window) {
  std::vector<Index> w =
      capped_window(complement_projection.domain(), tol.probe_radius, max_window);
  CMatrix m = compression(complement_projection, w);
  return numeric_rank(m, rank_tol);
}

ExtensionBundle basic_construction(const BlockTriangular& t, const MneBundle& mne,
                                   const DefectSpec& d, const ToleranceProfile& tol) {
  if (!(mne.s.same_node(t.X())) && !(probe_equal(mne.s, t.X(), tol).ok))
    throw StructuralError("mne bundle does not extend the (2,2) entry of the input");
  ClassReport cls = check_brownian_type(t, tol, true);
  if (!cls.brownian_type)
    throw StructuralError("basic construction requires a Brownian-type input");

  PolarPair polar = polar_and_modulus(t.E(), tol);
  Operator lift = lift_modulus(polar.modulus, mne, tol);
  BasisFamily m0fam = modulus_range_complement(mne, polar.modulus, tol);

  // defect pool and split into prescribed defect + auxiliary space
  BasisFamily pool = d.pool ? *d.pool
                            : gram_schmidt_family(
                                  complement_projection_of(
                                      t.h1(), {t.V().certified_isometry(),
                                               polar.partial_isometry}),
                                  tol);
  verify_family_orthogonality(pool, {Operator::adjoint(t.V()), Operator::adjoint(t.E())},
                              tol, "defect pool");
  BasisFamily defect_h1 = pool;
  BasisFamily aux = empty_family(t.h1());
  if (d.dim.is_finite()) {
    if (pool.size.is_finite() && d.dim.n > pool.size.n)
      throw StructuralError("requested defect exceeds the available pool");
    defect_h1 = family_take(pool, d.dim.n);
    aux = family_drop(pool, d.dim.n);
  } else if (pool.size.is_finite()) {
    throw StructuralError("countable defect requested from a finite pool");
  }

  // balancing space M1
  std::optional<IndexSet> m0sp, m1sp;
  if (m0fam.size.is_finite()) {
    if (m0fam.size.n > 0) m0sp = IndexSet::fin(m0fam.size.n);
  } else {
    m0sp = IndexSet::nat();
  }
  bool need_balance_inf = !m0fam.size.is_finite() || !aux.size.is_finite();
  if (need_balance_inf) {
    m1sp = IndexSet::nat();
  } else if (m0fam.size.n != aux.size.n) {
    throw StructuralError("cannot balance finite auxiliary spaces of sizes " +
                          aux.size.str() + " and " + m0fam.size.str());
  }

  // K1 = H1 (+) rest with rest = M0 (+) M1 (omitting absent parts)
  std::optional<IndexSet> rest;
  if (m0sp && m1sp)
    rest = IndexSet::disjoint_union(*m0sp, *m1sp);
  else if (m0sp)
    rest = *m0sp;
  else if (m1sp)
    rest = *m1sp;

  IndexSet k1 = rest ? IndexSet::disjoint_union(t.h1(), *rest) : t.h1();
  Operator inj1 =
      rest ? union_left_inclusion(t.h1(), *rest) : Operator::identity(t.h1());
  std::optional<Operator> inc_rest;
  std::optional<Operator> inc_m0;
  if (rest) {
    inc_rest = union_right_inclusion(t.h1(), *rest);
    if (m0sp && m1sp)
      inc_m0 = Operator::compose(*inc_rest, union_left_inclusion(*m0sp, *m1sp));
    else if (m0sp)
      inc_m0 = inc_rest;
  }

  // U: K2 -> K1 via U1 on the embedded copy and the complement packer on M0
  std::optional<Operator> u_acc;
  auto add_part = [&u_acc](const Operator& part) {
    u_acc = u_acc ? Operator::add(*u_acc, part) : part;
  };
  bool e_nonzero = norm_bounds(polar.modulus, tol).upper > tol.identity_tol;
  if (e_nonzero)
    add_part(Operator::compose(
        inj1, Operator::compose(polar.partial_isometry, Operator::adjoint(mne.j))));
  if (inc_m0) {
    Operator packer = family_embedding(*m0sp, m0fam);
    add_part(Operator::compose(*inc_m0, Operator::adjoint(packer)));
  }
  if (!u_acc) u_acc = Operator::zero(mne.k2, k1);
  Operator u = *u_acc;
  if (e_nonzero || inc_m0) {
    auto uc = certify_isometry(u, tol);
    if (!uc) throw StructuralError("basic construction: U is not isometric on probes");
    u = *uc;
  }

  // V~ = V on H1, the canonical basis unitary W on M0 (+) M1 -> aux (+) M1
  Operator v_tilde = t.V();
  if (rest) {
    BasisFamily aux_in_k1 = family_map(
        aux, k1, [](const Index& ix) { return ix.prefixed(0); },
        [](const Index& ix) -> std::optional<Index> {
          if (ix.atoms[0] != 0) return std::nullopt;
          return Index(std::vector<std::int64_t>(ix.atoms.begin() + 1, ix.atoms.end()));
        });
    BasisFamily targets = aux_in_k1;
    if (m1sp) {
      Operator inc_m1 =
          m0sp ? Operator::compose(*inc_rest, union_right_inclusion(*m0sp, *m1sp))
               : *inc_rest;
      IndexSet m1 = *m1sp;
      const InjectionSpec* unused = nullptr;
      (void)unused;
      BasisFamily m1fam = family_from_index_progression(
          k1, m1.dim(),
          [inc_m1, m1](std::uint64_t r) {
            return inc_m1.apply(SupportedVector::basis(m1, m1.index_at(r)), 0.0)
                .entries()
                .front()
                .first;
          },
          [inc_m1, m1](const Index& ix) -> std::optional<std::uint64_t> {
            SupportedVector pre =
                Operator::adjoint(inc_m1).apply(SupportedVector::basis(inc_m1.codomain(), ix),
                                                0.0);
            if (pre.empty()) return std::nullopt;
            return m1.rank_of(pre.entries().front().first);
          });
      targets = family_concat(aux_in_k1, m1fam);
    }
    Operator w_emb = family_embedding(*rest, targets);
    v_tilde = Operator::add(
        Operator::compose(inj1, Operator::compose(t.V(), Operator::adjoint(inj1))),
        Operator::compose(w_emb, Operator::adjoint(*inc_rest)));
  }
  auto vc = certify_isometry(v_tilde, tol);
  if (!vc) throw StructuralError("basic construction: V~ is not isometric on probes");
  v_tilde = *vc;

  Operator e_tilde = Operator::compose(u, lift);

  ExtensionBundle out{
      t,
      BlockTriangular(v_tilde, e_tilde, mne.n),
      mne,
      k1,
      u,
      lift,
      inj1,
      mne.j,
      polar.modulus,
      m0sp,
      m1sp,
      family_map(
          defect_h1, k1,
          [rest](const Index& ix) { return rest ? ix.prefixed(0) : ix; },
          [rest](const Index& ix) -> std::optional<Index> {
            if (!rest) return ix;
            if (ix.atoms[0] != 0) return std::nullopt;
            return Index(std::vector<std::int64_t>(ix.atoms.begin() + 1, ix.atoms.end()));
          }),
      d,
      k1.dim(),
      {},
      {},
      {},
      {},
      std::nullopt,
      0.0};

  // invariants
  out.r_class = check_brownian_type(out.r, tol, true);
  if (!out.r_class.brownian_type || !out.r_class.entry.normal)
    throw StructuralError("basic construction: extension is not of normal type on probes");
  out.entrywise = check_entrywise_extension(t, out.r, inj1, mne.j, tol, true);
  if (!out.entrywise.pass)
    throw StructuralError("basic construction: entrywise extension probes failed");
  out.factorization = outcome_of(
      probe_equal(Operator::compose(Operator::adjoint(u), e_tilde), lift, tol));

  // prescribed defect: orthogonality and window count
  {
    double worst = 0.0;
    std::uint64_t count =
        out.defect_family.size.is_finite()
            ? std::min<std::uint64_t>(out.defect_family.size.n, 8)
            : 8;
    Operator vstar = Operator::adjoint(v_tilde);
    Operator estar = Operator::adjoint(e_tilde);
    for (std::uint64_t i = 0; i < count; ++i) {
      SupportedVector vvec = out.defect_family.column(i);
      worst = std::max(worst, vstar.apply(vvec, tol.drop_tol).norm());
      worst = std::max(worst, estar.apply(vvec, tol.drop_tol).norm());
    }
    out.defect_orthogonal.pass = worst <= tol.identity_tol;
    out.defect_orthogonal.residual = worst;
    if (!out.defect_orthogonal.pass)
      throw StructuralError("basic construction: defect vectors are not orthogonal to the ranges");
  }
  if (d.dim.is_finite()) {
    // range projection of E~ through the support of the lift
    auto bview = diagonal_view(lift);
    Operator p_ran_b = Operator::identity(mne.k2);
    if (bview && !bview->is_const) {
      DiagonalView ind;
      ind.space = mne.k2;
      auto be = bview->entry;
      ind.entry = [be](const Index& ix) {
        return std::abs(be(ix)) > 1e-12 ? cx(1, 0) : cx(0, 0);
      };
      ind.real = true;
      ind.lo = 0;
      ind.hi = 1;
      ind.lo_attained = ind.hi_attained = true;
      ind.sup = 1;
      ind.sup_tight = true;
      p_ran_b = diagonal_from_view(ind);
    } else if (bview && bview->is_const &&
               std::abs(bview->const_value) <= tol.identity_tol) {
      p_ran_b = Operator::zero(mne.k2, mne.k2);
    }
    Operator p_ran_e = Operator::compose(u, Operator::compose(p_ran_b, Operator::adjoint(u)));
    Operator comp = Operator::add(
        complement_projection_of(k1, {v_tilde}),
        Operator::scalar_mul(cx(-1, 0), p_ran_e));
    out.defect_window_count = defect_window_count(comp, tol);
  }

  auto lower = modulus_lower_bound(lift, tol);
  out.injectivity_lower = lower ? *lower : 0.0;
  return out;
}

BundleVerification verify_extension_bundle(const ExtensionBundle& b,
                                           const ToleranceProfile& tol) {
  BundleVerification v;
  v.r_class = check_brownian_type(b.r, tol, true);
  v.entrywise = check_entrywise_extension(b.t, b.r, b.inj1, b.inj2, tol, true);
  v.factorization = outcome_of(probe_equal(
      b.r.E(), Operator::compose(b.u, b.lift), tol));
  v.minimality = mne_minimality_check(b.mne, std::min<std::uint64_t>(tol.probe_radius, 24),
                                      1e-8);
  v.pass = v.r_class.brownian_type && v.r_class.entry.normal && v.entrywise.pass &&
           v.factorization.pass && v.minimality.pass;
  return v;
}

// ---------------------------------------------------------------------------

KernelSplit decompose_kernel_part(const BlockTriangular& t, const ExtensionBundle& r,
                                  const ToleranceProfile& tol) {
  if (t.h2().kind() != IndexSet::Kind::Union || r.mne.kind != MneKind::DirectSumOf)
    throw UnsupportedFormError(
        "kernel decomposition needs a direct-sum second column with per-part moduli");
  const IndexSet& h21 = t.h2().left();
  const IndexSet& h22 = t.h2().right();
  Operator incl = union_left_inclusion(h21, h22);
  Operator incr = union_right_inclusion(h21, h22);

  Operator e1 = Operator::compose(t.E(), incl);
  Operator e2 = Operator::compose(t.E(), incr);
  Operator s1 = restrict_block(t.X(), incl);
  Operator s2 = restrict_block(t.X(), incr);

  KernelSplit out{BlockTriangular(t.V(), e1, s1), BlockTriangular(t.V(), e2, s2),
                  {},      {},      {}, {}, {}, false, 0.0, 0.0};

  out.e1_zero = outcome_of(probe_zero(e1, tol));
  PolarPair p2 = polar_and_modulus(e2, tol);
  auto low = modulus_lower_bound(p2.modulus, tol);
  out.e2_lower = low ? *low : 0.0;
  out.e2_injective.pass = out.e2_lower > tol.identity_tol;
  out.e2_injective.residual = out.e2_lower;

  ClassReport c1 = check_brownian_type(out.kernel_part, tol);
  ClassReport c2 = check_brownian_type(out.injective_part, tol);
  out.both_brownian = c1.brownian_type && c2.brownian_type;

  // restrictions of the extension column
  const IndexSet& k21 = r.mne.children[0].k2;
  const IndexSet& k22 = r.mne.children[1].k2;
  Operator kincl = union_left_inclusion(k21, k22);
  Operator kincr = union_right_inclusion(k21, k22);
  Operator et1 = Operator::compose(r.r.E(), kincl);
  Operator et2 = Operator::compose(r.r.E(), kincr);
  out.etilde1_zero = outcome_of(probe_zero(et1, tol));
  Operator b2 = restrict_block(r.lift, kincr);
  auto blow = modulus_lower_bound(b2, tol);
  out.etilde2_lower = blow ? *blow : 0.0;
  out.etilde2_injective.pass = out.etilde2_lower > tol.identity_tol;
  out.etilde2_injective.residual = out.etilde2_lower;

  // the lift acts blockwise
  Operator b1 = restrict_block(r.lift, kincl);
  Operator reassembled = Operator::direct_sum(b1, b2);
  out.lifts_blockwise = outcome_of(probe_equal(r.lift, reassembled, tol));
  return out;
}

ExtensionBundle enlarge_first_column(const ExtensionBundle& r, const Operator& w,
                                     const BasisFamily& ker_w_star,
                                     const ToleranceProfile& tol) {
  auto wc = certify_isometry(w, tol);
  if (!wc) throw StructuralError("first-column enlargement needs an isometric W");
  const IndexSet& l = w.domain();
  IndexSet k1p = IndexSet::disjoint_union(r.k1, l);
  Operator inck1 = union_left_inclusion(r.k1, l);
  Operator incl = union_right_inclusion(r.k1, l);

  Operator u_tilde = Operator::direct_sum(r.r.V(), *wc).certified_isometry();
  Operator f_tilde = Operator::compose(inck1, r.r.E());
  Operator u_new = Operator::compose(inck1, r.u).certified_isometry();

  ExtensionBundle out = r;
  out.r = BlockTriangular(u_tilde, f_tilde, r.r.X());
  out.k1 = k1p;
  out.u = u_new;
  out.inj1 = Operator::compose(inck1, r.inj1).certified_isometry();
  out.dim_k1 = k1p.dim();

  auto fwdL = [](const Index& ix) { return ix.prefixed(0); };
  auto bwdL = [](const Index& ix) -> std::optional<Index> {
    if (ix.atoms[0] != 0) return std::nullopt;
    return Index(std::vector<std::int64_t>(ix.atoms.begin() + 1, ix.atoms.end()));
  };
  auto fwdR = [](const Index& ix) { return ix.prefixed(1); };
  auto bwdR = [](const Index& ix) -> std::optional<Index> {
    if (ix.atoms[0] != 1) return std::nullopt;
    return Index(std::vector<std::int64_t>(ix.atoms.begin() + 1, ix.atoms.end()));
  };
  out.defect_family = family_concat(family_map(r.defect_family, k1p, fwdL, bwdL),
                                    family_map(ker_w_star, k1p, fwdR, bwdR));
  out.defect.dim = r.defect.dim + ker_w_star.size;
  out.defect.pool = std::nullopt;

  // checks: |F~| = |E~| and the refreshed bundle probes
  ProbeResult moduli = probe_equal(
      Operator::compose(Operator::adjoint(f_tilde), f_tilde),
      Operator::compose(Operator::adjoint(r.r.E()), r.r.E()), tol);
  if (!moduli.ok)
    throw StructuralError("first-column enlargement changed the modulus on probes");
  out.r_class = check_brownian_type(out.r, tol, true);
  out.entrywise = check_entrywise_extension(out.t, out.r, out.inj1, out.inj2, tol, true);
  out.factorization =
      outcome_of(probe_equal(Operator::compose(Operator::adjoint(out.u), f_tilde),
                             out.lift, tol));
  if (!out.r_class.brownian_type || !out.entrywise.pass)
    throw StructuralError("first-column enlargement failed bundle probes");

  if (out.defect.dim.is_finite()) {
    PolarPair pf = polar_and_modulus(f_tilde, tol);
    auto bview = diagonal_view(out.lift);
    Operator comp = complement_projection_of(k1p, {u_tilde, pf.partial_isometry});
    if (bview && !bview->is_const) {
      DiagonalView ind;
      ind.space = out.mne.k2;
      auto be = bview->entry;
      ind.entry = [be](const Index& ix) {
        return std::abs(be(ix)) > 1e-12 ? cx(1, 0) : cx(0, 0);
      };
      ind.real = true;
      ind.lo = 0;
      ind.hi = 1;
      ind.lo_attained = ind.hi_attained = true;
      ind.sup = 1;
      ind.sup_tight = true;
      Operator p_ran = Operator::compose(
          out.u, Operator::compose(diagonal_from_view(ind), Operator::adjoint(out.u)));
      comp = Operator::add(complement_projection_of(k1p, {u_tilde}),
                           Operator::scalar_mul(cx(-1, 0), p_ran));
    }
    out.defect_window_count = defect_window_count(comp, tol);
  } else {
    out.defect_window_count = std::nullopt;
  }
  return out;
}

PolarStructureReport polar_structure(const BlockTriangular& t, const ExtensionBundle& r,
                                     const ToleranceProfile& tol) {
  auto elow = modulus_lower_bound(r.mod_e, tol);
  if (!elow || *elow <= tol.identity_tol)
    throw StructuralError(
        "polar structure needs an injective (1,2) entry; use the kernel decomposition");
  PolarPair pe = polar_and_modulus(t.E(), tol);
  PolarPair pr = polar_and_modulus(r.r.E(), tol);

  PolarStructureReport out{pr.partial_isometry, pr.modulus, {}, {}, false};
  out.extends_w = outcome_of(
      probe_equal(Operator::compose(pr.partial_isometry, r.inj2),
                  Operator::compose(r.inj1, pe.partial_isometry), tol));
  out.ranges_orthogonal = outcome_of(probe_zero(
      Operator::compose(Operator::adjoint(r.r.V()), pr.partial_isometry), tol));
  ProbeResult mod_is_lift = probe_equal(pr.modulus, r.lift, tol);
  out.pass = out.extends_w.pass && out.ranges_orthogonal.pass && mod_is_lift.ok;
  return out;
}

BuiltFromPolar build_from_polar(const BlockTriangular& t, const Operator& v_tilde,
                                const Operator& u, const Operator& b, const MneBundle& mne,
                                const Operator& inj1, const ToleranceProfile& tol) {
  auto vc = certify_isometry(v_tilde, tol);
  auto uc = certify_isometry(u, tol);
  if (!vc || !uc) throw StructuralError("build_from_polar needs isometric V~ and U");
  if (!probe_zero(Operator::compose(Operator::adjoint(*vc), *uc), tol).ok)
    throw StructuralError("build_from_polar needs orthogonal ranges");
  PsdProbe pos = psd_probe(b, tol);
  if (!pos.psd) throw StructuralError("build_from_polar needs a positive lift");

  BuiltFromPolar out{BlockTriangular(*vc, Operator::compose(*uc, b), mne.n), *uc, b,
                     {},  {},  false};
  out.r_class = check_brownian_type(out.r, tol, true);
  out.entrywise = check_entrywise_extension(t, out.r, inj1, mne.j, tol, true);
  PolarPair pp = polar_and_modulus(out.r.E(), tol);
  bool polar_matches = probe_equal(pp.modulus, b, tol).ok &&
                       probe_equal(pp.partial_isometry, *uc, tol).ok;
  out.pass = out.r_class.brownian_type && out.r_class.entry.normal && out.entrywise.pass &&
             polar_matches;
  return out;
}

DefectGalleryResult defect_gallery(const Dim& p, const Dim& n, const ToleranceProfile& tol) {
  if (p.is_finite() && p.n > 8) throw StructuralError("defect gallery: p must be <= 8");
  if (n.is_finite() && n.n > 8) throw StructuralError("defect gallery: n must be <= 8");

  Operator s = Operator::unilateral_shift(WeightSequence::from_measure(
      BergerMeasure({{1.0, 0.5}, {4.0, 0.5}})));

  Operator v, e;
  BasisFamily pool = empty_family(IndexSet::nat());
  if (p.is_finite()) {
    v = affine_nat_injection(2, p.n);
    e = affine_nat_injection(2, p.n + 1);
    std::vector<Index> defect;
    for (std::uint64_t i = 0; i < p.n; ++i)
      defect.push_back(Index::scalar(static_cast<std::int64_t>(i)));
    pool = family_from_index_list(IndexSet::nat(), std::move(defect));
  } else {
    v = affine_nat_injection(3, 0);
    e = affine_nat_injection(3, 1);
    pool = family_from_index_progression(
        IndexSet::nat(), Dim::aleph0(),
        [](std::uint64_t r) { return Index::scalar(static_cast<std::int64_t>(3 * r + 2)); },
        [](const Index& ix) -> std::optional<std::uint64_t> {
          if (ix.atoms[0] % 3 != 2) return std::nullopt;
          return static_cast<std::uint64_t>((ix.atoms[0] - 2) / 3);
        });
  }

  MneBundle mne = build_mne(s, {}, tol);
  bool enlarge = false;
  Dim base_defect = n;
  if (p.is_finite()) {
    if (n.is_finite() && n.n <= p.n) {
      base_defect = n;
    } else {
      base_defect = p;  // take the whole pool, then enlarge
      enlarge = true;
    }
  }
  BlockTriangular t(v, e, s);
  DefectGalleryResult out{t, basic_construction(t, mne, DefectSpec{base_defect, pool}, tol),
                          std::nullopt, std::nullopt};

  if (enlarge) {
    if (n.is_finite()) {
      std::uint64_t extra = n.n - p.n;
      Operator w = operator_pow(
          Operator::unilateral_shift(WeightSequence::constant(1.0)), extra == 0 ? 1 : extra);
      if (extra == 0) w = Operator::identity(IndexSet::nat());
      std::vector<Index> ker;
      for (std::uint64_t i = 0; i < extra; ++i)
        ker.push_back(Index::scalar(static_cast<std::int64_t>(i)));
      out.bundle = enlarge_first_column(
          out.bundle, w, family_from_index_list(IndexSet::nat(), ker), tol);
    } else {
      Operator w = affine_nat_injection(2, 0);
      BasisFamily ker = family_from_index_progression(
          IndexSet::nat(), Dim::aleph0(),
          [](std::uint64_t r) {
            return Index::scalar(static_cast<std::int64_t>(2 * r + 1));
          },
          [](const Index& ix) -> std::optional<std::uint64_t> {
            if (ix.atoms[0] % 2 != 1) return std::nullopt;
            return static_cast<std::uint64_t>((ix.atoms[0] - 1) / 2);
          });
      out.bundle = enlarge_first_column(out.bundle, w, ker, tol);
    }
  }

  if (p.is_finite()) {
    out.t_defect_count = defect_window_count(
        complement_projection_of(out.t.h1(), {v.certified_isometry(),
                                              e.certified_isometry()}),
        tol);
  }
  if (out.bundle.defect.dim.is_finite())
    out.r_defect_count = out.bundle.defect_window_count;
  return out;
}

}  // namespace bto
