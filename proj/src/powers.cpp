#include "bto/powers.hpp"

#include <cmath>

namespace bto {

namespace {

Operator gram(const Operator& a) { return Operator::compose(Operator::adjoint(a), a); }

// n-th power with tensor/direct-sum/scalar structure preserved, so that the
// diagonal-view simplifier keeps working on power grams
Operator pow_simplified(const Operator& a, std::uint64_t n) {
  if (n == 0) return Operator::identity(a.domain());
  if (n == 1) return a;
  switch (a.kind()) {
    case OpKind::Identity:
      return a;
    case OpKind::ScalarMul:
      return Operator::scalar_mul(std::pow(a.scalar(), static_cast<double>(n)),
                                  pow_simplified(a.child(0), n));
    case OpKind::Tensor:
      return Operator::tensor(pow_simplified(a.child(0), n), pow_simplified(a.child(1), n));
    case OpKind::DirectSum:
      return Operator::direct_sum(pow_simplified(a.child(0), n),
                                  pow_simplified(a.child(1), n));
    default:
      return operator_pow(a, n);
  }
}

// sum_{j=0}^{n-1} X^{*j} X^j
Operator gram_sum(const Operator& x, std::uint64_t n) {
  Operator acc = Operator::identity(x.domain());
  Operator xs = Operator::adjoint(x);
  for (std::uint64_t j = 1; j < n; ++j)
    acc = Operator::add(acc, Operator::compose(pow_simplified(xs, j), pow_simplified(x, j)));
  return acc;
}

ToleranceProfile shrunk(const ToleranceProfile& tol, std::uint64_t n) {
  std::uint64_t r = tol.probe_radius > n + 4 ? tol.probe_radius - n : 4;
  return tol.with_radius(r);
}

Operator en_sum(const BlockTriangular& t, std::uint64_t n) {
  if (n == 0) return Operator::zero(t.h2(), t.h1());
  std::optional<Operator> acc;
  for (std::uint64_t j = 0; j < n; ++j) {
    Operator term = Operator::compose(
        operator_pow(t.V(), j),
        Operator::compose(t.E(), pow_simplified(t.X(), n - 1 - j)));
    acc = acc ? Operator::add(*acc, term) : term;
  }
  return *acc;
}

}  // namespace

PowerBundle block_power(const BlockTriangular& t, std::uint64_t n,
                        const ToleranceProfile& tol) {
  PowerBundle out;
  out.n = n;
  if (n == 0) {
    out.vn = Operator::identity(t.h1());
    out.xn = Operator::identity(t.h2());
    out.en = Operator::zero(t.h2(), t.h1());
    out.en_formula = out.en;
    out.block_probe.pass = true;
    return out;
  }
  out.vn = operator_pow(t.V(), n);
  out.xn = pow_simplified(t.X(), n);
  out.en_formula = en_sum(t, n);
  out.en = out.en_formula;
  BlockTriangular blocks(out.vn, out.en_formula, out.xn);
  out.block_probe = outcome_of(
      probe_equal(operator_pow(t.as_operator(), n), blocks.as_operator(), shrunk(tol, n)));
  return out;
}

CheckOutcome gram_identity_check(const BlockTriangular& t, std::uint64_t n,
                                 const ToleranceProfile& tol) {
  Operator en = en_sum(t, n);
  Operator lhs = gram(en);
  Operator rhs = Operator::compose(gram(t.E()), gram_sum(t.X(), n));
  return outcome_of(probe_equal(lhs, rhs, shrunk(tol, n)));
}

std::optional<Operator> power_modulus(const BlockTriangular& t, std::uint64_t n,
                                      const ToleranceProfile& tol) {
  // |E_n|^2 = E^*E sum_j X^{*j}X^j, certified by the gram identity probe
  if (!gram_identity_check(t, n, tol).pass) return std::nullopt;
  Operator sq = Operator::compose(gram(t.E()), gram_sum(t.X(), n));
  return structural_sqrt(sq, tol.psd_tol);
}

ClassSCondition power_classS_condition(const BlockTriangular& t, std::uint64_t n,
                                       const ToleranceProfile& tol) {
  if (n < 2) throw StructuralError("power_classS_condition needs n >= 2");
  ClassSCondition out;

  PolarPair polar = polar_and_modulus(t.E(), tol);
  auto view = diagonal_view(polar.modulus);

  // restriction of X to the closure of ran |E|
  std::optional<Operator> x2;
  bool vacuous = false;
  if (view && view->is_const) {
    if (std::abs(view->const_value) > tol.identity_tol) {
      x2 = t.X();
      out.restricted_to_range = true;
    } else {
      vacuous = true;  // E = 0
    }
  } else if (t.X().kind() == OpKind::DirectSum && view) {
    const IndexSet& a = t.h2().left();
    const IndexSet& b = t.h2().right();
    Operator incl = union_left_inclusion(a, b);
    Operator incr = union_right_inclusion(a, b);
    auto vl = diagonal_view(Operator::compose(Operator::adjoint(incl),
                                              Operator::compose(polar.modulus, incl)));
    auto vr = diagonal_view(Operator::compose(Operator::adjoint(incr),
                                              Operator::compose(polar.modulus, incr)));
    auto pick = [&](const Operator& inc) {
      return Operator::compose(Operator::adjoint(inc),
                               Operator::compose(t.X(), inc));
    };
    if (vl && vr && vl->is_const && vr->is_const) {
      bool lz = std::abs(vl->const_value) <= tol.identity_tol;
      bool rz = std::abs(vr->const_value) <= tol.identity_tol;
      if (lz && rz)
        vacuous = true;
      else if (lz)
        x2 = pick(incr);
      else if (rz)
        x2 = pick(incl);
      else
        x2 = t.X();
    }
  }
  if (!x2 && !vacuous) {
    auto low = modulus_lower_bound(polar.modulus, tol);
    if (low && *low > tol.identity_tol) {
      x2 = t.X();  // E injective: the restriction is all of H2
      out.restricted_to_range = false;
    } else {
      throw UnsupportedFormError(
          "unsupported modulus structure for the power class condition");
    }
  }

  if (vacuous) {
    out.commutation.pass = true;
    out.pass = true;
    return out;
  }

  Operator x2n = pow_simplified(*x2, n);
  Operator partial = Operator::add(
      gram_sum(*x2, n), Operator::scalar_mul(cx(-1, 0), Operator::identity(x2->domain())));
  out.commutation = outcome_of(probe_equal(Operator::compose(x2n, partial),
                                           Operator::compose(partial, x2n), shrunk(tol, n)));

  if (n == 2) {
    try {
      PolarPair p2 = polar_and_modulus(*x2, tol);
      out.square_modulus = outcome_of(
          probe_equal(Operator::compose(x2n, p2.modulus),
                      Operator::compose(p2.modulus, x2n), shrunk(tol, n)));
    } catch (const UnsupportedFormError&) {
      out.square_modulus = std::nullopt;
    }
  }

  // subnormality evidence for X^n: a weighted shift power splits over
  // residue classes into interleaved shifts, each tested by the moment
  // condition
  bool shifts_ok = true;
  if (x2->kind() == OpKind::UnilateralShift) {
    const WeightSequence& w = x2->shift_weights();
    for (std::uint64_t r = 0; r < n; ++r) {
      std::uint64_t order = 6;
      std::vector<double> prefix;
      for (std::uint64_t m = 0; m <= 2 * order; ++m) {
        double prod = 1.0;
        for (std::uint64_t l = 0; l < n; ++l) prod *= w.weight(r + m * n + l);
        prefix.push_back(prod);
      }
      double tail = prefix.back();
      ShiftSubnormality ev = shift_subnormality(
          WeightSequence::explicit_tail(std::move(prefix), tail), order, tol);
      shifts_ok = shifts_ok && ev.psd;
      out.power_shift_evidence.push_back(std::move(ev));
    }
  }

  out.pass = out.commutation.pass && shifts_ok &&
             (!out.square_modulus || out.square_modulus->pass);
  return out;
}

ShiftPowerCriterion shift_power_criterion(const WeightSequence& w, std::uint64_t n,
                                          const ToleranceProfile& tol) {
  if (n < 2) throw StructuralError("shift_power_criterion needs n >= 2");
  ShiftPowerCriterion out;
  std::uint64_t window = tol.probe_radius;

  for (std::uint64_t k = 0; k + 1 <= window + 2 * n; ++k) {
    if (w.weight(k) <= 0.0)
      throw StructuralError("shift_power_criterion needs positive weights");
    if (w.weight(k) > w.weight(k + 1) + 1e-12) out.precondition_ok = false;
  }

  out.constant = w.is_constant();
  for (std::uint64_t k = 0; k + 1 <= window; ++k) {
    if (std::abs(w.weight(k) - w.weight(k + 1)) > 1e-12) {
      out.first_nonconstant = k;
      break;
    }
  }

  out.sum_identity_holds = true;
  for (std::uint64_t k = 0; k <= window; ++k) {
    double lhs = 0.0, rhs = 0.0;
    for (std::uint64_t j = 1; j < n; ++j) {
      double pl = 1.0, pr = 1.0;
      for (std::uint64_t l = 0; l < j; ++l) {
        pl *= w.weight(k + l) * w.weight(k + l);
        pr *= w.weight(k + n + l) * w.weight(k + n + l);
      }
      lhs += pl;
      rhs += pr;
    }
    double res = std::abs(lhs - rhs);
    out.max_residual = std::max(out.max_residual, res);
    if (res > tol.identity_tol && out.sum_identity_holds) {
      out.sum_identity_holds = false;
      out.identity_fail_k = k;
      out.fail_residual = res;
    }
  }
  out.agree = out.constant == out.sum_identity_holds;
  return out;
}

ExtensionPowerReport extension_power(const BlockTriangular& t, const ExtensionBundle& r,
                                     std::uint64_t n, const ToleranceProfile& tol) {
  ExtensionPowerReport out;
  out.n = n;
  out.t_power = block_power(t, n, tol);

  // E~_n from the extension blocks
  const BlockTriangular& rt = r.r;
  std::optional<Operator> acc;
  for (std::uint64_t j = 0; j < n; ++j) {
    Operator term = Operator::compose(
        operator_pow(rt.V(), j),
        Operator::compose(rt.E(), pow_simplified(rt.X(), n - 1 - j)));
    acc = acc ? Operator::add(*acc, term) : term;
  }
  out.en_tilde = *acc;

  BlockTriangular tn(out.t_power.vn, out.t_power.en, out.t_power.xn);
  BlockTriangular rn(operator_pow(rt.V(), n).certified_isometry(), out.en_tilde,
                     pow_simplified(rt.X(), n));
  out.entrywise = check_entrywise_extension(tn, rn, r.inj1, r.inj2, shrunk(tol, n),
                                            /*check_modulus=*/false);

  // compression identity on H2: E_n^*E_n = J^* E~_n^* E~_n J
  Operator lhs = gram(out.t_power.en);
  Operator rhs = Operator::compose(
      Operator::adjoint(r.inj2),
      Operator::compose(gram(out.en_tilde), r.inj2));
  out.compression = outcome_of(probe_equal(lhs, rhs, shrunk(tol, n)));

  // class-Q inputs keep the modulus inclusion through powers
  EntryClassReport xcls = entry_class_predicates(t.X(), tol);
  if (xcls.quasinormal) {
    auto mt = power_modulus(t, n, tol);
    auto mr = power_modulus(rt, n, tol);
    if (mt && mr) {
      out.modulus_inclusion = outcome_of(
          probe_equal(Operator::compose(r.inj2, *mt),
                      Operator::compose(*mr, r.inj2), shrunk(tol, n)));
    }
  }

  out.power_minimality = mne_minimality_check(
      r.mne, std::min<std::uint64_t>(tol.probe_radius, 16), 1e-8, n);

  out.pass = out.t_power.block_probe.pass && out.entrywise.pass && out.compression.pass &&
             out.power_minimality.pass &&
             (!out.modulus_inclusion || out.modulus_inclusion->pass);
  return out;
}

}  // namespace bto
