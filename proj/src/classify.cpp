#include "bto/classify.hpp"

#include <cmath>

namespace bto {

namespace {

Operator gram(const Operator& a) { return Operator::compose(Operator::adjoint(a), a); }
Operator cogram(const Operator& a) { return Operator::compose(a, Operator::adjoint(a)); }

}  // namespace

BlockTriangular::BlockTriangular(Operator v, Operator e, Operator x)
    : v_(std::move(v)), e_(std::move(e)), x_(std::move(x)) {
  if (!(v_.domain() == v_.codomain()))
    throw StructuralError("block V must be an endomorphism of H1");
  if (!(x_.domain() == x_.codomain()))
    throw StructuralError("block X must be an endomorphism of H2");
  if (!(e_.codomain() == v_.domain()) || !(e_.domain() == x_.domain()))
    throw StructuralError("block E must map H2 = " + x_.domain().str() +
                          " into H1 = " + v_.domain().str() + "; got " + e_.domain().str() +
                          " -> " + e_.codomain().str());
  space_ = IndexSet::disjoint_union(h1(), h2());
  inc1_ = union_left_inclusion(h1(), h2());
  inc2_ = union_right_inclusion(h1(), h2());
  Operator proj1 = Operator::adjoint(inc1_);
  Operator proj2 = Operator::adjoint(inc2_);
  Operator tv = Operator::compose(inc1_, Operator::compose(v_, proj1));
  Operator te = Operator::compose(inc1_, Operator::compose(e_, proj2));
  Operator tx = Operator::compose(inc2_, Operator::compose(x_, proj2));
  full_ = Operator::add(Operator::add(tv, te), tx);
}

Operator BlockTriangular::embed_h2_endo(const Operator& a) const {
  return Operator::compose(inc2_, Operator::compose(a, Operator::adjoint(inc2_)));
}

CheckOutcome outcome_of(const ProbeResult& r) {
  CheckOutcome c;
  c.pass = r.ok;
  c.residual = r.max_residual;
  c.witness = r.witness;
  return c;
}

ShiftSubnormality shift_subnormality(const WeightSequence& w, std::uint64_t order,
                                     const ToleranceProfile& tol) {
  if (order < 1) throw StructuralError("shift_subnormality needs order >= 1");
  for (std::uint64_t n = 0; n <= 2 * order; ++n)
    if (w.weight(n) <= 0.0)
      throw StructuralError("shift_subnormality: zero weight at index " + std::to_string(n));

  std::vector<double> gamma(2 * order + 1);
  gamma[0] = 1.0;
  for (std::uint64_t n = 0; n + 1 <= 2 * order; ++n)
    gamma[n + 1] = gamma[n] * w.weight(n) * w.weight(n);

  ShiftSubnormality out;
  out.order = order;
  out.psd = true;
  out.min_eigenvalue = 0.0;
  bool first = true;
  for (std::uint64_t m = 1; m <= order; ++m) {
    for (int shifted = 0; shifted <= 1; ++shifted) {
      if (static_cast<std::uint64_t>(shifted) + 2 * (m - 1) > 2 * order) continue;
      CMatrix h(m, m);
      for (std::uint64_t i = 0; i < m; ++i)
        for (std::uint64_t j = 0; j < m; ++j)
          h.at(i, j) = cx(gamma[i + j + shifted], 0.0);
      double min_eig = 0.0;
      bool ok = psd_check(h, tol.psd_tol, &min_eig);
      if (first || min_eig < out.min_eigenvalue) out.min_eigenvalue = min_eig;
      first = false;
      if (!ok && out.psd) {
        out.psd = false;
        out.witness = std::to_string(m) + "x" + std::to_string(m) +
                      (shifted ? " shifted" : "") + " Hankel minor, min eigenvalue " +
                      std::to_string(min_eig);
      }
    }
  }
  return out;
}

EntryClassReport entry_class_predicates(const Operator& x, const ToleranceProfile& tol,
                                        bool subnormal_certificate) {
  if (!(x.domain() == x.codomain()))
    throw StructuralError("entry class predicates need an endomorphism");
  EntryClassReport r;

  ProbeResult iso = probe_equal(gram(x), Operator::identity(x.domain()), tol);
  r.isometric = iso.ok;
  ProbeResult coiso = probe_equal(cogram(x), Operator::identity(x.domain()), tol);
  r.unitary = iso.ok && coiso.ok;
  ProbeResult nrm = probe_equal(gram(x), cogram(x), tol);
  r.normal = nrm.ok;

  Operator xg = Operator::compose(x, gram(x));
  Operator gx = Operator::compose(gram(x), x);
  ProbeResult qn = probe_equal(xg, gx, tol);
  r.quasinormal = qn.ok;
  if (!qn.ok) r.quasinormal_witness = qn.witness;

  Operator commutator =
      Operator::add(gram(x), Operator::scalar_mul(cx(-1, 0), cogram(x)));
  PsdProbe hp = psd_probe(commutator, tol);
  r.hyponormal = hp.psd;
  r.hyponormal_window = hp.window_size;
  r.hyponormal_min_eig = hp.min_eigenvalue;

  if (subnormal_certificate) {
    r.subnormal.kind = SubnormalEvidence::Kind::ExplicitNormalExtension;
  } else if (r.normal) {
    r.subnormal.kind = SubnormalEvidence::Kind::ExplicitNormalExtension;
  } else if (x.kind() == OpKind::UnilateralShift) {
    ShiftSubnormality s = shift_subnormality(x.shift_weights(), 6, tol);
    r.subnormal.kind =
        s.psd ? SubnormalEvidence::Kind::HankelPsd : SubnormalEvidence::Kind::NotSubnormal;
    r.subnormal.order = s.order;
    r.subnormal.min_eigenvalue = s.min_eigenvalue;
    r.subnormal.witness = s.witness;
  } else if (r.quasinormal) {
    r.subnormal.kind = SubnormalEvidence::Kind::ByClassChain;
  } else {
    r.subnormal.kind = SubnormalEvidence::Kind::Unknown;
  }

  // monotone closure along the class chains
  if (r.unitary) {
    r.isometric = r.normal = true;
  }
  if (r.isometric || r.normal) r.quasinormal = true;
  if (r.quasinormal && !r.subnormal.subnormal() &&
      r.subnormal.kind == SubnormalEvidence::Kind::Unknown)
    r.subnormal.kind = SubnormalEvidence::Kind::ByClassChain;
  if (r.subnormal.subnormal()) r.hyponormal = true;
  return r;
}

std::string EntryClassReport::finest_label() const {
  if (unitary) return "U";
  if (normal) return "N";
  if (quasinormal) return "Q";
  if (subnormal.subnormal()) return "S";
  if (hyponormal) return "H";
  return "none";
}

ClassReport check_brownian_type(const BlockTriangular& t, const ToleranceProfile& tol,
                                bool subnormal_certificate) {
  ClassReport rep;
  rep.gqb1 = outcome_of(probe_equal(gram(t.V()), Operator::identity(t.h1()), tol));
  rep.gqb2 = outcome_of(probe_zero(Operator::compose(Operator::adjoint(t.V()), t.E()), tol));
  Operator ee = gram(t.E());
  rep.gqb3 = outcome_of(
      probe_equal(Operator::compose(t.X(), ee), Operator::compose(ee, t.X()), tol));

  try {
    PolarPair polar = polar_and_modulus(t.E(), tol);
    rep.polar_supported = true;
    rep.gqb3b = outcome_of(probe_equal(Operator::compose(t.X(), polar.modulus),
                                       Operator::compose(polar.modulus, t.X()), tol));
    // closure(ran |E|) reduces X: invariance of the initial space of the
    // polar partial isometry under X and X^*
    Operator p2 = Operator::compose(Operator::adjoint(polar.partial_isometry),
                                    polar.partial_isometry);
    Operator xp = Operator::compose(t.X(), p2);
    Operator xsp = Operator::compose(Operator::adjoint(t.X()), p2);
    ProbeResult inv1 = probe_equal(Operator::compose(p2, xp), xp, tol);
    ProbeResult inv2 = probe_equal(Operator::compose(p2, xsp), xsp, tol);
    CheckOutcome red;
    red.pass = inv1.ok && inv2.ok;
    red.residual = std::max(inv1.max_residual, inv2.max_residual);
    red.witness = inv1.ok ? inv2.witness : inv1.witness;
    rep.reduction = red;
  } catch (const UnsupportedFormError&) {
    rep.polar_supported = false;
  }

  rep.entry = entry_class_predicates(t.X(), tol, subnormal_certificate);
  rep.brownian_type = rep.gqb1.pass && rep.gqb2.pass && rep.gqb3.pass;
  rep.label = rep.brownian_type ? rep.entry.finest_label() : "not-brownian-type";
  return rep;
}

ExtensionCheck check_entrywise_extension(const BlockTriangular& t, const BlockTriangular& r,
                                         const Operator& inj1, const Operator& inj2,
                                         const ToleranceProfile& tol, bool check_modulus) {
  auto c1 = certify_isometry(inj1, tol);
  auto c2 = certify_isometry(inj2, tol);
  if (!c1 || !c2)
    throw StructuralError("entrywise extension embeddings must be isometric");

  ExtensionCheck out;
  out.v_extends = outcome_of(probe_equal(Operator::compose(r.V(), *c1),
                                         Operator::compose(*c1, t.V()), tol));
  out.e_extends = outcome_of(probe_equal(Operator::compose(r.E(), *c2),
                                         Operator::compose(*c1, t.E()), tol));
  out.x_extends = outcome_of(probe_equal(Operator::compose(r.X(), *c2),
                                         Operator::compose(*c2, t.X()), tol));
  out.pass = out.v_extends.pass && out.e_extends.pass && out.x_extends.pass;
  if (check_modulus) {
    try {
      PolarPair pt = polar_and_modulus(t.E(), tol);
      PolarPair pr = polar_and_modulus(r.E(), tol);
      out.modulus_inclusion =
          outcome_of(probe_equal(Operator::compose(*c2, pt.modulus),
                                 Operator::compose(pr.modulus, *c2), tol));
      out.pass = out.pass && out.modulus_inclusion->pass;
    } catch (const UnsupportedFormError&) {
      // left unset; caller sees polar is unsupported
    }
  }
  return out;
}

namespace {

TwoIsometryReport two_isometry_core(const Operator& top, const Operator& delta,
                                    const std::optional<Operator>& delta_structured,
                                    const ToleranceProfile& tol) {
  TwoIsometryReport rep;
  rep.delta = delta;

  Operator t2 = operator_pow(top, 2);
  Operator lhs = Operator::add(
      gram(t2), Operator::add(Operator::scalar_mul(cx(-2, 0), gram(top)),
                              Operator::identity(top.domain())));
  rep.two_isometry = outcome_of(probe_zero(lhs, tol));

  Operator delta_star =
      Operator::add(cogram(top), Operator::scalar_mul(cx(-1, 0), Operator::identity(top.domain())));
  rep.brownian_isometry = outcome_of(
      probe_zero(Operator::compose(delta, Operator::compose(delta_star, delta)), tol));

  const Operator& d = delta_structured ? *delta_structured : delta;
  NormBounds nb = norm_bounds(d, tol);
  rep.covariance_bounds = {std::sqrt(std::max(0.0, nb.lower)),
                           std::sqrt(std::max(0.0, nb.upper))};
  rep.covariance_tight = nb.tight;

  if (auto half = structural_sqrt(d, tol.psd_tol)) {
    Operator lhs_q = Operator::compose(d, top);
    Operator rhs_q = Operator::compose(*half, Operator::compose(top, *half));
    rep.quasi_brownian = outcome_of(probe_equal(lhs_q, rhs_q, tol));
  }
  return rep;
}

}  // namespace

TwoIsometryReport two_isometry_report(const BlockTriangular& t, const ToleranceProfile& tol) {
  Operator top = t.as_operator();
  Operator delta = Operator::add(
      gram(top), Operator::scalar_mul(cx(-1, 0), Operator::identity(top.domain())));

  // with gqb-1/2 in force, T^*T - I = 0 (+) (E^*E + X^*X - I); certify by
  // probe before using the structured form for norms and square roots
  Operator lower = Operator::add(
      Operator::add(gram(t.E()), gram(t.X())),
      Operator::scalar_mul(cx(-1, 0), Operator::identity(t.h2())));
  Operator block_delta = Operator::direct_sum(Operator::zero(t.h1(), t.h1()), lower);
  std::optional<Operator> structured;
  if (probe_equal(delta, block_delta, tol).ok) structured = block_delta;

  TwoIsometryReport rep = two_isometry_core(top, delta, structured, tol);

  // Brownian unitary structure: V, E/sigma isometries with complementary
  // ranges, X unitary; sigma = 0 degenerates to T unitary.
  double sigma = rep.covariance_bounds.second;
  CheckOutcome bu;
  if (!rep.covariance_tight) {
    rep.brownian_unitary = std::nullopt;
    return rep;
  }
  if (sigma <= tol.identity_tol) {
    ProbeResult u1 = probe_equal(gram(top), Operator::identity(top.domain()), tol);
    ProbeResult u2 = probe_equal(cogram(top), Operator::identity(top.domain()), tol);
    bu.pass = u1.ok && u2.ok;
    bu.residual = std::max(u1.max_residual, u2.max_residual);
    bu.witness = u1.ok ? u2.witness : u1.witness;
    rep.brownian_unitary = bu;
    return rep;
  }
  EntryClassReport xc = entry_class_predicates(t.X(), tol);
  Operator y = Operator::scalar_mul(cx(1.0 / sigma, 0), t.E());
  ProbeResult y_iso = probe_equal(gram(y), Operator::identity(t.h2()), tol);
  ProbeResult v_iso = probe_equal(gram(t.V()), Operator::identity(t.h1()), tol);
  ProbeResult split = probe_equal(Operator::add(cogram(t.V()), cogram(y)),
                                  Operator::identity(t.h1()), tol);
  bu.pass = xc.unitary && y_iso.ok && v_iso.ok && split.ok;
  if (!y_iso.ok) {
    bu.witness = y_iso.witness;
    bu.residual = y_iso.max_residual;
  } else if (!split.ok) {
    bu.witness = split.witness;
    bu.residual = split.max_residual;
  } else if (!xc.unitary && xc.quasinormal_witness) {
    bu.witness = xc.quasinormal_witness;
  }
  rep.brownian_unitary = bu;
  return rep;
}

TwoIsometryReport two_isometry_report(const Operator& t, const ToleranceProfile& tol) {
  Operator top = t;
  if (auto c = certify_isometry(t, tol)) top = *c;
  Operator delta = Operator::add(
      gram(top), Operator::scalar_mul(cx(-1, 0), Operator::identity(top.domain())));
  TwoIsometryReport rep = two_isometry_core(top, delta, std::nullopt, tol);
  rep.brownian_unitary = std::nullopt;
  return rep;
}

CohyponormalityReport cohyponormality_blocks(const BlockTriangular& t,
                                             const ToleranceProfile& tol) {
  CohyponormalityReport rep;
  const Operator &v = t.V(), &e = t.E(), &x = t.X();

  EntryClassReport xc = entry_class_predicates(x, tol);
  rep.x_hyponormal_pre = xc.hyponormal;

  // [T,T^*] = TT^* - T^*T blockwise for upper triangular T
  Operator ih1 = Operator::identity(t.h1());
  rep.b11 = Operator::add(cogram(e),
                          Operator::add(cogram(v), Operator::scalar_mul(cx(-1, 0), ih1)));
  rep.b12 = Operator::add(Operator::compose(e, Operator::adjoint(x)),
                          Operator::scalar_mul(cx(-1, 0),
                                               Operator::compose(Operator::adjoint(v), e)));
  rep.b21 = Operator::adjoint(rep.b12);
  rep.b22 = Operator::scalar_mul(
      cx(-1, 0), Operator::add(gram(e), Operator::add(gram(x), Operator::scalar_mul(
                                                                   cx(-1, 0), cogram(x)))));

  Operator top = t.as_operator();
  Operator commutator = Operator::add(
      cogram(top), Operator::scalar_mul(cx(-1, 0), gram(top)));
  rep.cohypo = psd_probe(commutator, tol);
  rep.hypo = psd_probe(Operator::scalar_mul(cx(-1, 0), commutator), tol);

  if (rep.cohypo.psd) {
    // T^* hyponormal forces E = 0 and X normal on the instance
    NormBounds eb = norm_bounds(e, tol);
    bool e_zero = eb.upper <= tol.identity_tol ||
                  probe_zero(e, tol).ok;
    bool x_normal = probe_equal(gram(x), cogram(x), tol).ok;
    rep.lemma_consistent = e_zero && x_normal;
  }

  if (xc.normal) {
    bool t_normal = probe_equal(Operator::compose(top, Operator::adjoint(top)),
                                Operator::compose(Operator::adjoint(top), top), tol).ok;
    bool e_zero = probe_zero(e, tol).ok;
    bool v_unitary = probe_equal(cogram(v), ih1, tol).ok &&
                     probe_equal(gram(v), ih1, tol).ok;
    rep.normal_equivalence = (t_normal == (e_zero && v_unitary));
  }
  return rep;
}

}  // namespace bto
