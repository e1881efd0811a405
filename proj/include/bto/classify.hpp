#ifndef BTO_CLASSIFY_HPP
#define BTO_CLASSIFY_HPP

#include <optional>
#include <string>

#include "bto/analysis.hpp"

namespace bto {

/// Upper triangular 2x2 block operator [V E; 0 X] on H1 (+) H2.
class BlockTriangular {
 public:
  BlockTriangular(Operator v, Operator e, Operator x);

  const Operator& V() const { return v_; }
  const Operator& E() const { return e_; }
  const Operator& X() const { return x_; }
  const IndexSet& h1() const { return v_.domain(); }
  const IndexSet& h2() const { return x_.domain(); }
  const IndexSet& space() const { return space_; }

  const Operator& inc1() const { return inc1_; }  // H1 -> H1 (+) H2
  const Operator& inc2() const { return inc2_; }

  /// The full operator on H1 (+) H2 (cached; shared nodes keep the
  /// structural simplifier effective across T and T^*).
  const Operator& as_operator() const { return full_; }

  /// Lift an operator acting on H2 (resp. H1) to the block space.
  Operator embed_h2_endo(const Operator& a) const;

 private:
  Operator v_, e_, x_;
  IndexSet space_;
  Operator inc1_, inc2_, full_;
};

struct CheckOutcome {
  bool pass = false;
  double residual = 0.0;
  std::optional<ProbeWitness> witness;
};

CheckOutcome outcome_of(const ProbeResult& r);

/// Subnormality evidence for a single operator.
struct SubnormalEvidence {
  enum class Kind { HankelPsd, ExplicitNormalExtension, NotSubnormal, ByClassChain, Unknown };
  Kind kind = Kind::Unknown;
  std::uint64_t order = 0;   // HankelPsd
  double min_eigenvalue = 0; // Hankel outcome
  std::string witness;       // NotSubnormal description
  bool subnormal() const {
    return kind == Kind::HankelPsd || kind == Kind::ExplicitNormalExtension ||
           kind == Kind::ByClassChain;
  }
};

struct EntryClassReport {
  bool unitary = false, isometric = false, normal = false, quasinormal = false,
       hyponormal = false;
  SubnormalEvidence subnormal;
  std::optional<ProbeWitness> quasinormal_witness;
  std::size_t hyponormal_window = 0;
  double hyponormal_min_eig = 0.0;

  bool subnormal_flag() const { return subnormal.subnormal(); }
  /// Finest label along the chain U <= N <= Q <= S <= H.
  std::string finest_label() const;
};

/// Class predicates for an endomorphism: unitary/isometric/normal/quasinormal
/// by probes, hyponormal by window-compression psd, subnormal only for
/// weighted shifts (Hankel), probed-normal operators, explicit certificates,
/// or via the class chain; otherwise unknown.
EntryClassReport entry_class_predicates(const Operator& x, const ToleranceProfile& tol,
                                        bool subnormal_certificate = false);

struct ShiftSubnormality {
  bool psd = false;
  std::uint64_t order = 0;
  double min_eigenvalue = 0.0;
  std::string witness;  // failing minor description when not psd
};

/// Stieltjes moment test: gamma_n = prod w(l)^2 and psd of the Hankel
/// matrices [gamma_{i+j}] and [gamma_{i+j+1}] up to the given size.
ShiftSubnormality shift_subnormality(const WeightSequence& w, std::uint64_t order,
                                     const ToleranceProfile& tol);

struct ClassReport {
  CheckOutcome gqb1, gqb2, gqb3;
  std::optional<CheckOutcome> gqb3b;      // X|E| = |E|X when polar supported
  std::optional<CheckOutcome> reduction;  // closure(ran |E|) reduces X
  bool polar_supported = false;
  EntryClassReport entry;
  bool brownian_type = false;
  std::string label;
};

/// Definition conditions of a Brownian-type operator plus the induced
/// reduction of the entry and the finest entry class.
ClassReport check_brownian_type(const BlockTriangular& t, const ToleranceProfile& tol,
                                bool subnormal_certificate = false);

struct ExtensionCheck {
  CheckOutcome v_extends, e_extends, x_extends;
  std::optional<CheckOutcome> modulus_inclusion;
  bool pass = false;
};

/// Entrywise-extension probes through isometric embeddings inj1: H1 -> K1
/// and inj2: H2 -> K2; optionally also the modulus inclusion |E| <= |E~|.
ExtensionCheck check_entrywise_extension(const BlockTriangular& t, const BlockTriangular& r,
                                         const Operator& inj1, const Operator& inj2,
                                         const ToleranceProfile& tol,
                                         bool check_modulus = true);

struct TwoIsometryReport {
  CheckOutcome two_isometry;
  std::pair<double, double> covariance_bounds{0, 0};
  bool covariance_tight = false;
  CheckOutcome brownian_isometry;
  std::optional<CheckOutcome> quasi_brownian;   // nullopt: sqrt unsupported
  std::optional<CheckOutcome> brownian_unitary; // nullopt: structure unsupported
  Operator delta;                               // T^*T - I
};

TwoIsometryReport two_isometry_report(const BlockTriangular& t, const ToleranceProfile& tol);
TwoIsometryReport two_isometry_report(const Operator& t, const ToleranceProfile& tol);

struct CohyponormalityReport {
  Operator b11, b12, b21, b22;   // blocks of [T, T^*] = TT^* - T^*T
  bool x_hyponormal_pre = false;
  PsdProbe cohypo;               // [T,T^*] >= 0 evidence (T^* hyponormal)
  PsdProbe hypo;                 // -[T,T^*] >= 0 evidence (T hyponormal)
  std::optional<ProbeWitness> cohypo_witness;
  bool lemma_consistent = true;  // T^* hyponormal forces E = 0 and X normal
  std::optional<bool> normal_equivalence;  // class N: T normal <=> E=0 & V unitary
};

CohyponormalityReport cohyponormality_blocks(const BlockTriangular& t,
                                             const ToleranceProfile& tol);

}  // namespace bto

#endif  // BTO_CLASSIFY_HPP
