#ifndef BTO_EXTENSION_HPP
#define BTO_EXTENSION_HPP

#include <optional>
#include <vector>

#include "bto/classify.hpp"

namespace bto {

/// Deterministically enumerated orthonormal family of finitely supported
/// vectors, with reverse candidate lookup by support index.  Used for
/// complements of embedded subspaces, defect spaces and basis packings.
struct BasisFamily {
  IndexSet space;
  Dim size = Dim::finite(0);
  std::function<SupportedVector(std::uint64_t)> column;
  std::function<std::vector<std::uint64_t>(const Index&)> candidates;
};

BasisFamily empty_family(const IndexSet& space);
BasisFamily family_from_vectors(const IndexSet& space, std::vector<SupportedVector> vecs);
BasisFamily family_from_index_list(const IndexSet& space, std::vector<Index> indices);
/// All basis vectors of a space in canonical enumeration order.
BasisFamily family_from_enumeration(const IndexSet& space);
/// Single-index family given by a rank -> index progression with inverse.
BasisFamily family_from_index_progression(
    const IndexSet& space, Dim size, std::function<Index(std::uint64_t)> at,
    std::function<std::optional<std::uint64_t>(const Index&)> rank_of);

BasisFamily family_take(const BasisFamily& f, std::uint64_t k);
BasisFamily family_drop(const BasisFamily& f, std::uint64_t k);
/// Concatenation; a finite part goes first, two countable parts interleave.
BasisFamily family_concat(const BasisFamily& a, const BasisFamily& b);
/// Retag a family into a larger space along an injective index map.
BasisFamily family_map(const BasisFamily& f, const IndexSet& target,
                       std::function<Index(const Index&)> forward,
                       std::function<std::optional<Index>(const Index&)> backward);

/// Isometry sending the k-th canonical basis vector of `domain` to the k-th
/// family column.
Operator family_embedding(const IndexSet& domain, const BasisFamily& fam);

/// Gram-Schmidt an operator's window image into an orthonormal family
/// (exact entries; finite window evidence).
BasisFamily gram_schmidt_family(const Operator& positive_projection,
                                const ToleranceProfile& tol, std::size_t max_window = 128);

// ---------------------------------------------------------------------------

struct MneCertificate {
  enum class Kind { Auto, NormalSelf, AtomicShift, DirectSum, Explicit };
  Kind kind = Kind::Auto;
  // Explicit: a caller-supplied normal extension (verified before use)
  std::optional<Operator> explicit_n;
  std::optional<Operator> explicit_j;
  std::optional<BasisFamily> explicit_complement;
};

enum class MneKind { NormalSelf, AtomicShift, DirectSumOf, Explicit };

/// Minimal normal extension bundle: N on K2, isometric embedding J of H2,
/// projection P onto J(H2), and the orthonormal complement family of J(H2).
struct MneBundle {
  Operator s;
  Operator n;
  IndexSet k2;
  Operator j;
  Operator p;
  MneKind kind = MneKind::NormalSelf;
  std::vector<MneBundle> children;            // DirectSumOf
  std::optional<BergerMeasure> measure;       // AtomicShift
  BasisFamily complement;                     // K2 (-) J(H2)
  Dim complement_dim = Dim::finite(0);
  double max_residual = 0.0;                  // from construction probes
};

/// Build a minimal normal extension for: probed-normal operators, atomic
/// moment-generated unilateral shifts, direct sums of supported cases, or an
/// explicitly certified extension.  All bundle identities are probed before
/// returning; unsupported inputs raise UnsupportedFormError.
MneBundle build_mne(const Operator& s, const MneCertificate& cert,
                    const ToleranceProfile& tol);

struct MinimalityCheck {
  bool pass = false;
  std::uint64_t window = 0;
  std::vector<std::size_t> class_ranks;      // computed rank per coordinate class
  std::vector<std::size_t> predicted_ranks;  // Vandermonde prediction
};

/// Span-witness test: Gram ranks of {N^{*a} J e_b : a+b <= window} per
/// coordinate class against the atom-count prediction.  `power_step` checks
/// the same property for N^step as an extension of S^step.
MinimalityCheck mne_minimality_check(const MneBundle& mne, std::uint64_t window,
                                     double rank_tol, std::uint64_t power_step = 1);

/// Lift of a positive operator commuting with {S, S^*} to the commutant of
/// {N} (scalars on irreducible shift summands, the operator itself on
/// probed-normal summands, blockwise on direct sums).  The four defining
/// identities and the determination property are probed before returning.
Operator lift_modulus(const Operator& mod_e, const MneBundle& mne,
                      const ToleranceProfile& tol);

// ---------------------------------------------------------------------------

struct DefectSpec {
  Dim dim = Dim::finite(0);
  /// Orthonormal family spanning H1 (-) (ran V (+) closure ran E); the first
  /// `dim` vectors become the prescribed defect, the rest the auxiliary
  /// space of the construction.  When absent, a window Gram-Schmidt pool is
  /// computed (finite evidence only).
  std::optional<BasisFamily> pool;
};

struct ExtensionBundle {
  BlockTriangular t;
  BlockTriangular r;      // (V~, E~, N)
  MneBundle mne;
  IndexSet k1;
  Operator u;             // isometry K2 -> K1
  Operator lift;          // B = lift of |E|
  Operator inj1, inj2;    // H1 -> K1, H2 -> K2
  Operator mod_e;         // |E| on H2
  std::optional<IndexSet> m0, m1;
  BasisFamily defect_family;  // prescribed defect inside K1
  DefectSpec defect;
  Dim dim_k1 = Dim::aleph0();

  // verification summary
  ClassReport r_class;
  ExtensionCheck entrywise;
  CheckOutcome factorization;   // E~ = U B
  CheckOutcome defect_orthogonal;
  std::optional<std::size_t> defect_window_count;  // finite dims only
  double injectivity_lower = 0.0;  // certified lower bound of |E~| entries
};

/// The basic construction of a taut entrywise extension with prescribed
/// defect.  Throws on unsupported polar/lift structure or failed invariants.
ExtensionBundle basic_construction(const BlockTriangular& t, const MneBundle& mne,
                                   const DefectSpec& d, const ToleranceProfile& tol);

/// Bundle invariant re-verification (used by the CLI `verify` task).
struct BundleVerification {
  bool pass = false;
  ClassReport r_class;
  ExtensionCheck entrywise;
  CheckOutcome factorization;
  MinimalityCheck minimality;
};
BundleVerification verify_extension_bundle(const ExtensionBundle& b,
                                           const ToleranceProfile& tol);

struct KernelSplit {
  BlockTriangular kernel_part;     // (V, 0, S1)
  BlockTriangular injective_part;  // (V, E2, S2)
  CheckOutcome e1_zero, e2_injective;
  CheckOutcome etilde1_zero, etilde2_injective;
  CheckOutcome lifts_blockwise;
  bool both_brownian = false;
  double e2_lower = 0.0, etilde2_lower = 0.0;
};

/// Split along H2 = ker E (+) closure ran |E| (index-class split of a
/// direct-sum second column) and check the structural conclusions.
KernelSplit decompose_kernel_part(const BlockTriangular& t, const ExtensionBundle& r,
                                  const ToleranceProfile& tol);

/// Entrywise enlargement of the first column by an isometry W on L; the new
/// defect is the old one plus ker W^* (supplied as a family).
ExtensionBundle enlarge_first_column(const ExtensionBundle& r, const Operator& w,
                                     const BasisFamily& ker_w_star,
                                     const ToleranceProfile& tol);

struct PolarStructureReport {
  Operator u;        // polar partial isometry of E~
  Operator modulus;  // |E~|
  CheckOutcome extends_w;          // W included in U through the embeddings
  CheckOutcome ranges_orthogonal;  // ran V~ perp ran U
  bool pass = false;
};
PolarStructureReport polar_structure(const BlockTriangular& t, const ExtensionBundle& r,
                                     const ToleranceProfile& tol);

struct BuiltFromPolar {
  BlockTriangular r;
  Operator u, b;
  ClassReport r_class;
  ExtensionCheck entrywise;
  bool pass = false;
};
/// Assemble an extension from prescribed isometries and a lift, and verify
/// it is a taut extension with polar decomposition E~ = U B.
BuiltFromPolar build_from_polar(const BlockTriangular& t, const Operator& v_tilde,
                                const Operator& u, const Operator& b, const MneBundle& mne,
                                const Operator& inj1, const ToleranceProfile& tol);

struct DefectGalleryResult {
  BlockTriangular t;
  ExtensionBundle bundle;
  std::optional<std::size_t> t_defect_count;  // window count, finite case
  std::optional<std::size_t> r_defect_count;
};
/// Gallery of operators with prescribed defect p whose taut extension has
/// defect n (n <= p via the defect spec, n > p via first-column enlargement).
DefectGalleryResult defect_gallery(const Dim& p, const Dim& n, const ToleranceProfile& tol);

/// Window evidence for the dimension of a subspace given by its orthogonal
/// projection: numeric rank of the window compression (never exceeds the
/// true dimension, and reaches it once the window covers the subspace).
std::size_t defect_window_count(const Operator& complement_projection,
                                const ToleranceProfile& tol, double rank_tol = 1e-8,
                                std::size_t max_window = 96);

/// I - sum of range projections of the given partial isometries.
Operator complement_projection_of(const IndexSet& space,
                                  const std::vector<Operator>& partial_isometries);

/// Inclusion of Nat into Int by n -> n.
Operator nat_in_int_inclusion();

}  // namespace bto

#endif  // BTO_EXTENSION_HPP
