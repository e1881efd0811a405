#ifndef BTO_ANALYSIS_HPP
#define BTO_ANALYSIS_HPP

#include <functional>
#include <optional>
#include <string>

#include "bto/operators.hpp"
#include "bto/parallel.hpp"

namespace bto {

struct ToleranceProfile {
  double identity_tol = 1e-10;
  double psd_tol = 1e-9;
  double drop_tol = 1e-14;
  std::uint64_t probe_radius = 32;
  std::uint64_t random_probes = 64;
  std::uint64_t seed = 0x5eedULL;

  ToleranceProfile with_radius(std::uint64_t r) const {
    ToleranceProfile t = *this;
    t.probe_radius = r;
    return t;
  }
};

struct ProbeWitness {
  SupportedVector vector;
  double residual = 0.0;
  std::string note;
};

struct ProbeResult {
  bool ok = false;
  double max_residual = 0.0;
  std::uint64_t probes = 0;
  std::optional<ProbeWitness> witness;
};

/// Compare two operators on the domain window (canonical rank <=
/// probe_radius) and on random finitely supported vectors.  Returns the
/// first counterexample in window order, then by random draw order.
ProbeResult probe_equal(const Operator& a, const Operator& b,
                        const ToleranceProfile& tol, Exec exec = Exec::Parallel);

/// probe_equal against the zero operator.
ProbeResult probe_zero(const Operator& a, const ToleranceProfile& tol,
                       Exec exec = Exec::Parallel);

/// <a u, v> == <u, a^* v> over window probe pairs.
ProbeResult probe_adjoint_consistency(const Operator& a, const ToleranceProfile& tol);

/// Isometry probe a^* a = I; on success returns a certified copy.
ProbeResult probe_isometry(const Operator& a, const ToleranceProfile& tol);
std::optional<Operator> certify_isometry(const Operator& a, const ToleranceProfile& tol);
/// Partial isometry probe a a^* a = a.
ProbeResult probe_partial_isometry(const Operator& a, const ToleranceProfile& tol);

/// Window with at most max_count elements (radius shrunk as needed).
std::vector<Index> capped_window(const IndexSet& space, std::uint64_t radius,
                                 std::size_t max_count);

/// Exact compression matrix M[i][j] = <op e_{w[j]}, e_{w[i]}>.
CMatrix compression(const Operator& op, const std::vector<Index>& window,
                    Exec exec = Exec::Parallel);

struct PsdProbe {
  bool psd = false;
  double min_eigenvalue = 0.0;
  std::size_t window_size = 0;
};
/// Positivity evidence: psd of the window compression (exact entries).
PsdProbe psd_probe(const Operator& op, const ToleranceProfile& tol,
                   std::size_t max_window = 96);

/// Deterministic random finitely supported vectors in a space window.
std::vector<SupportedVector> random_probe_vectors(const IndexSet& space,
                                                  const ToleranceProfile& tol);

// ---------------------------------------------------------------------------
// Structural diagonal views

/// Pointwise view of an operator that acts diagonally on the canonical
/// basis, with certified entry statistics over the WHOLE space (window scans
/// plus tail analysis of the constituent sequences).
struct DiagonalView {
  IndexSet space;
  std::function<cx(const Index&)> entry;
  bool is_const = false;
  cx const_value{0, 0};
  // real-entry interval [lo, hi] containing every entry; the attained flags
  // say the endpoint is reached (possibly as a limit) by some entry
  bool real = false;
  double lo = 0, hi = 0;
  bool lo_attained = false, hi_attained = false;
  // certified sup of |entry|; tight means it equals the true sup
  double sup = 0;
  bool sup_tight = false;

  bool nonnegative(double tol) const { return real && lo >= -tol; }
};

/// Recognize a lazy tree as a diagonal operator: identities, zeros, scalars,
/// diagonals, sums/products/direct sums/tensors of diagonal pieces, and
/// compose chains where adjacent (X^*, X) pairs of certified isometries
/// collapse, shift grams S^*S / SS^* become weight diagonals, inclusion
/// pairs become range indicators, and (X^*, D, X) conjugations shift a
/// diagonal along the index map.
std::optional<DiagonalView> diagonal_view(const Operator& op);

/// Materialize a diagonal view as a generator-backed Diagonal operator.
Operator diagonal_from_view(const DiagonalView& view);

/// Structural positive square root: diagonal view with nonnegative entries
/// -> pointwise sqrt; DenseMatrix -> Jacobi sqrt.  nullopt when unsupported.
std::optional<Operator> structural_sqrt(const Operator& op, double psd_tol);

// ---------------------------------------------------------------------------

struct NormBounds {
  double lower = 0.0;
  double upper = 0.0;
  bool tight = false;  // upper - lower below identity_tol by construction
};

/// Certified bounds: lower from probes (and exact nodes), upper from
/// structural rules; (sup, sup) when a tight diagonal view exists.
NormBounds norm_bounds(const Operator& op, const ToleranceProfile& tol);

/// Max |modulus entry| lower bound over the window: for injectivity and
/// left-invertibility evidence, the min of diagonal-view entries.
std::optional<double> modulus_lower_bound(const Operator& modulus,
                                          const ToleranceProfile& tol);

struct PolarPair {
  Operator partial_isometry;
  Operator modulus;
};

/// Polar decomposition for supported structural forms (scalar multiples of
/// (partial) isometries, weighted shifts, dense blocks, direct sums and
/// tensors of supported forms, isometry-times-positive-diagonal composes).
/// Throws UnsupportedFormError otherwise.
PolarPair polar_and_modulus(const Operator& e, const ToleranceProfile& tol);

}  // namespace bto

#endif  // BTO_ANALYSIS_HPP
