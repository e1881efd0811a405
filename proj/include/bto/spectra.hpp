#ifndef BTO_SPECTRA_HPP
#define BTO_SPECTRA_HPP

#include "bto/classify.hpp"
#include "bto/extension.hpp"

namespace bto {

class WitnessRefusal : public UnsupportedFormError {
 public:
  explicit WitnessRefusal(const std::string& what) : UnsupportedFormError(what) {}
};

/// Union of origin-centered closed disks, circles, annuli, and finite point
/// sets, kept in canonical form: merged disjoint radius intervals sorted by
/// inner radius, with isolated points outside every interval.
class SpectrumRegion {
 public:
  struct Interval {
    double lo = 0, hi = 0;  // closed [lo, hi] in |z|
  };
  struct Piece {
    enum class Kind { ClosedDisk, Circle, ClosedAnnulus, FinitePoints };
    Kind kind = Kind::FinitePoints;
    double r_in = 0, r_out = 0;
    std::vector<cx> points;
  };
  struct Gap {  // connected component of the complement (radial)
    double lo = 0, hi = 0;
    bool unbounded = false;  // (lo, infinity)
    bool center_disk = false;  // {|z| < hi}
  };

  static SpectrumRegion empty();
  static SpectrumRegion disk(double r);
  static SpectrumRegion circle(double r);
  static SpectrumRegion annulus(double r_in, double r_out);
  static SpectrumRegion finite_points(std::vector<cx> pts);

  SpectrumRegion union_with(const SpectrumRegion& other) const;
  SpectrumRegion scaled(cx factor) const;
  SpectrumRegion conjugated() const;

  bool contains(cx z, double tol = 1e-12) const;
  bool subset_of(const SpectrumRegion& other, double tol = 1e-12) const;
  bool equals(const SpectrumRegion& other, double tol = 1e-12) const;
  bool is_empty() const { return intervals_.empty() && points_.empty(); }

  const std::vector<Interval>& intervals() const { return intervals_; }
  const std::vector<cx>& isolated_points() const { return points_; }
  std::vector<Piece> pieces() const;
  std::vector<Gap> complement_components() const;
  std::string str() const;

  /// Boundary sample points of each piece (deterministic phases).
  std::vector<std::pair<cx, std::size_t>> boundary_samples(std::size_t per_piece) const;

 private:
  std::vector<Interval> intervals_;  // canonical: disjoint, sorted
  std::vector<cx> points_;
  void canonicalize(double tol = 1e-12);
};

/// Spectrum of a catalog operator: shifts (disks / circles), normal
/// diagonals (finite point closures), atom-radius bilateral sums, scalar
/// multiples, adjoints, direct sums, non-surjective index-injection
/// isometries.  Throws UnsupportedFormError outside the catalog.
SpectrumRegion symbolic_spectrum(const Operator& op);

/// Isometry evidence route for first-column blocks that are not catalog
/// nodes: probe isometry plus a nonzero defect window count gives the
/// closed unit disk.
std::optional<SpectrumRegion> isometry_spectrum_evidence(const Operator& v,
                                                         const ToleranceProfile& tol);

struct BlockSpectrumResult {
  SpectrumRegion region;
  SpectrumRegion sigma_v, sigma_x;
  bool equality = false;  // X hyponormal: union is exact, not just an inclusion
  std::string v_route;    // "catalog" or "isometry-evidence"
};
BlockSpectrumResult block_spectrum(const BlockTriangular& t, const ToleranceProfile& tol);

struct SpectralWitness {
  cx lambda;
  SupportedVector vector;
  double residual = 0.0;
  bool adjoint_side = false;
  std::size_t support = 0;
};

/// Finitely supported approximate eigenvector with residual <= epsilon:
/// geometric vectors for shift adjoints, tent-windowed plane waves on
/// circles, exact eigenvectors for diagonals.  Throws WitnessRefusal when
/// lambda lies outside the operator's claimed region.
SpectralWitness eigen_witness(const Operator& op, cx lambda, double epsilon);

struct ExtensionSpectraReport {
  bool skipped = false;
  std::string skip_reason;
  SpectrumRegion sigma_t, sigma_r, sigma_s, sigma_n;
  bool spectral_inclusion_n_in_s = false;  // sigma(N) in sigma(S)
  bool extension_inside = false;           // sigma(R) in sigma(T)
  std::vector<SpectralWitness> witnesses;
  bool witnesses_ok = false;
  bool pass = false;
};
ExtensionSpectraReport extension_spectra_check(const BlockTriangular& t,
                                               const ExtensionBundle& r,
                                               const ToleranceProfile& tol,
                                               std::size_t samples_per_piece = 3,
                                               double witness_eps = 1e-6);

struct FillingHolesReport {
  struct Component {
    SpectrumRegion::Gap gap;
    bool meets_t = false;
    bool contained = false;
  };
  std::vector<Component> components;
  bool pass = false;
};
FillingHolesReport filling_holes_check(const SpectrumRegion& sigma_t,
                                       const SpectrumRegion& sigma_r);

}  // namespace bto

#endif  // BTO_SPECTRA_HPP
