#ifndef BTO_DENSE_HPP
#define BTO_DENSE_HPP

#include <complex>
#include <vector>

#include "bto/parallel.hpp"

namespace bto {

using cx = std::complex<double>;

/// Small dense complex matrix, row-major.  Desk scale (n <= 128).
struct CMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<cx> a;

  CMatrix() = default;
  CMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, cx(0, 0)) {}
  static CMatrix identity(std::size_t n);

  cx& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  const cx& at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  CMatrix adjoint() const;
  CMatrix times(const CMatrix& other, Exec exec = Exec::Serial) const;
  std::vector<cx> apply(const std::vector<cx>& v) const;
  double frobenius() const;
  double max_abs() const;
};

struct HermitianEigen {
  std::vector<double> eigenvalues;  // ascending
  CMatrix vectors;                  // columns are eigenvectors
  double off_diagonal_residual = 0.0;
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a complex Hermitian matrix.
/// Iterates sweeps of 2x2 unitary rotations until the off-diagonal mass
/// falls below the threshold.  Throws on non-convergence.
HermitianEigen hermitian_eigen(const CMatrix& m, double off_tol = 1e-13,
                               int max_sweeps = 64);

struct Svd {
  std::vector<double> singular_values;  // descending
  CMatrix u;                            // rows x k
  CMatrix v;                            // cols x k, A = U diag(s) V^*
};

/// SVD via the Hermitian eigendecomposition of A^* A.
Svd svd(const CMatrix& m, double off_tol = 1e-13);

bool psd_check(const CMatrix& hermitian, double psd_tol, double* min_eig = nullptr);
std::size_t numeric_rank(const CMatrix& m, double tol);
double spectral_norm(const CMatrix& m);

/// Positive square root of a Hermitian psd matrix (small negative
/// eigenvalues within tol are clamped to zero).
CMatrix hermitian_sqrt(const CMatrix& m, double psd_tol = 1e-9);

/// Polar decomposition A = P H with H = sqrt(A^* A) psd and P a partial
/// isometry with initial space the closure of the range of H.
struct DensePolar {
  CMatrix partial_isometry;
  CMatrix modulus;
};
DensePolar dense_polar(const CMatrix& m, double rank_tol = 1e-12);

}  // namespace bto

#endif  // BTO_DENSE_HPP
