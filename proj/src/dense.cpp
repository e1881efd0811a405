#include "bto/dense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bto {

CMatrix CMatrix::identity(std::size_t n) {
  CMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = cx(1, 0);
  return m;
}

CMatrix CMatrix::adjoint() const {
  CMatrix m(cols, rows);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m.at(j, i) = std::conj(at(i, j));
  return m;
}

CMatrix CMatrix::times(const CMatrix& other, Exec exec) const {
  if (cols != other.rows) throw std::invalid_argument("CMatrix::times shape mismatch");
  CMatrix m(rows, other.cols);
  parallel_for(exec, rows, [&](std::size_t i) {
    for (std::size_t k = 0; k < cols; ++k) {
      cx aik = at(i, k);
      if (aik == cx(0, 0)) continue;
      for (std::size_t j = 0; j < other.cols; ++j) m.at(i, j) += aik * other.at(k, j);
    }
  });
  return m;
}

std::vector<cx> CMatrix::apply(const std::vector<cx>& v) const {
  if (v.size() != cols) throw std::invalid_argument("CMatrix::apply shape mismatch");
  std::vector<cx> out(rows, cx(0, 0));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i] += at(i, j) * v[j];
  return out;
}

double CMatrix::frobenius() const {
  double s = 0.0;
  for (const cx& z : a) s += std::norm(z);
  return std::sqrt(s);
}

double CMatrix::max_abs() const {
  double s = 0.0;
  for (const cx& z : a) s = std::max(s, std::abs(z));
  return s;
}

namespace {

double off_diagonal_mass(const CMatrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j)
      if (i != j) s += std::norm(m.at(i, j));
  return std::sqrt(s);
}

}  // namespace

HermitianEigen hermitian_eigen(const CMatrix& input, double off_tol, int max_sweeps) {
  if (input.rows != input.cols) throw std::invalid_argument("hermitian_eigen: not square");
  const std::size_t n = input.rows;
  CMatrix m = input;
  CMatrix v = CMatrix::identity(n);

  const double scale = std::max(1.0, m.frobenius());
  const double threshold = off_tol * scale;

  int sweep = 0;
  double off = off_diagonal_mass(m);
  while (off > threshold) {
    if (++sweep > max_sweeps)
      throw std::runtime_error("hermitian_eigen: no convergence, off-diagonal residual " +
                               std::to_string(off));
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        cx beta = m.at(p, q);
        double ab = std::abs(beta);
        if (ab <= threshold / (static_cast<double>(n) + 1.0)) continue;
        // Phase out the pivot, then a real Jacobi rotation on the 2x2 block
        //   [alpha  |beta|]
        //   [|beta| gamma]
        cx phase = beta / ab;  // e^{i phi}
        double alpha = m.at(p, p).real();
        double gamma = m.at(q, q).real();
        double tau = (gamma - alpha) / (2.0 * ab);
        double t = (tau >= 0.0 ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                               : 1.0 / (tau - std::sqrt(1.0 + tau * tau)));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        // U acts on coordinates (p, q):
        //   U(p,p) = c          U(p,q) = s
        //   U(q,p) = -s e^{-i phi}   U(q,q) = c e^{-i phi}
        cx upq = cx(s, 0);
        cx uqp = -s * std::conj(phase);
        cx uqq = c * std::conj(phase);
        for (std::size_t k = 0; k < n; ++k) {  // rows: m <- U^* m
          cx mp = m.at(p, k), mq = m.at(q, k);
          m.at(p, k) = c * mp + std::conj(uqp) * mq;
          m.at(q, k) = std::conj(upq) * mp + std::conj(uqq) * mq;
        }
        for (std::size_t k = 0; k < n; ++k) {  // cols: m <- m U, v <- v U
          cx mp = m.at(k, p), mq = m.at(k, q);
          m.at(k, p) = mp * c + mq * uqp;
          m.at(k, q) = mp * upq + mq * uqq;
          cx vp = v.at(k, p), vq = v.at(k, q);
          v.at(k, p) = vp * c + vq * uqp;
          v.at(k, q) = vp * upq + vq * uqq;
        }
        m.at(p, q) = cx(0, 0);
        m.at(q, p) = cx(0, 0);
      }
    }
    off = off_diagonal_mass(m);
  }

  HermitianEigen out;
  out.off_diagonal_residual = off;
  out.sweeps = sweep;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return m.at(i, i).real() < m.at(j, j).real();
  });
  out.eigenvalues.resize(n);
  out.vectors = CMatrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = m.at(order[k], order[k]).real();
    for (std::size_t i = 0; i < n; ++i) out.vectors.at(i, k) = v.at(i, order[k]);
  }
  return out;
}

Svd svd(const CMatrix& m, double off_tol) {
  CMatrix gram = m.adjoint().times(m);
  HermitianEigen eig = hermitian_eigen(gram, off_tol);
  const std::size_t k = gram.rows;
  Svd out;
  out.singular_values.resize(k);
  out.v = CMatrix(m.cols, k);
  out.u = CMatrix(m.rows, k);
  // descending order of singular values
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t src = k - 1 - c;
    double lam = std::max(0.0, eig.eigenvalues[src]);
    double sv = std::sqrt(lam);
    out.singular_values[c] = sv;
    std::vector<cx> vc(m.cols);
    for (std::size_t i = 0; i < m.cols; ++i) {
      out.v.at(i, c) = eig.vectors.at(i, src);
      vc[i] = eig.vectors.at(i, src);
    }
    if (sv > 1e-150) {
      std::vector<cx> uc = m.apply(vc);
      for (std::size_t i = 0; i < m.rows; ++i) out.u.at(i, c) = uc[i] / sv;
    }
  }
  return out;
}

bool psd_check(const CMatrix& hermitian, double psd_tol, double* min_eig) {
  HermitianEigen eig = hermitian_eigen(hermitian);
  double lo = hermitian.rows == 0 ? 0.0 : eig.eigenvalues.front();
  if (min_eig) *min_eig = lo;
  return lo >= -psd_tol;
}

std::size_t numeric_rank(const CMatrix& m, double tol) {
  if (m.rows == 0 || m.cols == 0) return 0;
  Svd s = svd(m);
  std::size_t r = 0;
  for (double sv : s.singular_values)
    if (sv > tol) ++r;
  return r;
}

double spectral_norm(const CMatrix& m) {
  if (m.rows == 0 || m.cols == 0) return 0.0;
  Svd s = svd(m);
  return s.singular_values.empty() ? 0.0 : s.singular_values.front();
}

CMatrix hermitian_sqrt(const CMatrix& m, double psd_tol) {
  HermitianEigen eig = hermitian_eigen(m);
  const std::size_t n = m.rows;
  if (!eig.eigenvalues.empty() && eig.eigenvalues.front() < -psd_tol)
    throw std::runtime_error("hermitian_sqrt: matrix not psd, min eigenvalue " +
                             std::to_string(eig.eigenvalues.front()));
  CMatrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    double s = std::sqrt(std::max(0.0, eig.eigenvalues[k]));
    if (s == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        out.at(i, j) += s * eig.vectors.at(i, k) * std::conj(eig.vectors.at(j, k));
  }
  return out;
}

DensePolar dense_polar(const CMatrix& m, double rank_tol) {
  Svd s = svd(m);
  DensePolar out;
  out.partial_isometry = CMatrix(m.rows, m.cols);
  out.modulus = CMatrix(m.cols, m.cols);
  for (std::size_t k = 0; k < s.singular_values.size(); ++k) {
    double sv = s.singular_values[k];
    if (sv <= rank_tol) continue;
    for (std::size_t i = 0; i < m.cols; ++i)
      for (std::size_t j = 0; j < m.cols; ++j)
        out.modulus.at(i, j) += sv * s.v.at(i, k) * std::conj(s.v.at(j, k));
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < m.cols; ++j)
        out.partial_isometry.at(i, j) += s.u.at(i, k) * std::conj(s.v.at(j, k));
  }
  return out;
}

}  // namespace bto
