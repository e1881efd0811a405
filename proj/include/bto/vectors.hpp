#ifndef BTO_VECTORS_HPP
#define BTO_VECTORS_HPP

#include <complex>
#include <utility>
#include <vector>

#include "bto/indexing.hpp"

namespace bto {

using cx = std::complex<double>;

/// Finitely supported vector in an l2 space over an IndexSet.
/// Entries are kept sorted by index and nonzero above the drop tolerance;
/// inner products and norms are exact sums over the support.
class SupportedVector {
 public:
  SupportedVector() = default;
  explicit SupportedVector(IndexSet space) : space_(std::move(space)) {}

  /// Canonicalize a term list: sort, combine duplicates, drop tiny entries.
  static SupportedVector from_terms(IndexSet space,
                                    std::vector<std::pair<Index, cx>> terms,
                                    double drop_tol = 1e-14);
  static SupportedVector basis(const IndexSet& space, const Index& ix);

  const IndexSet& space() const { return space_; }
  const std::vector<std::pair<Index, cx>>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t support_size() const { return entries_.size(); }

  cx at(const Index& ix) const;

  double norm_sq() const;
  double norm() const;
  cx inner(const SupportedVector& other) const;  // <this, other>, conjugate-linear in other? see impl

  SupportedVector scaled(cx c, double drop_tol = 1e-14) const;
  SupportedVector plus(const SupportedVector& other, double drop_tol = 1e-14) const;
  SupportedVector minus(const SupportedVector& other, double drop_tol = 1e-14) const;

 private:
  IndexSet space_;
  std::vector<std::pair<Index, cx>> entries_;
};

}  // namespace bto

#endif  // BTO_VECTORS_HPP
