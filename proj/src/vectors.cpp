#include "bto/vectors.hpp"

#include <algorithm>
#include <cmath>

namespace bto {

SupportedVector SupportedVector::from_terms(IndexSet space,
                                            std::vector<std::pair<Index, cx>> terms,
                                            double drop_tol) {
  SupportedVector v(std::move(space));
  std::sort(terms.begin(), terms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  v.entries_.reserve(terms.size());
  for (auto& t : terms) {
    if (!v.entries_.empty() && v.entries_.back().first == t.first) {
      v.entries_.back().second += t.second;
    } else {
      v.entries_.push_back(std::move(t));
    }
  }
  std::size_t w = 0;
  for (std::size_t r = 0; r < v.entries_.size(); ++r) {
    if (std::abs(v.entries_[r].second) > drop_tol) {
      if (w != r) v.entries_[w] = std::move(v.entries_[r]);
      ++w;
    }
  }
  v.entries_.resize(w);
  return v;
}

SupportedVector SupportedVector::basis(const IndexSet& space, const Index& ix) {
  if (!space.contains(ix))
    throw StructuralError("basis index " + space.path_string(ix) + " not in " + space.str());
  SupportedVector v(space);
  v.entries_.emplace_back(ix, cx(1.0, 0.0));
  return v;
}

cx SupportedVector::at(const Index& ix) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), ix,
                             [](const auto& e, const Index& k) { return e.first < k; });
  if (it != entries_.end() && it->first == ix) return it->second;
  return cx(0.0, 0.0);
}

double SupportedVector::norm_sq() const {
  double s = 0.0;
  for (const auto& e : entries_) s += std::norm(e.second);
  return s;
}

double SupportedVector::norm() const { return std::sqrt(norm_sq()); }

// <u, v> linear in u (this), conjugate-linear in v (other).
cx SupportedVector::inner(const SupportedVector& other) const {
  cx s(0.0, 0.0);
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  while (a != entries_.end() && b != other.entries_.end()) {
    if (a->first < b->first) {
      ++a;
    } else if (b->first < a->first) {
      ++b;
    } else {
      s += a->second * std::conj(b->second);
      ++a;
      ++b;
    }
  }
  return s;
}

SupportedVector SupportedVector::scaled(cx c, double drop_tol) const {
  SupportedVector v(space_);
  if (std::abs(c) == 0.0) return v;
  v.entries_.reserve(entries_.size());
  for (const auto& e : entries_) {
    cx z = e.second * c;
    if (std::abs(z) > drop_tol) v.entries_.emplace_back(e.first, z);
  }
  return v;
}

SupportedVector SupportedVector::plus(const SupportedVector& other, double drop_tol) const {
  SupportedVector v(space_);
  v.entries_.reserve(entries_.size() + other.entries_.size());
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  auto push = [&](const Index& ix, cx z) {
    if (std::abs(z) > drop_tol) v.entries_.emplace_back(ix, z);
  };
  while (a != entries_.end() || b != other.entries_.end()) {
    if (b == other.entries_.end() || (a != entries_.end() && a->first < b->first)) {
      push(a->first, a->second);
      ++a;
    } else if (a == entries_.end() || b->first < a->first) {
      push(b->first, b->second);
      ++b;
    } else {
      push(a->first, a->second + b->second);
      ++a;
      ++b;
    }
  }
  return v;
}

SupportedVector SupportedVector::minus(const SupportedVector& other, double drop_tol) const {
  return plus(other.scaled(cx(-1.0, 0.0), 0.0), drop_tol);
}

}  // namespace bto
