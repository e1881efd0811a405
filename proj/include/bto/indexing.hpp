#ifndef BTO_INDEXING_HPP
#define BTO_INDEXING_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bto {

// Thrown when index sets or operator shapes do not match.
class StructuralError : public std::runtime_error {
 public:
  explicit StructuralError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when an operation is asked for a structural form it does not support.
class UnsupportedFormError : public std::runtime_error {
 public:
  explicit UnsupportedFormError(const std::string& what) : std::runtime_error(what) {}
};

/// Dimension of an index set: a finite count or the countable marker.
struct Dim {
  bool countable = false;
  std::uint64_t n = 0;

  static Dim finite(std::uint64_t k) { return Dim{false, k}; }
  static Dim aleph0() { return Dim{true, 0}; }

  bool is_finite() const { return !countable; }
  bool operator==(const Dim& o) const {
    return countable == o.countable && (countable || n == o.n);
  }
  bool operator!=(const Dim& o) const { return !(*this == o); }
  Dim operator+(const Dim& o) const {
    if (countable || o.countable) return aleph0();
    return finite(n + o.n);
  }
  std::string str() const { return countable ? "countable" : std::to_string(n); }
};

// An index into an index set, stored as a flat atom path.  DisjointUnion
// consumes one side atom (0 = left, 1 = right), Product consumes both
// component paths in order, scalar sets consume a single value atom.
struct Index {
  std::vector<std::int64_t> atoms;

  Index() = default;
  explicit Index(std::vector<std::int64_t> a) : atoms(std::move(a)) {}
  static Index scalar(std::int64_t v) { return Index({v}); }

  bool operator==(const Index& o) const { return atoms == o.atoms; }
  bool operator!=(const Index& o) const { return atoms != o.atoms; }
  bool operator<(const Index& o) const { return atoms < o.atoms; }

  Index prefixed(std::int64_t side) const {
    Index r;
    r.atoms.reserve(atoms.size() + 1);
    r.atoms.push_back(side);
    r.atoms.insert(r.atoms.end(), atoms.begin(), atoms.end());
    return r;
  }
  Index joined(const Index& tail) const {
    Index r = *this;
    r.atoms.insert(r.atoms.end(), tail.atoms.begin(), tail.atoms.end());
    return r;
  }
};

/// Structural index set: Nat, Int, Fin(n), DisjointUnion, Product.
class IndexSet {
 public:
  enum class Kind { Nat, Int, Fin, Union, Product };

  IndexSet() = default;

  static IndexSet nat();
  static IndexSet integers();
  static IndexSet fin(std::uint64_t n);
  static IndexSet disjoint_union(const IndexSet& l, const IndexSet& r);
  static IndexSet product(const IndexSet& a, const IndexSet& b);

  bool valid() const { return node_ != nullptr; }
  Kind kind() const;
  std::uint64_t fin_size() const;    // Fin only
  const IndexSet& left() const;      // Union / Product
  const IndexSet& right() const;     // Union / Product

  bool operator==(const IndexSet& o) const;
  bool operator!=(const IndexSet& o) const { return !(*this == o); }

  Dim dim() const;

  /// Structural description, e.g. "(Nat (+) Fin(3))".
  std::string str() const;

  bool contains(const Index& ix) const;

  /// Canonical human-readable path for an index, e.g. "L:(2,-1)".
  std::string path_string(const Index& ix) const;

  /// Canonical rank tuple used to sort probe windows (lexicographic order;
  /// scalar ranks are Nat: n, Int: zigzag, Fin: value).
  std::vector<std::uint64_t> rank_tuple(const Index& ix) const;

  /// Probe window of radius r: scalar sets contribute their first r+1
  /// indices in rank order, unions the tagged union of component windows,
  /// products all pairs of component windows.  Sorted by rank tuple.
  std::vector<Index> window(std::uint64_t radius) const;

  /// Canonical enumeration bijection {0,1,...} (or {0..dim-1}) -> indices.
  /// Unions put a finite side first, else interleave; products use row-major
  /// over a finite factor, else Cantor pairing.  Used wherever a construction
  /// needs a deterministic ordered basis of a whole space.
  Index index_at(std::uint64_t r) const;
  std::optional<std::uint64_t> rank_of(const Index& ix) const;

 private:
  struct Node;
  explicit IndexSet(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;

  // Helpers consuming a sub-path; pos advances through ix.atoms.
  bool contains_at(const Index& ix, std::size_t& pos) const;
  void path_at(const Index& ix, std::size_t& pos, std::string& out) const;
  void rank_at(const Index& ix, std::size_t& pos, std::vector<std::uint64_t>& out) const;
};

/// Zigzag rank of an integer: 0,-1,1,-2,2,... -> 0,1,2,3,4,...
std::uint64_t zigzag_rank(std::int64_t v);
/// Inverse of zigzag_rank.
std::int64_t zigzag_value(std::uint64_t r);

}  // namespace bto

#endif  // BTO_INDEXING_HPP
