#ifndef BTO_OPERATORS_HPP
#define BTO_OPERATORS_HPP

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bto/dense.hpp"
#include "bto/indexing.hpp"
#include "bto/vectors.hpp"
#include "bto/weights.hpp"

namespace bto {

enum class OpKind {
  Identity,
  ZeroOp,
  ScalarMul,
  UnilateralShift,
  BilateralShift,
  Diagonal,
  DenseMatrix,
  Adjoint,
  Compose,
  Add,
  DirectSum,
  Tensor,
  Inclusion,
  Embedding,
};

std::string op_kind_name(OpKind k);

/// Diagonal data: explicit prefix over the canonical enumeration of a scalar
/// index set, then a constant tail.  A pure tail works on any index set.
/// Alternatively a generator gives the entry at each enumeration rank
/// together with certified statistics (used by materialized diagonal views).
struct DiagonalSpec {
  std::vector<cx> prefix;
  cx tail{0.0, 0.0};

  std::function<cx(std::uint64_t)> gen;  // when set, prefix/tail are ignored
  std::string gen_tag;
  double gen_sup = 0.0;
  bool gen_sup_tight = false;
  bool gen_real = false;
  double gen_lo = 0.0, gen_hi = 0.0;
  bool gen_lo_attained = false, gen_hi_attained = false;
};

/// Injective index map realizing an isometric inclusion between index sets.
struct InjectionSpec {
  std::string tag;  // "union_left" | "union_right" | "affine" | "enum_pack" | custom
  std::vector<std::int64_t> params;
  std::function<Index(const Index&)> forward;
  std::function<std::optional<Index>(const Index&)> inverse;
  bool surjective = false;
};

/// Operator given by explicit (possibly generated) columns of finite support.
/// `candidates` must over-approximate, for a codomain index, the set of
/// domain indices whose columns can touch it; it makes the adjoint exact.
struct EmbeddingSpec {
  std::string tag;
  std::function<SupportedVector(const Index&)> column;
  std::function<std::vector<Index>(const Index&)> candidates;
  bool orthonormal_columns = false;
};

class Operator {
 public:
  struct Node;

  Operator() = default;

  OpKind kind() const;
  const IndexSet& domain() const;
  const IndexSet& codomain() const;
  bool valid() const { return node_ != nullptr; }

  // payload accessors (valid for the matching kind only)
  cx scalar() const;
  const Operator& child(std::size_t i = 0) const;
  const WeightSequence& shift_weights() const;
  double bilateral_weight() const;
  const DiagonalSpec& diagonal() const;
  const CMatrix& dense() const;
  const InjectionSpec& injection() const;
  const EmbeddingSpec& embedding() const;

  /// Structural evidence that this operator is an isometry (set by factories
  /// and by builders after verification); used by simplification rules.
  bool isometry_certified() const;
  Operator certified_isometry() const;  // copy with the certificate set

  /// Exact action on a finitely supported vector.
  SupportedVector apply(const SupportedVector& v, double drop_tol = 1e-14) const;

  /// <op e_j, e_i> computed through apply.
  cx matrix_element(const Index& i, const Index& j) const;

  bool same_node(const Operator& other) const { return node_ == other.node_; }
  std::string describe() const;

  // factories
  static Operator identity(const IndexSet& space);
  static Operator zero(const IndexSet& domain, const IndexSet& codomain);
  static Operator scalar_mul(cx c, const Operator& a);
  static Operator unilateral_shift(const WeightSequence& w);
  static Operator bilateral_shift(double theta);
  static Operator diagonal(const IndexSet& space, DiagonalSpec spec);
  static Operator dense_matrix(const CMatrix& m);
  static Operator adjoint(const Operator& a);
  static Operator compose(const Operator& a, const Operator& b);  // a after b
  static Operator add(const Operator& a, const Operator& b);
  static Operator direct_sum(const Operator& a, const Operator& b);
  static Operator tensor(const Operator& a, const Operator& b);
  static Operator inclusion(const IndexSet& sub, const IndexSet& into, InjectionSpec spec);
  static Operator embedding(const IndexSet& domain, const IndexSet& codomain,
                            EmbeddingSpec spec);

 private:
  explicit Operator(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

/// n-fold composition; n = 0 gives the identity on the domain.
Operator operator_pow(const Operator& a, std::uint64_t n);

/// Left/right component inclusions of a disjoint union, and their adjoints
/// (the orthogonal projections onto the components).
Operator union_left_inclusion(const IndexSet& l, const IndexSet& r);
Operator union_right_inclusion(const IndexSet& l, const IndexSet& r);

/// Index injection n -> stride*n + offset on Nat.
Operator affine_nat_injection(std::uint64_t stride, std::uint64_t offset);

/// Isometry packing a whole space onto a target's enumeration through an
/// injection rank |-> target.index_at(stride*rank + offset).
Operator enumeration_packing(const IndexSet& from, const IndexSet& onto,
                             std::uint64_t stride = 1, std::uint64_t offset = 0);

}  // namespace bto

#endif  // BTO_OPERATORS_HPP
