#include "bto/operators.hpp"

#include <algorithm>
#include <map>

namespace bto {

std::string op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::Identity: return "Identity";
    case OpKind::ZeroOp: return "ZeroOp";
    case OpKind::ScalarMul: return "ScalarMul";
    case OpKind::UnilateralShift: return "UnilateralShift";
    case OpKind::BilateralShift: return "BilateralShift";
    case OpKind::Diagonal: return "Diagonal";
    case OpKind::DenseMatrix: return "DenseMatrix";
    case OpKind::Adjoint: return "Adjoint";
    case OpKind::Compose: return "Compose";
    case OpKind::Add: return "Add";
    case OpKind::DirectSum: return "DirectSum";
    case OpKind::Tensor: return "Tensor";
    case OpKind::Inclusion: return "Inclusion";
    case OpKind::Embedding: return "Embedding";
  }
  return "?";
}

struct Operator::Node {
  OpKind kind;
  IndexSet domain, codomain;
  cx scalar{0, 0};
  std::vector<Operator> children;
  std::shared_ptr<const WeightSequence> weights;
  double bweight = 0.0;
  DiagonalSpec diag;
  CMatrix dense;
  std::shared_ptr<const InjectionSpec> injection;
  std::shared_ptr<const EmbeddingSpec> embed;
  bool isometry = false;
};

OpKind Operator::kind() const {
  if (!node_) throw StructuralError("empty operator");
  return node_->kind;
}
const IndexSet& Operator::domain() const { return node_->domain; }
const IndexSet& Operator::codomain() const { return node_->codomain; }
cx Operator::scalar() const { return node_->scalar; }
const Operator& Operator::child(std::size_t i) const { return node_->children.at(i); }
const WeightSequence& Operator::shift_weights() const { return *node_->weights; }
double Operator::bilateral_weight() const { return node_->bweight; }
const DiagonalSpec& Operator::diagonal() const { return node_->diag; }
const CMatrix& Operator::dense() const { return node_->dense; }
const InjectionSpec& Operator::injection() const { return *node_->injection; }
const EmbeddingSpec& Operator::embedding() const { return *node_->embed; }
bool Operator::isometry_certified() const { return node_->isometry; }

Operator Operator::certified_isometry() const {
  auto n = std::make_shared<Node>(*node_);
  n->isometry = true;
  return Operator(n);
}

std::string Operator::describe() const {
  std::string s = op_kind_name(kind());
  switch (kind()) {
    case OpKind::ScalarMul:
    case OpKind::Adjoint:
      return s + "(" + child(0).describe() + ")";
    case OpKind::Compose:
    case OpKind::Add:
    case OpKind::DirectSum:
    case OpKind::Tensor:
      return s + "(" + child(0).describe() + ", " + child(1).describe() + ")";
    case OpKind::Inclusion:
      return s + "[" + injection().tag + "]";
    case OpKind::Embedding:
      return s + "[" + embedding().tag + "]";
    default:
      return s;
  }
}

Operator Operator::identity(const IndexSet& space) {
  auto n = std::make_shared<Node>();
  n->kind = OpKind::Identity;
  n->domain = n->codomain = space;
  n->isometry = true;
  return Operator(n);
}

Operator Operator::zero(const IndexSet& domain, const IndexSet& codomain) {
  auto n = std::make_shared<Node>();
  n->kind = OpKind::ZeroOp;
  n->domain = domain;
  n->codomain = codomain;
  return Operator(n);
}

Operator Operator::scalar_mul(cx c, const Operator& a) {
  auto n = std::make_shared<Node>();
  n->kind = OpKind::ScalarMul;
  n->scalar = c;
  n->children = {a};
  n->domain = a.domain();
  n->codomain = a.codomain();
  n->isometry = a.isometry_certified() && std::abs(std::abs(c) - 1.0) == 0.0;
  return Operator(n);
}

Operator Operator::unilateral_shift(const WeightSequence& w) {
  auto n = std::make_shared<Node>();
  n->kind = OpKind::UnilateralShift;
  n->domain = n->codomain = IndexSet::nat();
  n->weights = std::make_shared<WeightSequence>(w);
  n->isometry = w.is_constant(0.0) && w.tail() == 1.0 &&
                w.kind() == WeightSequence::Kind::ExplicitConstTail;
  return Operator(n);
}

Operator Operator::bilateral_shift(double theta) {
  if (theta <= 0.0) throw StructuralError("BilateralShift weight must be positive");
  auto n = std::make_shared<Node>();
  n->kind = OpKind::BilateralShift;
  n->domain = n->codomain = IndexSet::integers();
  n->bweight = theta;
  n->isometry = theta == 1.0;
  return Operator(n);
}

Operator Operator::diagonal(const IndexSet& space, DiagonalSpec spec) {
  if (!spec.prefix.empty()) {
    IndexSet::Kind k = space.kind();
    if (k == IndexSet::Kind::Union || k == IndexSet::Kind::Product)
      throw StructuralError("Diagonal prefix requires a scalar index set; got " + space.str());
  }
  auto n = std::make_shared<Node>();
  n->kind = OpKind::Diagonal;
  n->domain = n->codomain = space;
  n->diag = std::move(spec);
  return Operator(n);
}

Operator Operator::dense_matrix(const CMatrix& m) {
  if (m.rows == 0 || m.cols == 0) throw StructuralError("DenseMatrix must be nonempty");
  auto n = std::make_shared<Node>();
  n->kind = OpKind::DenseMatrix;
  n->domain = IndexSet::fin(m.cols);
  n->codomain = IndexSet::fin(m.rows);
  n->dense = m;
  return Operator(n);
}

Operator Operator::adjoint(const Operator& a) {
  switch (a.kind()) {
    case OpKind::Identity:
      return a;
    case OpKind::ZeroOp:
      return zero(a.codomain(), a.domain());
    case OpKind::ScalarMul:
      return scalar_mul(std::conj(a.scalar()), adjoint(a.child(0)));
    case OpKind::Diagonal: {
      DiagonalSpec d = a.diagonal();
      for (cx& z : d.prefix) z = std::conj(z);
      d.tail = std::conj(d.tail);
      if (d.gen) {
        auto g = d.gen;
        d.gen = [g](std::uint64_t r) { return std::conj(g(r)); };
      }
      return diagonal(a.domain(), std::move(d));
    }
    case OpKind::DenseMatrix:
      return dense_matrix(a.dense().adjoint());
    case OpKind::Adjoint:
      return a.child(0);
    case OpKind::Compose:
      return compose(adjoint(a.child(1)), adjoint(a.child(0)));
    case OpKind::Add:
      return add(adjoint(a.child(0)), adjoint(a.child(1)));
    case OpKind::DirectSum:
      return direct_sum(adjoint(a.child(0)), adjoint(a.child(1)));
    case OpKind::Tensor:
      return tensor(adjoint(a.child(0)), adjoint(a.child(1)));
    default: {
      // genuine adjoint wrapper: shifts, inclusions, embeddings
      auto n = std::make_shared<Node>();
      n->kind = OpKind::Adjoint;
      n->children = {a};
      n->domain = a.codomain();
      n->codomain = a.domain();
      return Operator(n);
    }
  }
}

Operator Operator::compose(const Operator& a, const Operator& b) {
  if (!(b.codomain() == a.domain()))
    throw StructuralError("Compose mismatch: inner codomain " + b.codomain().str() +
                          " vs outer domain " + a.domain().str());
  auto n = std::make_shared<Node>();
  n->kind = OpKind::Compose;
  n->children = {a, b};
  n->domain = b.domain();
  n->codomain = a.codomain();
  n->isometry = a.isometry_certified() && b.isometry_certified();
  return Operator(n);
}

Operator Operator::add(const Operator& a, const Operator& b) {
  if (!(a.domain() == b.domain()) || !(a.codomain() == b.codomain()))
    throw StructuralError("Add shape mismatch: " + a.domain().str() + "->" +
                          a.codomain().str() + " vs " + b.domain().str() + "->" +
                          b.codomain().str());
  auto n = std::make_shared<Node>();
  n->kind = OpKind::Add;
  n->children = {a, b};
  n->domain = a.domain();
  n->codomain = a.codomain();
  return Operator(n);
}

Operator Operator::direct_sum(const Operator& a, const Operator& b) {
  auto n = std::make_shared<Node>();
  n->kind = OpKind::DirectSum;
  n->children = {a, b};
  n->domain = IndexSet::disjoint_union(a.domain(), b.domain());
  n->codomain = IndexSet::disjoint_union(a.codomain(), b.codomain());
  n->isometry = a.isometry_certified() && b.isometry_certified();
  return Operator(n);
}

Operator Operator::tensor(const Operator& a, const Operator& b) {
  auto n = std::make_shared<Node>();
  n->kind = OpKind::Tensor;
  n->children = {a, b};
  n->domain = IndexSet::product(a.domain(), b.domain());
  n->codomain = IndexSet::product(a.codomain(), b.codomain());
  n->isometry = a.isometry_certified() && b.isometry_certified();
  return Operator(n);
}

Operator Operator::inclusion(const IndexSet& sub, const IndexSet& into, InjectionSpec spec) {
  if (!spec.forward || !spec.inverse)
    throw StructuralError("Inclusion needs forward and inverse index maps");
  auto n = std::make_shared<Node>();
  n->kind = OpKind::Inclusion;
  n->domain = sub;
  n->codomain = into;
  n->injection = std::make_shared<InjectionSpec>(std::move(spec));
  n->isometry = true;  // injective index maps carry orthonormal columns
  return Operator(n);
}

Operator Operator::embedding(const IndexSet& domain, const IndexSet& codomain,
                             EmbeddingSpec spec) {
  if (!spec.column || !spec.candidates)
    throw StructuralError("Embedding needs column and candidate maps");
  auto n = std::make_shared<Node>();
  n->kind = OpKind::Embedding;
  n->domain = domain;
  n->codomain = codomain;
  n->isometry = spec.orthonormal_columns;
  n->embed = std::make_shared<EmbeddingSpec>(std::move(spec));
  return Operator(n);
}

namespace {

cx diagonal_entry(const IndexSet& space, const DiagonalSpec& d, const Index& ix) {
  if (d.gen) {
    auto r = space.rank_of(ix);
    if (!r) throw StructuralError("diagonal generator: index outside space");
    return d.gen(*r);
  }
  if (!d.prefix.empty()) {
    auto r = space.rank_of(ix);
    if (r && *r < d.prefix.size()) return d.prefix[*r];
  }
  return d.tail;
}

// Split a product-space index into its two component indices.
std::pair<Index, Index> split_product(const IndexSet& prod, const Index& ix) {
  // reparse: walk the left factor to find the split point
  struct Walker {
    static std::size_t consumed(const IndexSet& s, const Index& ix, std::size_t pos) {
      switch (s.kind()) {
        case IndexSet::Kind::Nat:
        case IndexSet::Kind::Int:
        case IndexSet::Kind::Fin:
          return pos + 1;
        case IndexSet::Kind::Union:
          return consumed(ix.atoms[pos] == 0 ? s.left() : s.right(), ix, pos + 1);
        case IndexSet::Kind::Product:
          return consumed(s.right(), ix, consumed(s.left(), ix, pos));
      }
      return pos;
    }
  };
  std::size_t split = Walker::consumed(prod.left(), ix, 0);
  Index ia(std::vector<std::int64_t>(ix.atoms.begin(), ix.atoms.begin() + split));
  Index ib(std::vector<std::int64_t>(ix.atoms.begin() + split, ix.atoms.end()));
  return {ia, ib};
}

}  // namespace

SupportedVector Operator::apply(const SupportedVector& v, double drop_tol) const {
  if (!(v.space() == domain()))
    throw StructuralError("apply: vector space " + v.space().str() +
                          " does not match operator domain " + domain().str());
  using Terms = std::vector<std::pair<Index, cx>>;
  switch (kind()) {
    case OpKind::Identity:
      return v;
    case OpKind::ZeroOp:
      return SupportedVector(codomain());
    case OpKind::ScalarMul:
      return child(0).apply(v, drop_tol).scaled(scalar(), drop_tol);
    case OpKind::UnilateralShift: {
      Terms t;
      t.reserve(v.entries().size());
      for (const auto& e : v.entries()) {
        std::uint64_t pos = static_cast<std::uint64_t>(e.first.atoms[0]);
        t.emplace_back(Index::scalar(e.first.atoms[0] + 1),
                       e.second * shift_weights().weight(pos));
      }
      return SupportedVector::from_terms(codomain(), std::move(t), drop_tol);
    }
    case OpKind::BilateralShift: {
      Terms t;
      t.reserve(v.entries().size());
      for (const auto& e : v.entries())
        t.emplace_back(Index::scalar(e.first.atoms[0] + 1), e.second * bilateral_weight());
      return SupportedVector::from_terms(codomain(), std::move(t), drop_tol);
    }
    case OpKind::Diagonal: {
      Terms t;
      t.reserve(v.entries().size());
      for (const auto& e : v.entries())
        t.emplace_back(e.first, e.second * diagonal_entry(domain(), diagonal(), e.first));
      return SupportedVector::from_terms(codomain(), std::move(t), drop_tol);
    }
    case OpKind::DenseMatrix: {
      const CMatrix& m = dense();
      std::vector<cx> out(m.rows, cx(0, 0));
      for (const auto& e : v.entries()) {
        std::size_t j = static_cast<std::size_t>(e.first.atoms[0]);
        for (std::size_t i = 0; i < m.rows; ++i) out[i] += m.at(i, j) * e.second;
      }
      Terms t;
      for (std::size_t i = 0; i < m.rows; ++i)
        if (out[i] != cx(0, 0)) t.emplace_back(Index::scalar(static_cast<std::int64_t>(i)), out[i]);
      return SupportedVector::from_terms(codomain(), std::move(t), drop_tol);
    }
    case OpKind::Adjoint: {
      const Operator& inner = child(0);
      switch (inner.kind()) {
        case OpKind::UnilateralShift: {
          Terms t;
          for (const auto& e : v.entries()) {
            if (e.first.atoms[0] == 0) continue;
            std::uint64_t below = static_cast<std::uint64_t>(e.first.atoms[0] - 1);
            t.emplace_back(Index::scalar(e.first.atoms[0] - 1),
                           e.second * std::conj(cx(inner.shift_weights().weight(below), 0)));
          }
          return SupportedVector::from_terms(codomain(), std::move(t), drop_tol);
        }
        case OpKind::BilateralShift: {
          Terms t;
          for (const auto& e : v.entries())
            t.emplace_back(Index::scalar(e.first.atoms[0] - 1),
                           e.second * inner.bilateral_weight());
          return SupportedVector::from_terms(codomain(), std::move(t), drop_tol);
        }
        case OpKind::Inclusion: {
          Terms t;
          for (const auto& e : v.entries()) {
            auto pre = inner.injection().inverse(e.first);
            if (pre) t.emplace_back(*pre, e.second);
          }
          return SupportedVector::from_terms(codomain(), std::move(t), drop_tol);
        }
        case OpKind::Embedding: {
          std::vector<Index> cols;
          for (const auto& e : v.entries())
            for (Index& j : inner.embedding().candidates(e.first)) cols.push_back(std::move(j));
          std::sort(cols.begin(), cols.end());
          cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
          Terms t;
          for (const Index& j : cols) {
            cx z = v.inner(inner.embedding().column(j));
            if (z != cx(0, 0)) t.emplace_back(j, z);
          }
          return SupportedVector::from_terms(codomain(), std::move(t), drop_tol);
        }
        default:
          throw StructuralError("adjoint application not normalized for " +
                                op_kind_name(inner.kind()));
      }
    }
    case OpKind::Compose:
      return child(0).apply(child(1).apply(v, drop_tol), drop_tol);
    case OpKind::Add:
      return child(0).apply(v, drop_tol).plus(child(1).apply(v, drop_tol), drop_tol);
    case OpKind::DirectSum: {
      SupportedVector va(child(0).domain()), vb(child(1).domain());
      {
        Terms ta, tb;
        for (const auto& e : v.entries()) {
          Index rest(std::vector<std::int64_t>(e.first.atoms.begin() + 1, e.first.atoms.end()));
          (e.first.atoms[0] == 0 ? ta : tb).emplace_back(std::move(rest), e.second);
        }
        va = SupportedVector::from_terms(child(0).domain(), std::move(ta), drop_tol);
        vb = SupportedVector::from_terms(child(1).domain(), std::move(tb), drop_tol);
      }
      SupportedVector ia = child(0).apply(va, drop_tol);
      SupportedVector ib = child(1).apply(vb, drop_tol);
      Terms t;
      t.reserve(ia.entries().size() + ib.entries().size());
      for (const auto& e : ia.entries()) t.emplace_back(e.first.prefixed(0), e.second);
      for (const auto& e : ib.entries()) t.emplace_back(e.first.prefixed(1), e.second);
      return SupportedVector::from_terms(codomain(), std::move(t), drop_tol);
    }
    case OpKind::Tensor: {
      std::map<Index, SupportedVector> image_a, image_b;
      Terms t;
      for (const auto& e : v.entries()) {
        auto [ia, ib] = split_product(domain(), e.first);
        auto ita = image_a.find(ia);
        if (ita == image_a.end())
          ita = image_a.emplace(ia, child(0).apply(SupportedVector::basis(child(0).domain(), ia),
                                                   drop_tol)).first;
        auto itb = image_b.find(ib);
        if (itb == image_b.end())
          itb = image_b.emplace(ib, child(1).apply(SupportedVector::basis(child(1).domain(), ib),
                                                   drop_tol)).first;
        for (const auto& ea : ita->second.entries())
          for (const auto& eb : itb->second.entries())
            t.emplace_back(ea.first.joined(eb.first), e.second * ea.second * eb.second);
      }
      return SupportedVector::from_terms(codomain(), std::move(t), drop_tol);
    }
    case OpKind::Inclusion: {
      Terms t;
      t.reserve(v.entries().size());
      for (const auto& e : v.entries()) t.emplace_back(injection().forward(e.first), e.second);
      return SupportedVector::from_terms(codomain(), std::move(t), drop_tol);
    }
    case OpKind::Embedding: {
      SupportedVector acc(codomain());
      for (const auto& e : v.entries())
        acc = acc.plus(embedding().column(e.first).scaled(e.second, 0.0), 0.0);
      return SupportedVector::from_terms(codomain(),
                                         {acc.entries().begin(), acc.entries().end()}, drop_tol);
    }
  }
  throw StructuralError("apply: unhandled node");
}

cx Operator::matrix_element(const Index& i, const Index& j) const {
  if (!codomain().contains(i))
    throw StructuralError("matrix_element: row index not in codomain " + codomain().str());
  if (!domain().contains(j))
    throw StructuralError("matrix_element: column index not in domain " + domain().str());
  return apply(SupportedVector::basis(domain(), j), 0.0).at(i);
}

Operator operator_pow(const Operator& a, std::uint64_t n) {
  if (!(a.domain() == a.codomain()))
    throw StructuralError("operator_pow needs an endomorphism");
  if (n == 0) return Operator::identity(a.domain());
  Operator out = a;
  for (std::uint64_t k = 1; k < n; ++k) out = Operator::compose(out, a);
  return out;
}

Operator union_left_inclusion(const IndexSet& l, const IndexSet& r) {
  InjectionSpec spec;
  spec.tag = "union_left";
  spec.forward = [](const Index& ix) { return ix.prefixed(0); };
  spec.inverse = [](const Index& ix) -> std::optional<Index> {
    if (ix.atoms.empty() || ix.atoms[0] != 0) return std::nullopt;
    return Index(std::vector<std::int64_t>(ix.atoms.begin() + 1, ix.atoms.end()));
  };
  return Operator::inclusion(l, IndexSet::disjoint_union(l, r), std::move(spec));
}

Operator union_right_inclusion(const IndexSet& l, const IndexSet& r) {
  InjectionSpec spec;
  spec.tag = "union_right";
  spec.forward = [](const Index& ix) { return ix.prefixed(1); };
  spec.inverse = [](const Index& ix) -> std::optional<Index> {
    if (ix.atoms.empty() || ix.atoms[0] != 1) return std::nullopt;
    return Index(std::vector<std::int64_t>(ix.atoms.begin() + 1, ix.atoms.end()));
  };
  return Operator::inclusion(r, IndexSet::disjoint_union(l, r), std::move(spec));
}

Operator affine_nat_injection(std::uint64_t stride, std::uint64_t offset) {
  if (stride == 0) throw StructuralError("affine injection needs stride >= 1");
  InjectionSpec spec;
  spec.tag = "affine";
  spec.params = {static_cast<std::int64_t>(stride), static_cast<std::int64_t>(offset)};
  spec.surjective = stride == 1 && offset == 0;
  spec.forward = [stride, offset](const Index& ix) {
    return Index::scalar(static_cast<std::int64_t>(stride) * ix.atoms[0] +
                         static_cast<std::int64_t>(offset));
  };
  spec.inverse = [stride, offset](const Index& ix) -> std::optional<Index> {
    std::int64_t shifted = ix.atoms[0] - static_cast<std::int64_t>(offset);
    if (shifted < 0 || shifted % static_cast<std::int64_t>(stride) != 0) return std::nullopt;
    return Index::scalar(shifted / static_cast<std::int64_t>(stride));
  };
  return Operator::inclusion(IndexSet::nat(), IndexSet::nat(), std::move(spec));
}

Operator enumeration_packing(const IndexSet& from, const IndexSet& onto,
                             std::uint64_t stride, std::uint64_t offset) {
  if (stride == 0) throw StructuralError("enumeration packing needs stride >= 1");
  InjectionSpec spec;
  spec.tag = "enum_pack";
  spec.params = {static_cast<std::int64_t>(stride), static_cast<std::int64_t>(offset)};
  spec.surjective = stride == 1 && offset == 0 && from.dim() == onto.dim();
  IndexSet src = from, dst = onto;
  spec.forward = [src, dst, stride, offset](const Index& ix) {
    auto r = src.rank_of(ix);
    if (!r) throw StructuralError("enumeration packing: index outside domain");
    return dst.index_at(stride * *r + offset);
  };
  spec.inverse = [src, dst, stride, offset](const Index& ix) -> std::optional<Index> {
    auto r = dst.rank_of(ix);
    if (!r) return std::nullopt;
    if (*r < offset) return std::nullopt;
    std::uint64_t shifted = *r - offset;
    if (shifted % stride != 0) return std::nullopt;
    std::uint64_t q = shifted / stride;
    Dim d = src.dim();
    if (d.is_finite() && q >= d.n) return std::nullopt;
    return src.index_at(q);
  };
  return Operator::inclusion(from, onto, std::move(spec));
}

}  // namespace bto
