#include "bto/indexing.hpp"

#include <algorithm>

namespace bto {

std::uint64_t zigzag_rank(std::int64_t v) {
  return v >= 0 ? 2 * static_cast<std::uint64_t>(v)
                : 2 * static_cast<std::uint64_t>(-v) - 1;
}

std::int64_t zigzag_value(std::uint64_t r) {
  return r % 2 == 0 ? static_cast<std::int64_t>(r / 2)
                    : -static_cast<std::int64_t>((r + 1) / 2);
}

struct IndexSet::Node {
  Kind kind;
  std::uint64_t size = 0;  // Fin
  IndexSet a, b;           // Union / Product
};

IndexSet IndexSet::nat() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Nat;
  return IndexSet(n);
}

IndexSet IndexSet::integers() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Int;
  return IndexSet(n);
}

IndexSet IndexSet::fin(std::uint64_t size) {
  if (size < 1) throw StructuralError("Fin(n) requires n >= 1");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Fin;
  n->size = size;
  return IndexSet(n);
}

IndexSet IndexSet::disjoint_union(const IndexSet& l, const IndexSet& r) {
  if (!l.valid() || !r.valid()) throw StructuralError("disjoint_union of empty index set");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Union;
  n->a = l;
  n->b = r;
  return IndexSet(n);
}

IndexSet IndexSet::product(const IndexSet& a, const IndexSet& b) {
  if (!a.valid() || !b.valid()) throw StructuralError("product of empty index set");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Product;
  n->a = a;
  n->b = b;
  return IndexSet(n);
}

IndexSet::Kind IndexSet::kind() const {
  if (!node_) throw StructuralError("empty index set");
  return node_->kind;
}

std::uint64_t IndexSet::fin_size() const { return node_->size; }
const IndexSet& IndexSet::left() const { return node_->a; }
const IndexSet& IndexSet::right() const { return node_->b; }

bool IndexSet::operator==(const IndexSet& o) const {
  if (node_ == o.node_) return true;
  if (!node_ || !o.node_) return false;
  if (node_->kind != o.node_->kind) return false;
  switch (node_->kind) {
    case Kind::Nat:
    case Kind::Int:
      return true;
    case Kind::Fin:
      return node_->size == o.node_->size;
    case Kind::Union:
    case Kind::Product:
      return node_->a == o.node_->a && node_->b == o.node_->b;
  }
  return false;
}

Dim IndexSet::dim() const {
  switch (kind()) {
    case Kind::Nat:
    case Kind::Int:
      return Dim::aleph0();
    case Kind::Fin:
      return Dim::finite(node_->size);
    case Kind::Union:
      return node_->a.dim() + node_->b.dim();
    case Kind::Product: {
      Dim da = node_->a.dim(), db = node_->b.dim();
      if (da.is_finite() && db.is_finite()) return Dim::finite(da.n * db.n);
      return Dim::aleph0();
    }
  }
  return Dim::finite(0);
}

std::string IndexSet::str() const {
  switch (kind()) {
    case Kind::Nat: return "Nat";
    case Kind::Int: return "Int";
    case Kind::Fin: return "Fin(" + std::to_string(node_->size) + ")";
    case Kind::Union: return "(" + node_->a.str() + " (+) " + node_->b.str() + ")";
    case Kind::Product: return "(" + node_->a.str() + " x " + node_->b.str() + ")";
  }
  return "?";
}

bool IndexSet::contains(const Index& ix) const {
  std::size_t pos = 0;
  return contains_at(ix, pos) && pos == ix.atoms.size();
}

bool IndexSet::contains_at(const Index& ix, std::size_t& pos) const {
  if (pos >= ix.atoms.size()) return false;
  switch (kind()) {
    case Kind::Nat:
      return ix.atoms[pos++] >= 0;
    case Kind::Int:
      ++pos;
      return true;
    case Kind::Fin: {
      std::int64_t v = ix.atoms[pos++];
      return v >= 0 && static_cast<std::uint64_t>(v) < node_->size;
    }
    case Kind::Union: {
      std::int64_t side = ix.atoms[pos++];
      if (side == 0) return node_->a.contains_at(ix, pos);
      if (side == 1) return node_->b.contains_at(ix, pos);
      return false;
    }
    case Kind::Product:
      return node_->a.contains_at(ix, pos) && node_->b.contains_at(ix, pos);
  }
  return false;
}

std::string IndexSet::path_string(const Index& ix) const {
  std::string out;
  std::size_t pos = 0;
  path_at(ix, pos, out);
  return out;
}

void IndexSet::path_at(const Index& ix, std::size_t& pos, std::string& out) const {
  if (pos >= ix.atoms.size()) {
    out += "<truncated>";
    return;
  }
  switch (kind()) {
    case Kind::Nat:
    case Kind::Int:
    case Kind::Fin:
      out += std::to_string(ix.atoms[pos++]);
      return;
    case Kind::Union: {
      std::int64_t side = ix.atoms[pos++];
      out += (side == 0 ? "L:" : "R:");
      (side == 0 ? node_->a : node_->b).path_at(ix, pos, out);
      return;
    }
    case Kind::Product: {
      out += "(";
      node_->a.path_at(ix, pos, out);
      out += ",";
      node_->b.path_at(ix, pos, out);
      out += ")";
      return;
    }
  }
}

std::vector<std::uint64_t> IndexSet::rank_tuple(const Index& ix) const {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  rank_at(ix, pos, out);
  return out;
}

void IndexSet::rank_at(const Index& ix, std::size_t& pos,
                       std::vector<std::uint64_t>& out) const {
  switch (kind()) {
    case Kind::Nat:
    case Kind::Fin:
      out.push_back(static_cast<std::uint64_t>(ix.atoms[pos++]));
      return;
    case Kind::Int:
      out.push_back(zigzag_rank(ix.atoms[pos++]));
      return;
    case Kind::Union: {
      std::int64_t side = ix.atoms[pos++];
      out.push_back(static_cast<std::uint64_t>(side));
      (side == 0 ? node_->a : node_->b).rank_at(ix, pos, out);
      return;
    }
    case Kind::Product:
      node_->a.rank_at(ix, pos, out);
      node_->b.rank_at(ix, pos, out);
      return;
  }
}

std::vector<Index> IndexSet::window(std::uint64_t radius) const {
  std::vector<Index> out;
  switch (kind()) {
    case Kind::Nat:
      for (std::uint64_t r = 0; r <= radius; ++r) out.push_back(Index::scalar(static_cast<std::int64_t>(r)));
      break;
    case Kind::Int:
      for (std::uint64_t r = 0; r <= radius; ++r) out.push_back(Index::scalar(zigzag_value(r)));
      break;
    case Kind::Fin:
      for (std::uint64_t r = 0; r < node_->size && r <= radius; ++r)
        out.push_back(Index::scalar(static_cast<std::int64_t>(r)));
      break;
    case Kind::Union: {
      for (const Index& ix : node_->a.window(radius)) out.push_back(ix.prefixed(0));
      for (const Index& ix : node_->b.window(radius)) out.push_back(ix.prefixed(1));
      break;
    }
    case Kind::Product: {
      auto wa = node_->a.window(radius);
      auto wb = node_->b.window(radius);
      for (const Index& ia : wa)
        for (const Index& ib : wb) out.push_back(ia.joined(ib));
      break;
    }
  }
  std::sort(out.begin(), out.end(), [this](const Index& x, const Index& y) {
    return rank_tuple(x) < rank_tuple(y);
  });
  return out;
}

Index IndexSet::index_at(std::uint64_t r) const {
  switch (kind()) {
    case Kind::Nat:
      return Index::scalar(static_cast<std::int64_t>(r));
    case Kind::Int:
      return Index::scalar(zigzag_value(r));
    case Kind::Fin:
      if (r >= node_->size) throw StructuralError("index_at out of Fin range");
      return Index::scalar(static_cast<std::int64_t>(r));
    case Kind::Union: {
      Dim da = node_->a.dim(), db = node_->b.dim();
      if (da.is_finite()) {
        if (r < da.n) return node_->a.index_at(r).prefixed(0);
        return node_->b.index_at(r - da.n).prefixed(1);
      }
      if (db.is_finite()) {
        if (r < db.n) return node_->b.index_at(r).prefixed(1);
        return node_->a.index_at(r - db.n).prefixed(0);
      }
      // both countable: interleave
      return r % 2 == 0 ? node_->a.index_at(r / 2).prefixed(0)
                        : node_->b.index_at(r / 2).prefixed(1);
    }
    case Kind::Product: {
      Dim da = node_->a.dim(), db = node_->b.dim();
      if (da.is_finite()) {
        return node_->a.index_at(r % da.n).joined(node_->b.index_at(r / da.n));
      }
      if (db.is_finite()) {
        return node_->a.index_at(r / db.n).joined(node_->b.index_at(r % db.n));
      }
      // Cantor pairing: r -> (i, j) along anti-diagonals.
      std::uint64_t d = 0, acc = 0;
      while (acc + d + 1 <= r) {
        acc += d + 1;
        ++d;
      }
      std::uint64_t i = r - acc;
      std::uint64_t j = d - i;
      return node_->a.index_at(i).joined(node_->b.index_at(j));
    }
  }
  throw StructuralError("index_at on empty index set");
}

std::optional<std::uint64_t> IndexSet::rank_of(const Index& ix) const {
  if (!contains(ix)) return std::nullopt;
  switch (kind()) {
    case Kind::Nat:
    case Kind::Fin:
      return static_cast<std::uint64_t>(ix.atoms[0]);
    case Kind::Int:
      return zigzag_rank(ix.atoms[0]);
    case Kind::Union: {
      Index rest(std::vector<std::int64_t>(ix.atoms.begin() + 1, ix.atoms.end()));
      bool is_left = ix.atoms[0] == 0;
      auto sub = (is_left ? node_->a : node_->b).rank_of(rest);
      if (!sub) return std::nullopt;
      Dim da = node_->a.dim(), db = node_->b.dim();
      if (da.is_finite()) return is_left ? *sub : *sub + da.n;
      if (db.is_finite()) return is_left ? *sub + db.n : *sub;
      return is_left ? 2 * *sub : 2 * *sub + 1;
    }
    case Kind::Product: {
      // split the atoms between the factors by re-parsing
      std::size_t pos = 0;
      node_->a.contains_at(ix, pos);
      Index ia(std::vector<std::int64_t>(ix.atoms.begin(), ix.atoms.begin() + pos));
      Index ib(std::vector<std::int64_t>(ix.atoms.begin() + pos, ix.atoms.end()));
      auto ra = node_->a.rank_of(ia), rb = node_->b.rank_of(ib);
      if (!ra || !rb) return std::nullopt;
      Dim da = node_->a.dim(), db = node_->b.dim();
      if (da.is_finite()) return *ra + da.n * *rb;
      if (db.is_finite()) return *rb + db.n * *ra;
      std::uint64_t d = *ra + *rb;
      return d * (d + 1) / 2 + *ra;
    }
  }
  return std::nullopt;
}

}  // namespace bto
