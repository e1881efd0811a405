#include "bto/weights.hpp"

#include <cmath>

namespace bto {

BergerMeasure::BergerMeasure(std::vector<Atom> atoms, double mass_tol)
    : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw StructuralError("BergerMeasure needs at least one atom");
  double total = 0.0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (atoms_[i].location <= 0.0) throw StructuralError("atom locations must be positive");
    if (atoms_[i].mass <= 0.0) throw StructuralError("atom masses must be positive");
    for (std::size_t j = 0; j < i; ++j)
      if (atoms_[i].location == atoms_[j].location)
        throw StructuralError("atom locations must be pairwise distinct");
    total += atoms_[i].mass;
  }
  if (std::abs(total - 1.0) > mass_tol)
    throw StructuralError("atom masses must sum to 1");
}

double BergerMeasure::moment(std::uint64_t k) const {
  double s = 0.0;
  for (const auto& a : atoms_) s += a.mass * std::pow(a.location, static_cast<double>(k));
  return s;
}

double BergerMeasure::max_location() const {
  double m = atoms_.front().location;
  for (const auto& a : atoms_) m = std::max(m, a.location);
  return m;
}

WeightSequence WeightSequence::constant(double theta) {
  return explicit_tail({}, theta);
}

WeightSequence WeightSequence::explicit_tail(std::vector<double> prefix, double tail) {
  for (double w : prefix)
    if (w < 0.0) throw StructuralError("weights must be nonnegative");
  if (tail < 0.0) throw StructuralError("weights must be nonnegative");
  WeightSequence s;
  s.kind_ = Kind::ExplicitConstTail;
  s.prefix_ = std::move(prefix);
  s.tail_ = tail;
  return s;
}

WeightSequence WeightSequence::from_measure(BergerMeasure mu) {
  WeightSequence s;
  s.kind_ = Kind::MomentGenerated;
  s.measure_.push_back(std::move(mu));
  return s;
}

double WeightSequence::weight(std::uint64_t n) const {
  if (kind_ == Kind::ExplicitConstTail) {
    return n < prefix_.size() ? prefix_[n] : tail_;
  }
  const BergerMeasure& mu = measure_.front();
  return std::sqrt(mu.moment(n + 1) / mu.moment(n));
}

double WeightSequence::sup() const {
  if (kind_ == Kind::ExplicitConstTail) {
    double m = tail_;
    for (double w : prefix_) m = std::max(m, w);
    return m;
  }
  // moment ratios of an atomic measure increase to the largest atom location
  return std::sqrt(measure_.front().max_location());
}

bool WeightSequence::is_constant(double tol) const {
  if (kind_ == Kind::MomentGenerated) return measure_.front().atom_count() == 1;
  for (double w : prefix_)
    if (std::abs(w - tail_) > tol) return false;
  return true;
}

const BergerMeasure& WeightSequence::measure() const {
  if (kind_ != Kind::MomentGenerated)
    throw StructuralError("weight sequence is not moment-generated");
  return measure_.front();
}

}  // namespace bto
