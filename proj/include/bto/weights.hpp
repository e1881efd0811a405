#ifndef BTO_WEIGHTS_HPP
#define BTO_WEIGHTS_HPP

#include <cstdint>
#include <vector>

#include "bto/indexing.hpp"

namespace bto {

/// Finite atomic probability measure on (0, infinity).  Generates the moment
/// sequence of a subnormal weighted shift and, through it, its weights.
class BergerMeasure {
 public:
  struct Atom {
    double location;  // t_j > 0, pairwise distinct
    double mass;      // w_j > 0, sum to 1
  };

  BergerMeasure(std::vector<Atom> atoms, double mass_tol = 1e-12);

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t atom_count() const { return atoms_.size(); }

  /// k-th moment: sum_j w_j t_j^k.
  double moment(std::uint64_t k) const;
  double max_location() const;

 private:
  std::vector<Atom> atoms_;
};

/// Weight sequence of a unilateral weighted shift: either an explicit prefix
/// with a constant tail, or generated from the moments of a BergerMeasure
/// via weight(n) = sqrt(gamma_{n+1}/gamma_n).
class WeightSequence {
 public:
  enum class Kind { ExplicitConstTail, MomentGenerated };

  static WeightSequence constant(double theta);
  static WeightSequence explicit_tail(std::vector<double> prefix, double tail);
  static WeightSequence from_measure(BergerMeasure mu);

  Kind kind() const { return kind_; }
  double weight(std::uint64_t n) const;
  /// Exact supremum of the weights: max(prefix, tail) or sqrt(max atom).
  double sup() const;
  /// Exactly constant as a whole sequence (decidable for both kinds).
  bool is_constant(double tol = 1e-12) const;

  const std::vector<double>& prefix() const { return prefix_; }
  double tail() const { return tail_; }
  const BergerMeasure& measure() const;

 private:
  WeightSequence() = default;
  Kind kind_ = Kind::ExplicitConstTail;
  std::vector<double> prefix_;
  double tail_ = 1.0;
  std::vector<BergerMeasure> measure_;  // 0 or 1 elements
};

}  // namespace bto

#endif  // BTO_WEIGHTS_HPP
