#ifndef BTO_POWERS_HPP
#define BTO_POWERS_HPP

#include "bto/extension.hpp"

namespace bto {

struct PowerBundle {
  std::uint64_t n = 1;
  Operator vn, en, xn;
  Operator en_formula;     // sum_j V^j E X^{n-1-j}
  CheckOutcome block_probe;  // T^n against the block assembly
};

/// Blocks of T^n for a Brownian-type T, certified against the direct n-fold
/// composition on an interior-shrunk window.
PowerBundle block_power(const BlockTriangular& t, std::uint64_t n,
                        const ToleranceProfile& tol);

/// E_n^* E_n = E^*E sum_{j<n} X^{*j} X^j on the H2 window.
CheckOutcome gram_identity_check(const BlockTriangular& t, std::uint64_t n,
                                 const ToleranceProfile& tol);

/// The modulus |E_n| as a diagonal operator, computed through the gram
/// identity (requires diagonal views of E^*E and the X grams).
std::optional<Operator> power_modulus(const BlockTriangular& t, std::uint64_t n,
                                      const ToleranceProfile& tol);

struct ClassSCondition {
  bool pass = false;
  CheckOutcome commutation;  // X2^n with sum_{j=1}^{n-1} X2^{*j} X2^j
  std::optional<CheckOutcome> square_modulus;  // n = 2: X2^2 against |X2|
  std::vector<ShiftSubnormality> power_shift_evidence;  // interleaved components
  bool restricted_to_range = true;  // false: X used directly (injective E)
};

/// Power-of-class-S criterion: subnormality evidence for X^n (weighted
/// shifts decompose into interleaved shifts) plus the commutation condition
/// on the restriction of X to the closure of ran |E|.
ClassSCondition power_classS_condition(const BlockTriangular& t, std::uint64_t n,
                                       const ToleranceProfile& tol);

struct ShiftPowerCriterion {
  bool constant = false;
  std::optional<std::uint64_t> first_nonconstant;  // weight index k
  bool sum_identity_holds = false;                 // the window identity
  double max_residual = 0.0;
  std::optional<std::uint64_t> identity_fail_k;
  double fail_residual = 0.0;
  bool agree = false;           // the two tests decide the same way
  bool precondition_ok = true;  // nondecreasing weights
};

/// Weighted-shift power criterion: the window sum identity against exact
/// weight constancy; the two must agree for hyponormal weights.
ShiftPowerCriterion shift_power_criterion(const WeightSequence& w, std::uint64_t n,
                                          const ToleranceProfile& tol);

struct ExtensionPowerReport {
  std::uint64_t n = 1;
  PowerBundle t_power;
  Operator en_tilde;
  ExtensionCheck entrywise;      // T^n entrywise-extends to R^n
  CheckOutcome compression;      // E_n^*E_n = P E~_n^* E~_n restricted to H2
  std::optional<CheckOutcome> modulus_inclusion;  // class Q: |E_n| in |E~_n|
  MinimalityCheck power_minimality;               // N^n minimal over S^n
  bool pass = false;
};

/// Entrywise extension of T^n induced by a verified extension bundle.
ExtensionPowerReport extension_power(const BlockTriangular& t, const ExtensionBundle& r,
                                     std::uint64_t n, const ToleranceProfile& tol);

}  // namespace bto

#endif  // BTO_POWERS_HPP
