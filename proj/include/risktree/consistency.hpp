#ifndef RISKTREE_CONSISTENCY_HPP_
#define RISKTREE_CONSISTENCY_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "risktree/dynamic.hpp"
#include "risktree/report.hpp"

namespace risktree {

struct CheckOptions {
  double tol = kDefaultTol;
  /// Slack on the premise of an implication test.
  double premise_tol = 1e-9;
  /// Tolerance on its conclusion; looser so premise noise is not amplified.
  double conclusion_tol = 1e-7;
  long min_non_vacuous = 1;
  int jobs = 1;
  /// Adds pairs built from the model itself (certainty equivalents, constancy
  /// pairs) to the weak and weak* batteries.
  bool derived_pairs = true;
};

struct PositionPair {
  RandomVariable x;
  RandomVariable y;
  std::string kind;
};

/// rho_{s,u}(X) against rho_{s,t}(-rho_{t,u}(X)) for every s <= t <= u, with
/// X projected onto F_u.
ConsistencyReport check_strong_tc(const DualModel& model, const std::vector<RandomVariable>& battery,
                                  const CheckOptions& opts = {});

/// rho_{t,u}(X) >= rho_{t,u}(Y)  =>  rho_{s,u}(X) >= rho_{s,u}(Y) for s < t.
/// Throws InsufficientNonVacuousPairs below opts.min_non_vacuous.
ConsistencyReport check_weak_tc(const DualModel& model, const std::vector<PositionPair>& pairs,
                                const CheckOptions& opts = {});

/// Equality premise, equality conclusion.
ConsistencyReport check_weak_star_tc(const DualModel& model, const std::vector<PositionPair>& pairs,
                                     const CheckOptions& opts = {});

/// rho_{t,u}(m) = -m for F_t-measurable m and every u >= t.
ConsistencyReport check_constancy(const DualModel& model, int t, const std::vector<RandomVariable>& m_battery,
                                  const CheckOptions& opts = {});

/// check_constancy at every level, each battery member projected onto F_t.
ConsistencyReport check_constancy_all(const DualModel& model, const std::vector<RandomVariable>& battery,
                                      const CheckOptions& opts = {});

/// F_t-measurable kappa with rho_{t,u}(kappa) = rho_{t,u}(X), by bisection
/// between the atomwise infimum and supremum of X.
NodeValues certainty_equivalent(const DualModel& model, const RandomVariable& x, int t, int u);

/// Leaf permutations that swap two sibling subtrees of identical shape.
std::vector<std::vector<Index>> sibling_swaps(const FilteredSpace& space);

/// Pairs (X, X - m) with m >= 0, (X, lambda X), sibling swaps and random pairs.
std::vector<PositionPair> weak_pair_battery(const FilteredSpace& space, const std::vector<RandomVariable>& xs,
                                            std::uint64_t seed);

/// Sibling-swap pairs (X, X o pi) only.
std::vector<PositionPair> symmetry_pairs(const FilteredSpace& space, const std::vector<RandomVariable>& xs);

struct ImplicationBatteries {
  std::vector<RandomVariable> battery;
  std::vector<PositionPair> pairs;
};

/// Evaluates the implication lattice on one model:
///  (a) strong and monotone => weak and weak*;
///  (b) constancy and weak* => strong;
///  (c) weak (with cash-subadditivity and normalisation) => for rho_t(X) <= 0,
///      rho_s(X) <= rho_s(-rho_t(X)), and for rho_t(X) >= 0 the reverse.
/// The component verdicts are included as informational checks.
ConsistencyReport check_tc_implications(const DualModel& model, const ImplicationBatteries& batteries,
                                        const CheckOptions& opts = {});

std::string triple_label(int s, int t, int u);

}  // namespace risktree

#endif  // RISKTREE_CONSISTENCY_HPP_
