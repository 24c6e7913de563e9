#ifndef RISKTREE_DYNAMIC_HPP_
#define RISKTREE_DYNAMIC_HPP_

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "risktree/report.hpp"
#include "risktree/static.hpp"
#include "risktree/tree.hpp"

namespace risktree {

/// Values indexed by time pairs (t, u) with 0 <= t <= u <= T.
template <typename T>
class TimePairTable {
 public:
  TimePairTable() = default;
  explicit TimePairTable(int horizon, const T& init = T{})
      : horizon_(horizon), data_(static_cast<std::size_t>((horizon + 1) * (horizon + 1)), init) {}

  int horizon() const { return horizon_; }

  T& at(int t, int u) { return data_[slot(t, u)]; }
  const T& at(int t, int u) const { return data_[slot(t, u)]; }

  bool operator==(const TimePairTable& other) const {
    return horizon_ == other.horizon_ && data_ == other.data_;
  }

 private:
  std::size_t slot(int t, int u) const {
    if (t < 0 || t > u || u > horizon_)
      throw Error(Errc::TimeOrderViolation,
                  "time pair (" + std::to_string(t) + "," + std::to_string(u) + ") not ordered in 0.." +
                      std::to_string(horizon_));
    return static_cast<std::size_t>(t * (horizon_ + 1) + u);
  }

  int horizon_ = 0;
  std::vector<T> data_;
};

/// Node-value tables compare with Eigen's coefficient-wise ==, so wrap them.
struct NodeTable : TimePairTable<NodeValues> {
  using TimePairTable<NodeValues>::TimePairTable;
  bool operator==(const NodeTable& other) const;
};

/// One dual element: a measure Q and a discount process D_{t,u} stored as
/// node values at level t.
struct DualPair {
  TreeMeasure q;
  NodeTable discount;
};

/// c_{t,u}(D Q) for every pair, node values at level t, +inf allowed.
using PenaltyTerm = std::vector<NodeTable>;

/// Closed form gamma_t^{-1} E_P[(-X)^+ | F_t]; gamma holds node values per level.
struct PutPremiumForm {
  std::vector<NodeValues> gamma;
};

struct ModelOptions {
  Normalization normalization = Normalization::Verify;
  bool require_equivalent = false;
};

/// rho_{t,u}(X) = nodewise max over pairs of D_{t,u} E_Q[-X | F_t] - c_{t,u}.
class DualModel {
 public:
  DualModel() = default;

  static DualModel create(FilteredSpace space, std::vector<DualPair> pairs, PenaltyTerm penalty,
                          ModelOptions opts = {}, std::optional<PutPremiumForm> closed_form = {});

  const FilteredSpace& space() const { return space_; }
  int horizon() const { return space_.horizon(); }
  const std::vector<DualPair>& pairs() const { return pairs_; }
  Index pair_count() const { return static_cast<Index>(pairs_.size()); }
  const PenaltyTerm& penalty() const { return penalty_; }
  const ModelOptions& options() const { return opts_; }
  const std::optional<PutPremiumForm>& closed_form() const { return closed_form_; }
  bool has_dictionary() const { return !pairs_.empty(); }

  /// Assumption that every Q is equivalent to P.
  bool all_equivalent() const;

  /// rho_{t,u}(X) as node values at level t. Uses the closed form when present.
  NodeValues rho_nodes(const RandomVariable& x, int t, int u) const;

  /// rho_{t,u}(X) through the pair dictionary only.
  NodeValues rho_dictionary_nodes(const RandomVariable& x, int t, int u) const;

  /// Matrix (pairs x atoms of level t) of D_{t,u} E_Q[-X|F_t] - c_{t,u}.
  Matrix pair_values(const RandomVariable& x, int t, int u) const;

  /// Rows Q_k(omega | A_t(omega)) for every pair, leaves as columns.
  const Matrix& conditional_kernel(int t) const { return cond_.at(static_cast<std::size_t>(t)); }
  /// Pairs x atoms(t) matrices of discounts and penalties.
  Matrix discount_matrix(int t, int u) const;
  Matrix penalty_matrix(int t, int u) const;

 private:
  void require_dictionary() const;

  FilteredSpace space_;
  std::vector<DualPair> pairs_;
  PenaltyTerm penalty_;
  ModelOptions opts_;
  std::optional<PutPremiumForm> closed_form_;
  std::vector<Matrix> cond_;
};

RandomVariable eval_dynamic_rho(const DualModel& model, const RandomVariable& x, int t, int u);

/// Evaluation front-end with a thread-safe memo table keyed by (t, u, X).
class DynamicRiskMeasure {
 public:
  explicit DynamicRiskMeasure(const DualModel& model) : model_(&model) {}

  const DualModel& model() const { return *model_; }
  NodeValues rho_nodes(const RandomVariable& x, int t, int u) const;
  RandomVariable rho(const RandomVariable& x, int t, int u) const;

  std::size_t hits() const;
  std::size_t misses() const;

 private:
  struct Entry {
    int t;
    int u;
    RandomVariable x;
    NodeValues value;
  };
  const DualModel* model_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::size_t, std::vector<Entry>> cache_;
  mutable std::size_t hits_ = 0;
  mutable std::size_t misses_ = 0;
};

/// Per-atom conjugate of rho_{t,u} at the element D_{t,u} Q of `pair`.
NodeValues minimal_penalty_dynamic(const DualModel& model, const DualPair& pair, int t, int u);
NodeValues minimal_penalty_dynamic(const DualModel& model, const DualPair& pair, int t);
NodeValues minimal_penalty_dynamic(const DualModel& model, Index pair, int t, int u);

/// Same pairs, penalty replaced by the minimal penalty for every (t, u).
DualModel with_minimal_penalty(const DualModel& model);

struct DynamicAxiomOptions {
  std::vector<double> lambdas{0.1, 0.25, 0.5, 0.75, 0.9};
  double tol = kDefaultTol;
};

/// Nodewise convexity, monotonicity, cash-subadditivity (constant and
/// F_t-measurable m_t), normalisation, bounds, and the dictionary identity
/// rho_t(X + m) + m = max { m (1 - D) + D E_Q[-X|F_t] - c }, for all t and u = T.
ConsistencyReport check_dynamic_axioms(const DualModel& model, const std::vector<RandomVariable>& battery,
                                       const DynamicAxiomOptions& opts = {});

struct RegularityCase {
  RandomVariable x;
  RandomVariable y;
  LeafMask event;
  int t = 0;
};

ConsistencyReport check_regularity(const DualModel& model, const std::vector<RegularityCase>& cases,
                                   double tol = kDefaultTol);

struct DiscountDecomposition {
  RandomVariable d;       // D_t = a Z_t
  TreeMeasure q_tilde;
  LeafMask null_set;      // N = {Z_t = 0}
  RandomVariable z_t;
  RandomVariable z_T;
  bool bounded = true;    // D_t <= 1
};

DiscountDecomposition discount_decomposition(const FilteredSpace& space, const SubProbability& mu, int t);

/// X -> E_P[rho_{t,T}(X)].
ScalarFunctional aggregate_rho0t(const DualModel& model, int t);

/// Leaf measure P(A) D_{t,T}(A) Q(omega | A) induced by a pair at level t.
Vector induced_subprobability(const DualModel& model, const DualPair& pair, int t);

/// Conjugate of aggregate_rho0t at mu through the primal LP.
double aggregated_minimal_penalty(const DualModel& model, int t, const Vector& mu);

struct AggregationCheck {
  double lhs = 0.0;  // E_P[minimal penalty at level t]
  double rhs = 0.0;  // conjugate of the aggregated functional
  double gap = 0.0;
  bool pass = true;
};

AggregationCheck penalty_aggregation_check(const DualModel& model, const DualPair& pair, int t,
                                           double tol = kDefaultTol);

}  // namespace risktree

#endif  // RISKTREE_DYNAMIC_HPP_
