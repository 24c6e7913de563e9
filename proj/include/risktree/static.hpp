#ifndef RISKTREE_STATIC_HPP_
#define RISKTREE_STATIC_HPP_

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "risktree/report.hpp"
#include "risktree/tree.hpp"

namespace risktree {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct DualEntry {
  SubProbability mu;
  double penalty = 0.0;  // may be +inf
};

/// How a penalty family is checked against the normalisation rho(0) = 0.
enum class Normalization { Verify, Shift, Skip };

/// Finite family of (a Q, c) entries. Entries with infinite penalty are kept
/// (they serialise) but never contribute to an evaluation.
class DualDictionary {
 public:
  DualDictionary() = default;

  static DualDictionary create(const FilteredSpace& space, std::vector<DualEntry> entries,
                               Normalization norm = Normalization::Verify);

  const std::vector<DualEntry>& entries() const { return entries_; }
  Index size() const { return static_cast<Index>(entries_.size()); }

  /// Rows a_i Q_i of the finite-penalty entries, and their penalties.
  const Matrix& finite_measures() const { return measures_; }
  const Vector& finite_penalties() const { return penalties_; }

 private:
  std::vector<DualEntry> entries_;
  Matrix measures_;
  Vector penalties_;
};

struct StaticRiskMeasure {
  FilteredSpace space;
  DualDictionary dictionary;

  double operator()(const RandomVariable& x) const;
};

/// max_i { a_i E_{Q_i}[-X] - c_i } over finite-penalty entries.
double eval_static_rho(const StaticRiskMeasure& rm, const RandomVariable& x);

/// Lower convex hull value min { sum l_i c_i : sum l_i m_i = mu, sum l_i = 1, l >= 0 }.
/// Rows of `measures` are the points m_i. Returns +inf when mu is outside the hull.
double minimal_penalty_hull(const Matrix& measures, const Vector& penalties, const Vector& mu);

/// Convex conjugate of the dictionary risk measure at the raw leaf measure mu.
double minimal_penalty_static(const StaticRiskMeasure& rm, const Vector& mu);
double minimal_penalty_static(const StaticRiskMeasure& rm, const SubProbability& mu);

/// One block of a sum  F(X) = sum_g w_g max_k ( <m_k, -X> - c_k ).
struct AffineGroup {
  double weight = 1.0;
  Matrix measures;  // rows m_k
  Vector penalties; // c_k, +inf entries are ignored
};

/// sup_X { <mu, -X> - F(X) } through the primal epigraph LP, independent of
/// the hull formulation. +inf when the LP is unbounded.
double conjugate_primal_lp(const std::vector<AffineGroup>& groups, const Vector& mu);

/// Splits a raw leaf measure into total mass a and normalised Q. The zero
/// measure returns Q = P flagged non-unique.
SubProbability decompose_subprobability(const FilteredSpace& space, const Vector& raw);

struct OracleOptions {
  long budget = 200000;  // leaves * n
  int restarts = 4;
  std::uint64_t seed = 7;
};

/// Brute-force lower bound on the conjugate: coordinate ascent over the grid
/// [-box, box]^leaves with n points per axis, then a smoothed projected
/// gradient polish inside the box. Uses only evaluations of the dictionary.
double conjugate_grid_oracle(const StaticRiskMeasure& rm, const Vector& mu, double box, int n,
                             const OracleOptions& opts = {});

using ScalarFunctional = std::function<double(const RandomVariable&)>;

struct StaticAxiomOptions {
  std::vector<double> lambdas{0.1, 0.25, 0.5, 0.75, 0.9};
  double tol = kDefaultTol;
};

/// Convexity, monotonicity, cash-subadditivity, normalisation and the bounds
/// rho(m) >= -m, rho(-m) <= m. Cash-additivity is reported as informational.
ConsistencyReport check_static_axioms(const ScalarFunctional& rho, const FilteredSpace& space,
                                      const std::vector<RandomVariable>& battery,
                                      const StaticAxiomOptions& opts = {});

ConsistencyReport check_static_axioms(const StaticRiskMeasure& rm,
                                      const std::vector<RandomVariable>& battery,
                                      const StaticAxiomOptions& opts = {});

}  // namespace risktree

#endif  // RISKTREE_STATIC_HPP_
