#ifndef RISKTREE_TREE_HPP_
#define RISKTREE_TREE_HPP_

#include <Eigen/Core>

#include <span>
#include <vector>

#include "risktree/error.hpp"

namespace risktree {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Leaf-indexed real vector. Measurability is a property checked against a
/// FilteredSpace, not stored.
using RandomVariable = Vector;

/// One value per atom of a given filtration level, atoms in tree order.
using NodeValues = Vector;

/// Leaf-indexed indicator of an event.
using LeafMask = Eigen::Array<bool, Eigen::Dynamic, 1>;

inline constexpr double kConstructionTol = 1e-12;
inline constexpr double kDefaultTol = 1e-9;

/// Declarative description of a scenario tree.
///
/// `branching` lists the child count of every internal node in depth-first
/// preorder (child index ascending); every leaf sits at depth `horizon`.
struct TreeSpec {
  int horizon = 0;
  std::vector<int> branching;
  Vector weights;

  bool operator==(const TreeSpec& other) const {
    return horizon == other.horizon && branching == other.branching &&
           weights.size() == other.weights.size() && weights == other.weights;
  }
};

/// Contiguous leaf range [begin, end). Depth-first leaf ordering makes every
/// atom of every level such a range.
struct Atom {
  Index begin = 0;
  Index end = 0;

  Index size() const { return end - begin; }
  bool contains(Index leaf) const { return leaf >= begin && leaf < end; }
};

/// Finite filtered probability space realised as a scenario tree.
///
/// atoms(0) is the whole leaf set, atoms(T) are the singletons, atoms(t + 1)
/// refines atoms(t), and the reference weights P are strictly positive.
class FilteredSpace {
 public:
  FilteredSpace() = default;

  /// Builds and validates the space. Weights within 1e-9 of summing to one
  /// are renormalised so the stored P sums to one within 1e-12.
  static FilteredSpace build(const TreeSpec& spec);

  int horizon() const { return horizon_; }
  Index leaves() const { return p_.size(); }
  const Vector& p() const { return p_; }
  const TreeSpec& spec() const { return spec_; }

  std::span<const Atom> atoms(int t) const;
  Index atom_count(int t) const { return static_cast<Index>(atoms(t).size()); }
  Index atom_of(int t, Index leaf) const;

  /// Range [first, last) of atom indices at level t + 1 below atom `a` of level t.
  std::pair<Index, Index> children(int t, Index a) const;

  /// Reference probability of every atom at level t.
  const NodeValues& atom_probabilities(int t) const;

  bool operator==(const FilteredSpace& other) const { return spec_ == other.spec_; }

 private:
  int horizon_ = 0;
  TreeSpec spec_;
  Vector p_;
  std::vector<std::vector<Atom>> atoms_;
  std::vector<std::vector<Index>> atom_of_;
  std::vector<std::vector<std::pair<Index, Index>>> children_;
  std::vector<NodeValues> atom_p_;
};

/// build_tree: thin alias kept for readability at call sites.
inline FilteredSpace build_tree(const TreeSpec& spec) { return FilteredSpace::build(spec); }

/// Uniform tree with the same branching at every internal node.
TreeSpec uniform_tree_spec(int horizon, int branching);

void check_time(const FilteredSpace& space, int t);
void check_size(const FilteredSpace& space, const Vector& x, const char* what);

/// Node values -> leaf vector constant on atoms(t).
RandomVariable lift(const FilteredSpace& space, int t, const NodeValues& values);

/// Leaf vector -> node values at level t (reads the first leaf of every atom).
NodeValues restrict_to(const FilteredSpace& space, int t, const RandomVariable& x);

bool is_measurable(const FilteredSpace& space, const RandomVariable& x, int t,
                   double tol = kConstructionTol);

/// Smallest t such that x is constant on every atom of atoms(t).
int measurability_level(const FilteredSpace& space, const RandomVariable& x,
                        double tol = kConstructionTol);

bool is_measurable_event(const FilteredSpace& space, const LeafMask& event, int t);

/// Probability measure on the leaves. Weights are non-negative and sum to one.
class TreeMeasure {
 public:
  TreeMeasure() = default;

  /// Validates q; weights within 1e-9 of unit mass are renormalised.
  static TreeMeasure from_weights(const FilteredSpace& space, Vector q);
  static TreeMeasure reference(const FilteredSpace& space);

  const Vector& weights() const { return q_; }
  Index size() const { return q_.size(); }

  /// True when every leaf weight is strictly positive (equivalence to P).
  bool equivalent_to_p() const { return (q_.array() > 0.0).all(); }

  /// Largest t with Q(A) = P(A) for every atom A of atoms(t). Always >= 0.
  int reduces_to_p_at(const FilteredSpace& space, double tol = kConstructionTol) const;

  bool operator==(const TreeMeasure& other) const {
    return q_.size() == other.q_.size() && q_ == other.q_;
  }

 private:
  explicit TreeMeasure(Vector q) : q_(std::move(q)) {}
  Vector q_;
};

/// Sub-probability a * Q with a in [0, 1]. When a == 0 the Q component is
/// arbitrary and `unique` is false.
struct SubProbability {
  double a = 1.0;
  TreeMeasure q;
  bool unique = true;

  Vector raw() const { return a * q.weights(); }
};

/// Q(A) for every atom of atoms(t).
NodeValues atom_masses(const FilteredSpace& space, const Vector& q, int t);

/// Per-leaf conditional weights Q(omega | A(omega)) at level t, falling back
/// to P(omega | A) on Q-null atoms.
Vector conditional_weights(const FilteredSpace& space, const Vector& q, int t);

/// E_Q[X | F_t] as node values. Q-null atoms use the P-conditional expectation.
NodeValues conditional_expectation_nodes(const FilteredSpace& space, const RandomVariable& x,
                                         const Vector& q, int t);

RandomVariable conditional_expectation(const FilteredSpace& space, const RandomVariable& x,
                                       const TreeMeasure& q, int t);

/// Atom-by-atom maximum of a finite family measurable at level t; on a finite
/// space this is the essential supremum.
RandomVariable nodewise_max(const FilteredSpace& space, std::span<const RandomVariable> family,
                            int t);

/// Z_t = E_P[dQ/dP | F_t].
RandomVariable density_process(const FilteredSpace& space, const TreeMeasure& q, int t);

}  // namespace risktree

#endif  // RISKTREE_TREE_HPP_
