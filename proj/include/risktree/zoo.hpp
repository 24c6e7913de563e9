#ifndef RISKTREE_ZOO_HPP_
#define RISKTREE_ZOO_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "risktree/dynamic.hpp"
#include "risktree/static.hpp"
#include "risktree/structure.hpp"

namespace risktree {

/// Uniform binary tree of horizon 2 (four leaves).
FilteredSpace binary_tree();

/// Single pair D = 1, Q = P, c = 0.
DualModel conditional_expectation_model(const FilteredSpace& space);

/// gamma_t^{-1} E_P[(-X)^+ | F_t]. On trees with at most `dictionary_leaves`
/// leaves the model also carries the exact leaf-subset dictionary: for each
/// subset S, Q_S = P(. | S) and D_{t,u} = P(S | F_t) / gamma_t, c = 0.
DualModel put_premium_model(const FilteredSpace& space, const std::vector<NodeValues>& gamma,
                            int dictionary_leaves = 8);
DualModel put_premium_model(const FilteredSpace& space, double gamma, int dictionary_leaves = 8);

/// Product family over internal nodes. kernels[t][a] lists the transition
/// kernels available at atom a of level t (strictly positive, summing to 1),
/// node_penalty[t][a][j] is the one-step penalty of choosing kernel j there.
/// Every pair combines one kernel per node with one discount sequence; the
/// sequence gives D_{t,u} = prod_{r=t}^{u-1} delta_r.
struct RectangularSpec {
  TreeSpec tree;
  std::vector<std::vector<std::vector<Vector>>> kernels;
  std::vector<std::vector<std::vector<double>>> node_penalty;
  std::vector<std::vector<double>> discount_sequences;
};

DualModel build_rectangular_model(const RectangularSpec& spec);

/// Horizon 2 or 3, at most 27 leaves, at most max_pairs pairs, discount
/// factors in {1, 1/2} varying only in the first period.
RectangularSpec random_rectangular_spec(std::uint64_t seed, long max_pairs = 128);

/// Binary horizon-2 tree, kernels {1/3, 1/2, 2/3} at every node, D = 1, c = 0.
DualModel coherent_grid_model();
RectangularSpec coherent_grid_spec();

/// Same grid with first-period factors {1, 1/2}, second-period factor 1/2 and
/// one-step penalties |p - 1/2|.
DualModel discounted_cocycle_model();
RectangularSpec discounted_cocycle_spec();

/// c_{0,T} raised by delta at the root for `pair`; built without
/// normalisation checks.
DualModel perturb_penalty(const DualModel& model, Index pair, int s, int u, double delta);

/// Index of a pair attaining rho_{0,T}(X) at the root.
Index root_argmax_pair(const DualModel& model, const RandomVariable& x);

/// discounted_cocycle_model with c_{0,2} of the root maximiser for X = -1
/// raised by 0.05.
DualModel broken_cocycle_model();

/// Two pairs with D = 1: Q = P charged only on level-1 tables, and an
/// asymmetric Q charged only from the root. Breaks cocycle and locality.
DualModel broken_weak_model();

/// {(1, P, 0), (1/2, (1/2, 0, 1/4, 1/4), 0.1)} on the binary tree.
DualDictionary two_pair_dictionary();

/// The same two entries as a dynamic model: D_{t,u} = a and c_{t,u} = c for
/// t < u, D = 1 and c = 0 on the diagonal.
DualModel two_pair_model();

struct ZooEntry {
  std::string name;
  DualModel model;
  bool strongly_consistent;
  bool normalized;
};

/// Dynamic fixtures under their shipped names.
std::vector<ZooEntry> fixture_zoo();

}  // namespace risktree

#endif  // RISKTREE_ZOO_HPP_
