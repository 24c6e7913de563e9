#include "risktree/battery.hpp"

#include <random>

namespace risktree {

std::vector<RandomVariable> random_battery(const FilteredSpace& space, std::size_t n, std::uint64_t seed,
                                           double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<RandomVariable> out(n, RandomVariable(space.leaves()));
  for (auto& x : out)
    for (Index l = 0; l < x.size(); ++l) x[l] = dist(rng);
  return out;
}

std::vector<RandomVariable> standard_battery(const FilteredSpace& space, std::size_t n, std::uint64_t seed) {
  std::vector<RandomVariable> out;
  for (double c : {-1.0, 0.0, 1.0}) out.push_back(RandomVariable::Constant(space.leaves(), c));
  for (auto& x : random_battery(space, n, seed)) out.push_back(std::move(x));
  return out;
}

RandomVariable project(const FilteredSpace& space, const RandomVariable& x, int u) {
  return lift(space, u, conditional_expectation_nodes(space, x, space.p(), u));
}

}  // namespace risktree
