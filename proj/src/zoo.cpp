#include "risktree/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace risktree {

FilteredSpace binary_tree() { return build_tree(uniform_tree_spec(2, 2)); }

namespace {

NodeTable constant_table(const FilteredSpace& space, double diagonal, double off_diagonal) {
  NodeTable out(space.horizon());
  for (int t = 0; t <= space.horizon(); ++t)
    for (int u = t; u <= space.horizon(); ++u)
      out.at(t, u) = NodeValues::Constant(space.atom_count(t), t == u ? diagonal : off_diagonal);
  return out;
}

bool penalty_normalized(const DualModel& model) {
  const int T = model.horizon();
  for (int t = 0; t <= T; ++t)
    for (int u = t; u <= T; ++u)
      if (model.penalty_matrix(t, u).colwise().minCoeff().cwiseAbs().maxCoeff() > kConstructionTol) return false;
  return true;
}

}  // namespace

DualModel conditional_expectation_model(const FilteredSpace& space) {
  std::vector<DualPair> pairs{{TreeMeasure::reference(space), constant_table(space, 1.0, 1.0)}};
  PenaltyTerm penalty{constant_table(space, 0.0, 0.0)};
  return DualModel::create(space, std::move(pairs), std::move(penalty));
}

DualModel put_premium_model(const FilteredSpace& space, const std::vector<NodeValues>& gamma, int dictionary_leaves) {
  PutPremiumForm form{gamma};
  const int T = space.horizon();
  std::vector<DualPair> pairs;
  PenaltyTerm penalty;
  if (space.leaves() <= dictionary_leaves && space.leaves() < 31 &&
      static_cast<int>(gamma.size()) == T + 1) {
    const Vector& p = space.p();
    const long subsets = 1L << space.leaves();
    for (long mask = 0; mask < subsets; ++mask) {
      Vector in(space.leaves());
      for (Index l = 0; l < in.size(); ++l) in[l] = (mask >> l) & 1L ? 1.0 : 0.0;
      const Vector charged = p.cwiseProduct(in);
      const double mass = charged.sum();
      const TreeMeasure q = mask == 0 ? TreeMeasure::reference(space) : TreeMeasure::from_weights(space, charged / mass);
      NodeTable d(T);
      for (int t = 0; t <= T; ++t) {
        const NodeValues share = atom_masses(space, charged, t).cwiseQuotient(space.atom_probabilities(t));
        const auto& g = gamma[static_cast<std::size_t>(t)];
        if (g.size() != share.size()) throw Error(Errc::SpaceMismatch, "gamma has wrong size");
        for (int u = t; u <= T; ++u) d.at(t, u) = share.cwiseQuotient(g);
      }
      pairs.push_back({q, std::move(d)});
      penalty.push_back(constant_table(space, 0.0, 0.0));
    }
  }
  return DualModel::create(space, std::move(pairs), std::move(penalty), {}, std::move(form));
}

DualModel put_premium_model(const FilteredSpace& space, double gamma, int dictionary_leaves) {
  std::vector<NodeValues> g;
  for (int t = 0; t <= space.horizon(); ++t) g.push_back(NodeValues::Constant(space.atom_count(t), gamma));
  return put_premium_model(space, g, dictionary_leaves);
}

DualModel build_rectangular_model(const RectangularSpec& spec) {
  const FilteredSpace space = build_tree(spec.tree);
  const int T = space.horizon();
  if (static_cast<int>(spec.kernels.size()) != T || static_cast<int>(spec.node_penalty.size()) != T)
    throw Error(Errc::InvalidModel, "kernels and penalties needed for levels 0..T-1");
  if (spec.discount_sequences.empty()) throw Error(Errc::InvalidModel, "no discount sequence");

  struct Node {
    int t;
    Index a;
    std::size_t choices;
  };
  std::vector<Node> nodes;
  for (int t = 0; t < T; ++t) {
    const auto& level = spec.kernels[static_cast<std::size_t>(t)];
    if (static_cast<Index>(level.size()) != space.atom_count(t) ||
        spec.node_penalty[static_cast<std::size_t>(t)].size() != level.size())
      throw Error(Errc::InvalidModel, "level " + std::to_string(t) + " needs one kernel list per atom");
    for (Index a = 0; a < space.atom_count(t); ++a) {
      const auto& ks = level[static_cast<std::size_t>(a)];
      const auto [first, last] = space.children(t, a);
      if (ks.empty() || spec.node_penalty[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)].size() != ks.size())
        throw Error(Errc::InvalidModel, "every node needs kernels with matching penalties");
      for (const auto& k : ks)
        if (k.size() != last - first || !(k.array() > 0.0).all() || std::abs(k.sum() - 1.0) > kDefaultTol)
          throw Error(Errc::InvalidModel, "kernel at level " + std::to_string(t) + " is not a positive law");
      nodes.push_back({t, a, ks.size()});
    }
  }

  std::vector<DualPair> pairs;
  OneStepPenalties one_step;
  std::vector<std::size_t> choice(nodes.size(), 0);
  for (const auto& seq : spec.discount_sequences) {
    const NodeTable d = product_discount(space, seq);
    std::fill(choice.begin(), choice.end(), 0);
    while (true) {
      Vector q = Vector::Ones(space.leaves());
      std::vector<NodeValues> pi;
      for (int t = 0; t < T; ++t) pi.push_back(NodeValues::Zero(space.atom_count(t)));
      std::size_t n = 0;
      for (int t = 0; t < T; ++t)
        for (Index a = 0; a < space.atom_count(t); ++a, ++n) {
          const auto ct = static_cast<std::size_t>(t);
          const auto ca = static_cast<std::size_t>(a);
          const Vector& kernel = spec.kernels[ct][ca][choice[n]];
          pi[ct][a] = spec.node_penalty[ct][ca][choice[n]];
          const Atom atom = space.atoms(t)[ca];
          const Index first = space.children(t, a).first;
          for (Index l = atom.begin; l < atom.end; ++l) q[l] *= kernel[space.atom_of(t + 1, l) - first];
        }
      pairs.push_back({TreeMeasure::from_weights(space, q), d});
      one_step.push_back(std::move(pi));
      std::size_t i = 0;
      while (i < nodes.size() && ++choice[i] == nodes[i].choices) choice[i++] = 0;
      if (i == nodes.size()) break;
    }
  }
  PenaltyTerm penalty = build_cocycle_penalty(space, pairs, one_step);
  ModelOptions opts;
  opts.require_equivalent = true;
  return DualModel::create(space, std::move(pairs), std::move(penalty), opts);
}

RectangularSpec random_rectangular_spec(std::uint64_t seed, long max_pairs) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RectangularSpec spec;
  const int T = 2 + static_cast<int>(rng() % 2);
  spec.tree.horizon = T;

  // Preorder branching, redrawn until the tree is small enough.
  FilteredSpace space;
  while (true) {
    std::vector<int> branching;
    long leaves = 0;
    auto grow = [&](auto&& self, int depth) -> void {
      if (depth == T) {
        ++leaves;
        return;
      }
      const int b = unit(rng) < 0.7 ? 2 : 3;
      branching.push_back(b);
      for (int i = 0; i < b; ++i) self(self, depth + 1);
    };
    grow(grow, 0);
    if (leaves > 27) continue;
    Vector w(leaves);
    for (Index l = 0; l < w.size(); ++l) w[l] = 0.5 + unit(rng);
    spec.tree.branching = branching;
    spec.tree.weights = w / w.sum();
    space = build_tree(spec.tree);
    break;
  }

  std::vector<double> tail;
  for (int r = 1; r < T; ++r) tail.push_back(unit(rng) < 0.5 ? 1.0 : 0.5);
  std::vector<double> firsts = unit(rng) < 0.7 ? std::vector<double>{1.0, 0.5}
                                               : std::vector<double>{unit(rng) < 0.5 ? 1.0 : 0.5};
  for (double f : firsts) {
    std::vector<double> seq{f};
    seq.insert(seq.end(), tail.begin(), tail.end());
    spec.discount_sequences.push_back(seq);
  }

  std::vector<std::pair<int, Index>> nodes;
  std::vector<std::vector<int>> counts(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    counts[static_cast<std::size_t>(t)].assign(static_cast<std::size_t>(space.atom_count(t)), 1);
    for (Index a = 0; a < space.atom_count(t); ++a) nodes.emplace_back(t, a);
  }
  const long budget = std::max<long>(1, max_pairs / static_cast<long>(spec.discount_sequences.size()));
  long product = 1;
  std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
  for (std::size_t attempt = 0; attempt < 3 * nodes.size(); ++attempt) {
    const auto [t, a] = nodes[pick(rng)];
    int& c = counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)];
    if (c == 3 || product / c * (c + 1) > budget) continue;
    product = product / c * (c + 1);
    ++c;
  }

  spec.kernels.resize(static_cast<std::size_t>(T));
  spec.node_penalty.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t)
    for (Index a = 0; a < space.atom_count(t); ++a) {
      const auto [first, last] = space.children(t, a);
      std::vector<Vector> ks;
      std::vector<double> pen;
      for (int j = 0; j < counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)]; ++j) {
        Vector k(last - first);
        for (Index i = 0; i < k.size(); ++i) k[i] = 0.2 + 0.8 * unit(rng);
        ks.push_back(k / k.sum());
        pen.push_back(unit(rng));
      }
      const double low = *std::min_element(pen.begin(), pen.end());
      for (double& v : pen) v -= low;
      spec.kernels[static_cast<std::size_t>(t)].push_back(std::move(ks));
      spec.node_penalty[static_cast<std::size_t>(t)].push_back(std::move(pen));
    }
  return spec;
}

namespace {

RectangularSpec binary_grid_spec(std::vector<std::vector<double>> sequences, bool penalised) {
  RectangularSpec spec;
  spec.tree = uniform_tree_spec(2, 2);
  spec.discount_sequences = std::move(sequences);
  const double grid[] = {1.0 / 3.0, 0.5, 2.0 / 3.0};
  spec.kernels.resize(2);
  spec.node_penalty.resize(2);
  for (int t = 0; t < 2; ++t)
    for (int a = 0; a < (t == 0 ? 1 : 2); ++a) {
      std::vector<Vector> ks;
      std::vector<double> pen;
      for (double p : grid) {
        Vector k(2);
        k << p, 1.0 - p;
        ks.push_back(k);
        pen.push_back(penalised ? std::abs(p - 0.5) : 0.0);
      }
      spec.kernels[static_cast<std::size_t>(t)].push_back(std::move(ks));
      spec.node_penalty[static_cast<std::size_t>(t)].push_back(std::move(pen));
    }
  return spec;
}

}  // namespace

RectangularSpec coherent_grid_spec() { return binary_grid_spec({{1.0, 1.0}}, false); }
DualModel coherent_grid_model() { return build_rectangular_model(coherent_grid_spec()); }

RectangularSpec discounted_cocycle_spec() { return binary_grid_spec({{1.0, 0.5}, {0.5, 0.5}}, true); }
DualModel discounted_cocycle_model() { return build_rectangular_model(discounted_cocycle_spec()); }

DualModel perturb_penalty(const DualModel& model, Index pair, int s, int u, double delta) {
  if (pair < 0 || pair >= model.pair_count()) throw Error(Errc::InvalidModel, "pair index out of range");
  PenaltyTerm penalty = model.penalty();
  penalty[static_cast<std::size_t>(pair)].at(s, u)[0] += delta;
  ModelOptions opts = model.options();
  opts.normalization = Normalization::Skip;
  return DualModel::create(model.space(), model.pairs(), std::move(penalty), opts, model.closed_form());
}

Index root_argmax_pair(const DualModel& model, const RandomVariable& x) {
  Index arg = 0;
  model.pair_values(x, 0, model.horizon()).col(0).maxCoeff(&arg);
  return arg;
}

DualModel broken_cocycle_model() {
  const DualModel base = discounted_cocycle_model();
  const RandomVariable x = RandomVariable::Constant(base.space().leaves(), -1.0);
  return perturb_penalty(base, root_argmax_pair(base, x), 0, 2, 0.05);
}

DualModel broken_weak_model() {
  const FilteredSpace space = binary_tree();
  Vector q2(4);
  q2 << 0.4, 0.1, 0.15, 0.35;
  std::vector<DualPair> pairs{{TreeMeasure::reference(space), constant_table(space, 1.0, 1.0)},
                              {TreeMeasure::from_weights(space, q2), constant_table(space, 1.0, 1.0)}};
  PenaltyTerm penalty{constant_table(space, 0.0, 0.0), constant_table(space, 0.0, 0.0)};
  penalty[0].at(0, 2) = NodeValues::Constant(1, kInf);
  penalty[1].at(1, 2) = NodeValues::Constant(2, kInf);
  return DualModel::create(space, std::move(pairs), std::move(penalty));
}

DualDictionary two_pair_dictionary() {
  const FilteredSpace space = binary_tree();
  Vector q(4);
  q << 0.5, 0.0, 0.25, 0.25;
  std::vector<DualEntry> entries{{{1.0, TreeMeasure::reference(space), true}, 0.0},
                                 {{0.5, TreeMeasure::from_weights(space, q), true}, 0.1}};
  return DualDictionary::create(space, std::move(entries));
}

DualModel two_pair_model() {
  const FilteredSpace space = binary_tree();
  const DualDictionary dict = two_pair_dictionary();
  std::vector<DualPair> pairs;
  PenaltyTerm penalty;
  for (const auto& e : dict.entries()) {
    pairs.push_back({e.mu.q, constant_table(space, 1.0, e.mu.a)});
    penalty.push_back(constant_table(space, 0.0, e.penalty));
  }
  return DualModel::create(space, std::move(pairs), std::move(penalty));
}

std::vector<ZooEntry> fixture_zoo() {
  std::vector<ZooEntry> zoo;
  auto add = [&](std::string name, DualModel m, bool strong) {
    const bool normalized = penalty_normalized(m);
    zoo.push_back({std::move(name), std::move(m), strong, normalized});
  };
  add("cond_expectation", conditional_expectation_model(binary_tree()), true);
  add("coherent_grid", coherent_grid_model(), true);
  add("discounted_cocycle", discounted_cocycle_model(), true);
  add("put_premium", put_premium_model(binary_tree(), 2.0), false);
  add("two_pair", two_pair_model(), false);
  add("broken_cocycle", broken_cocycle_model(), false);
  add("broken_weak", broken_weak_model(), false);
  return zoo;
}

}  // namespace risktree
