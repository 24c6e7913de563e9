#include "risktree/tree.hpp"

#include <cmath>
#include <string>

namespace risktree {

namespace {

struct Builder {
  const TreeSpec& spec;
  std::size_t next = 0;
  Index leaves = 0;
  std::vector<std::vector<Atom>> atoms;
  std::vector<std::vector<std::pair<Index, Index>>> children;

  void visit(int depth) {
    Atom atom{leaves, leaves};
    if (depth == spec.horizon) {
      atom.end = ++leaves;
      atoms[depth].push_back(atom);
      return;
    }
    if (next >= spec.branching.size())
      throw Error(Errc::InvalidTree, "branching list ends before the tree is complete");
    const int b = spec.branching[next++];
    if (b < 1)
      throw Error(Errc::InvalidTree, "branching count " + std::to_string(b) + " is below 1");
    const auto slot = atoms[depth].size();
    atoms[depth].push_back(atom);
    children[depth].emplace_back(0, 0);
    const auto first = static_cast<Index>(atoms[depth + 1].size());
    for (int k = 0; k < b; ++k) visit(depth + 1);
    atoms[depth][slot].end = leaves;
    children[depth][slot] = {first, static_cast<Index>(atoms[depth + 1].size())};
  }
};

}  // namespace

FilteredSpace FilteredSpace::build(const TreeSpec& spec) {
  if (spec.horizon < 1) throw Error(Errc::InvalidTree, "horizon must be at least 1");
  if (spec.branching.empty() || spec.weights.size() == 0)
    throw Error(Errc::EmptyTree, "tree has no nodes or no weights");

  Builder b{spec, 0, 0, {}, {}};
  b.atoms.resize(spec.horizon + 1);
  b.children.resize(spec.horizon + 1);
  b.visit(0);
  if (b.next != spec.branching.size())
    throw Error(Errc::InvalidTree, "branching list has " +
                                       std::to_string(spec.branching.size() - b.next) +
                                       " unused entries");
  if (spec.weights.size() != b.leaves)
    throw Error(Errc::InvalidTree, "tree has " + std::to_string(b.leaves) + " leaves but " +
                                       std::to_string(spec.weights.size()) + " weights");
  for (Index i = 0; i < spec.weights.size(); ++i) {
    if (!(spec.weights[i] > 0.0) || !std::isfinite(spec.weights[i]))
      throw Error(Errc::NonPositiveWeight, "weight of leaf " + std::to_string(i) + " is not positive");
  }
  const double total = spec.weights.sum();
  if (std::abs(total - 1.0) > 1e-9)
    throw Error(Errc::WeightsDoNotSumToOne, "weights sum to " + std::to_string(total));

  FilteredSpace s;
  s.horizon_ = spec.horizon;
  s.p_ = std::abs(total - 1.0) > 1e-12 ? Vector(spec.weights / total) : spec.weights;
  s.spec_ = spec;
  s.spec_.weights = s.p_;
  s.atoms_ = std::move(b.atoms);
  s.children_ = std::move(b.children);
  s.atom_of_.resize(spec.horizon + 1);
  s.atom_p_.resize(spec.horizon + 1);
  for (int t = 0; t <= spec.horizon; ++t) {
    auto& owner = s.atom_of_[t];
    owner.resize(b.leaves);
    NodeValues mass(static_cast<Index>(s.atoms_[t].size()));
    for (std::size_t a = 0; a < s.atoms_[t].size(); ++a) {
      const Atom& atom = s.atoms_[t][a];
      for (Index l = atom.begin; l < atom.end; ++l) owner[l] = static_cast<Index>(a);
      mass[static_cast<Index>(a)] = s.p_.segment(atom.begin, atom.size()).sum();
    }
    s.atom_p_[t] = mass;
  }
  return s;
}

std::span<const Atom> FilteredSpace::atoms(int t) const {
  check_time(*this, t);
  return atoms_[t];
}

Index FilteredSpace::atom_of(int t, Index leaf) const {
  check_time(*this, t);
  return atom_of_[t][leaf];
}

std::pair<Index, Index> FilteredSpace::children(int t, Index a) const {
  if (t < 0 || t >= horizon_) throw Error(Errc::TimeOrderViolation, "no children at level " + std::to_string(t));
  return children_[t][a];
}

const NodeValues& FilteredSpace::atom_probabilities(int t) const {
  check_time(*this, t);
  return atom_p_[t];
}

TreeSpec uniform_tree_spec(int horizon, int branching) {
  TreeSpec spec;
  spec.horizon = horizon;
  Index internal = 0;
  Index level = 1;
  for (int t = 0; t < horizon; ++t) {
    internal += level;
    level *= branching;
  }
  spec.branching.assign(static_cast<std::size_t>(internal), branching);
  spec.weights = Vector::Constant(level, 1.0 / static_cast<double>(level));
  return spec;
}

void check_time(const FilteredSpace& space, int t) {
  if (t < 0 || t > space.horizon())
    throw Error(Errc::TimeOrderViolation,
                "time " + std::to_string(t) + " outside 0.." + std::to_string(space.horizon()));
}

void check_size(const FilteredSpace& space, const Vector& x, const char* what) {
  if (x.size() != space.leaves())
    throw Error(Errc::SpaceMismatch, std::string(what) + " has " + std::to_string(x.size()) +
                                         " entries, space has " + std::to_string(space.leaves()) +
                                         " leaves");
}

RandomVariable lift(const FilteredSpace& space, int t, const NodeValues& values) {
  const auto atoms = space.atoms(t);
  if (values.size() != static_cast<Index>(atoms.size()))
    throw Error(Errc::SpaceMismatch, "node value count does not match atoms at level " + std::to_string(t));
  RandomVariable x(space.leaves());
  for (std::size_t a = 0; a < atoms.size(); ++a)
    x.segment(atoms[a].begin, atoms[a].size()).setConstant(values[static_cast<Index>(a)]);
  return x;
}

NodeValues restrict_to(const FilteredSpace& space, int t, const RandomVariable& x) {
  check_size(space, x, "random variable");
  const auto atoms = space.atoms(t);
  NodeValues v(static_cast<Index>(atoms.size()));
  for (std::size_t a = 0; a < atoms.size(); ++a) v[static_cast<Index>(a)] = x[atoms[a].begin];
  return v;
}

bool is_measurable(const FilteredSpace& space, const RandomVariable& x, int t, double tol) {
  check_size(space, x, "random variable");
  for (const Atom& atom : space.atoms(t)) {
    const auto seg = x.segment(atom.begin, atom.size());
    if (seg.maxCoeff() - seg.minCoeff() > tol) return false;
  }
  return true;
}

int measurability_level(const FilteredSpace& space, const RandomVariable& x, double tol) {
  for (int t = 0; t < space.horizon(); ++t)
    if (is_measurable(space, x, t, tol)) return t;
  return space.horizon();
}

bool is_measurable_event(const FilteredSpace& space, const LeafMask& event, int t) {
  if (event.size() != space.leaves()) throw Error(Errc::SpaceMismatch, "event size does not match leaves");
  for (const Atom& atom : space.atoms(t)) {
    const auto seg = event.segment(atom.begin, atom.size());
    if (seg.any() && !seg.all()) return false;
  }
  return true;
}

TreeMeasure TreeMeasure::from_weights(const FilteredSpace& space, Vector q) {
  check_size(space, q, "measure");
  for (Index i = 0; i < q.size(); ++i)
    if (!(q[i] >= 0.0) || !std::isfinite(q[i]))
      throw Error(Errc::InvalidMeasure, "weight of leaf " + std::to_string(i) + " is negative or not finite");
  const double total = q.sum();
  if (std::abs(total - 1.0) > 1e-9)
    throw Error(Errc::InvalidMeasure, "measure weights sum to " + std::to_string(total));
  if (std::abs(total - 1.0) > 1e-12) q /= total;
  return TreeMeasure(std::move(q));
}

TreeMeasure TreeMeasure::reference(const FilteredSpace& space) { return TreeMeasure(space.p()); }

int TreeMeasure::reduces_to_p_at(const FilteredSpace& space, double tol) const {
  int best = 0;
  for (int t = 1; t <= space.horizon(); ++t) {
    const NodeValues diff = atom_masses(space, q_, t) - space.atom_probabilities(t);
    if (diff.cwiseAbs().maxCoeff() > tol) break;
    best = t;
  }
  return best;
}

NodeValues atom_masses(const FilteredSpace& space, const Vector& q, int t) {
  check_size(space, q, "measure");
  const auto atoms = space.atoms(t);
  NodeValues m(static_cast<Index>(atoms.size()));
  for (std::size_t a = 0; a < atoms.size(); ++a)
    m[static_cast<Index>(a)] = q.segment(atoms[a].begin, atoms[a].size()).sum();
  return m;
}

Vector conditional_weights(const FilteredSpace& space, const Vector& q, int t) {
  check_size(space, q, "measure");
  Vector w(q.size());
  const Vector& p = space.p();
  for (const Atom& atom : space.atoms(t)) {
    const double mass = q.segment(atom.begin, atom.size()).sum();
    if (mass > 0.0) {
      w.segment(atom.begin, atom.size()) = q.segment(atom.begin, atom.size()) / mass;
    } else {
      const auto pa = p.segment(atom.begin, atom.size());
      w.segment(atom.begin, atom.size()) = pa / pa.sum();
    }
  }
  return w;
}

NodeValues conditional_expectation_nodes(const FilteredSpace& space, const RandomVariable& x,
                                         const Vector& q, int t) {
  check_size(space, x, "random variable");
  const Vector w = conditional_weights(space, q, t);
  const auto atoms = space.atoms(t);
  NodeValues v(static_cast<Index>(atoms.size()));
  for (std::size_t a = 0; a < atoms.size(); ++a)
    v[static_cast<Index>(a)] =
        w.segment(atoms[a].begin, atoms[a].size()).dot(x.segment(atoms[a].begin, atoms[a].size()));
  return v;
}

RandomVariable conditional_expectation(const FilteredSpace& space, const RandomVariable& x,
                                       const TreeMeasure& q, int t) {
  return lift(space, t, conditional_expectation_nodes(space, x, q.weights(), t));
}

RandomVariable nodewise_max(const FilteredSpace& space, std::span<const RandomVariable> family, int t) {
  if (family.empty()) throw Error(Errc::EmptyFamily, "nodewise maximum of an empty family");
  RandomVariable out = family.front();
  check_size(space, out, "family member");
  for (const auto& member : family) {
    if (!is_measurable(space, member, t))
      throw Error(Errc::NotMeasurable, "family member is not measurable at level " + std::to_string(t));
    check_size(space, member, "family member");
    out = out.cwiseMax(member);
  }
  return out;
}

RandomVariable density_process(const FilteredSpace& space, const TreeMeasure& q, int t) {
  check_size(space, q.weights(), "measure");
  const NodeValues ratio =
      atom_masses(space, q.weights(), t).cwiseQuotient(space.atom_probabilities(t));
  return lift(space, t, ratio);
}

}  // namespace risktree
