#include "risktree/structure.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <unordered_map>

namespace risktree {

namespace {

/// Leaf vector whose value at omega is the sum of v over A_t(omega).
Vector group_sum(const FilteredSpace& space, const Vector& v, int t) {
  return lift(space, t, atom_masses(space, v, t));
}

LeafMask atom_mask(const FilteredSpace& space, int t, const NodeValues& charged) {
  return lift(space, t, charged).array() > 0.0;
}

double masked_gap(const Vector& a, const Vector& b, const LeafMask& mask) {
  double g = 0.0;
  for (Index l = 0; l < a.size(); ++l)
    if (mask[l]) g = std::max(g, std::abs(a[l] - b[l]));
  return g;
}

void check_order(const FilteredSpace& space, int s, int t) {
  check_time(space, s);
  check_time(space, t);
  if (s > t) throw Error(Errc::TimeOrderViolation, "need s <= t");
}

}  // namespace

TreeMeasure paste_measures(const FilteredSpace& space, const TreeMeasure& q1, const TreeMeasure& q2, int s, int t) {
  check_order(space, s, t);
  check_size(space, q1.weights(), "first measure");
  check_size(space, q2.weights(), "second measure");
  const Vector pasted = group_sum(space, q1.weights(), t).cwiseProduct(conditional_weights(space, q2.weights(), t));
  return TreeMeasure::from_weights(space, pasted);
}

double pasting_identity_gap(const FilteredSpace& space, const TreeMeasure& q1, const TreeMeasure& q2, int s,
                            int t, const TreeMeasure& pasted) {
  const Vector lhs = conditional_weights(space, pasted.weights(), s);
  const Vector rhs = group_sum(space, conditional_weights(space, q1.weights(), s), t)
                         .cwiseProduct(conditional_weights(space, q2.weights(), t));
  return masked_gap(lhs, rhs, atom_mask(space, s, atom_masses(space, q1.weights(), s)));
}

TreeMeasure bifurcate_measures(const FilteredSpace& space, const TreeMeasure& q1, const TreeMeasure& q2,
                               const LeafMask& event, int s) {
  if (!is_measurable_event(space, event, s))
    throw Error(Errc::NotMeasurableEvent, "event is not a union of atoms at level " + std::to_string(s));
  const NodeValues m1 = atom_masses(space, q1.weights(), s);
  const NodeValues m2 = atom_masses(space, q2.weights(), s);
  const NodeValues on_a = restrict_to(space, s, event.cast<double>().matrix());
  NodeValues marginal = on_a.cwiseProduct(m1) + (NodeValues::Ones(on_a.size()) - on_a).cwiseProduct(m2);
  if (!(marginal.sum() > 0.0)) marginal = space.atom_probabilities(s);
  marginal /= marginal.sum();
  const Vector w1 = conditional_weights(space, q1.weights(), s);
  const Vector w2 = conditional_weights(space, q2.weights(), s);
  Vector out(space.leaves());
  const Vector lifted = lift(space, s, marginal);
  for (Index l = 0; l < out.size(); ++l) out[l] = lifted[l] * (event[l] ? w1[l] : w2[l]);
  return TreeMeasure::from_weights(space, out);
}

double bifurcation_identity_gap(const FilteredSpace& space, const TreeMeasure& q1, const TreeMeasure& q2,
                                const LeafMask& event, int s, const TreeMeasure& spliced) {
  const Vector lhs = conditional_weights(space, spliced.weights(), s);
  const Vector w1 = conditional_weights(space, q1.weights(), s);
  const Vector w2 = conditional_weights(space, q2.weights(), s);
  Vector rhs(lhs.size());
  for (Index l = 0; l < rhs.size(); ++l) rhs[l] = event[l] ? w1[l] : w2[l];
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

RandomVariable bifurcate_discounts(const FilteredSpace& space, const NodeTable& d1, const NodeTable& d2,
                                   const LeafMask& event, int s, int t) {
  check_order(space, s, t);
  if (!is_measurable_event(space, event, s))
    throw Error(Errc::NotMeasurableEvent, "event is not a union of atoms at level " + std::to_string(s));
  const Vector a = lift(space, s, d1.at(s, t));
  const Vector b = lift(space, s, d2.at(s, t));
  Vector out(a.size());
  for (Index l = 0; l < out.size(); ++l) out[l] = event[l] ? a[l] : b[l];
  return out;
}

namespace {

/// Leaf-level right-hand side of the joint pasting identity, before the
/// summation over atoms of level u.
Vector joint_target_leaves(const FilteredSpace& space, const NodeValues& d1_st, const Vector& w1_s,
                           const NodeValues& d2_tu, const Vector& w2_t, int s, int t) {
  return lift(space, s, d1_st)
      .cwiseProduct(group_sum(space, w1_s, t))
      .cwiseProduct(lift(space, t, d2_tu))
      .cwiseProduct(w2_t);
}

}  // namespace

JointPaste joint_paste(const FilteredSpace& space, const NodeTable& d1, const TreeMeasure& q1, const NodeTable& d2,
                       const TreeMeasure& q2, int s, int t, int u) {
  check_order(space, s, t);
  check_order(space, t, u);
  const TreeMeasure hat = paste_measures(space, q1, q2, s, t);
  const Vector d2_leaf = lift(space, t, d2.at(t, u));
  const NodeValues w = conditional_expectation_nodes(space, d2_leaf, q1.weights(), s);
  const Vector w_leaf = lift(space, s, w);
  Vector q(space.leaves());
  for (Index l = 0; l < q.size(); ++l)
    q[l] = w_leaf[l] > 0.0 ? hat.weights()[l] * d2_leaf[l] / w_leaf[l] : hat.weights()[l];
  JointPaste out;
  out.discount = d1.at(s, t).cwiseProduct(w);
  if ((out.discount.array() < 0.0).any() || (out.discount.array() > 1.0 + kConstructionTol).any())
    throw Error(Errc::FactorOutOfRange, "joint pasting discount leaves [0, 1]");
  out.discount = out.discount.cwiseMin(1.0);
  out.q = TreeMeasure::from_weights(space, q);
  return out;
}

double joint_paste_identity_gap(const FilteredSpace& space, const NodeTable& d1, const TreeMeasure& q1,
                                const NodeTable& d2, const TreeMeasure& q2, int s, int t, int u,
                                const JointPaste& result) {
  const Vector lhs = lift(space, s, result.discount).cwiseProduct(conditional_weights(space, result.q.weights(), s));
  const Vector rhs = joint_target_leaves(space, d1.at(s, t), conditional_weights(space, q1.weights(), s),
                                         d2.at(t, u), conditional_weights(space, q2.weights(), t), s, t);
  const LeafMask mask = atom_mask(space, s, atom_masses(space, q1.weights(), s));
  return masked_gap(group_sum(space, lhs, u), group_sum(space, rhs, u), mask);
}

NodeTable product_discount(const FilteredSpace& space, const std::vector<double>& factors) {
  const int T = space.horizon();
  if (static_cast<int>(factors.size()) != T)
    throw Error(Errc::InvalidModel, "need one discount factor per period");
  for (double f : factors)
    if (!(f >= 0.0 && f <= 1.0)) throw Error(Errc::FactorOutOfRange, "discount factor outside [0, 1]");
  NodeTable d(T);
  for (int t = 0; t <= T; ++t) {
    double prod = 1.0;
    for (int u = t; u <= T; ++u) {
      d.at(t, u) = NodeValues::Constant(space.atom_count(t), prod);
      if (u < T) prod *= factors[static_cast<std::size_t>(u)];
    }
  }
  return d;
}

namespace {

/// E_Q[D_{s,t} c | F_s] for node values c at level t, with 0 * inf = 0.
NodeValues discounted_expectation(const FilteredSpace& space, const Vector& cond_s, const NodeValues& d_st,
                                  const NodeValues& c_t, int s, int t) {
  const NodeValues law = atom_masses(space, cond_s, t);  // Q(B | A_s(B))
  NodeValues out = NodeValues::Zero(space.atom_count(s));
  const auto atoms_t = space.atoms(t);
  for (std::size_t b = 0; b < atoms_t.size(); ++b) {
    const auto bi = static_cast<Index>(b);
    const Index a = space.atom_of(s, atoms_t[b].begin);
    const double weight = d_st[a] * law[bi];
    if (weight == 0.0) continue;
    out[a] += weight * c_t[bi];
  }
  return out;
}

}  // namespace

PenaltyTerm build_cocycle_penalty(const FilteredSpace& space, const std::vector<DualPair>& pairs,
                                  const OneStepPenalties& one_step) {
  const int T = space.horizon();
  if (one_step.size() != pairs.size()) throw Error(Errc::InvalidModel, "one-step penalties per pair expected");
  PenaltyTerm out;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (static_cast<int>(one_step[k].size()) != T)
      throw Error(Errc::InvalidModel, "one-step penalties needed for levels 0..T-1");
    for (int t = 0; t < T; ++t) {
      const auto& pi = one_step[k][static_cast<std::size_t>(t)];
      if (pi.size() != space.atom_count(t)) throw Error(Errc::SpaceMismatch, "one-step penalty has wrong size");
      for (Index a = 0; a < pi.size(); ++a)
        if (std::isnan(pi[a]) || pi[a] < 0.0) throw Error(Errc::InvalidModel, "one-step penalty must be >= 0");
    }
    NodeTable c(T);
    for (int t = 0; t <= T; ++t) c.at(t, t) = NodeValues::Zero(space.atom_count(t));
    for (int u = 1; u <= T; ++u)
      for (int t = u - 1; t >= 0; --t) {
        const Vector cond = conditional_weights(space, pairs[k].q.weights(), t);
        c.at(t, u) = one_step[k][static_cast<std::size_t>(t)] +
                     discounted_expectation(space, cond, pairs[k].discount.at(t, t + 1), c.at(t + 1, u), t, t + 1);
      }
    out.push_back(std::move(c));
  }
  return out;
}

ConsistencyReport check_cocycle(const DualModel& model, const std::vector<std::array<int, 3>>& triples, double tol) {
  const FilteredSpace& space = model.space();
  const int T = space.horizon();
  std::vector<std::array<int, 3>> all = triples;
  if (all.empty())
    for (int s = 0; s <= T; ++s)
      for (int t = s; t <= T; ++t)
        for (int u = t; u <= T; ++u) all.push_back({s, t, u});
  CheckResult c;
  c.name = "cocycle";
  c.tolerance = tol;
  for (const auto& [s, t, u] : all) {
    if (!(0 <= s && s <= t && t <= u && u <= T)) throw Error(Errc::TimeOrderViolation, "cocycle triple not ordered");
    const std::string scope = triple_label(s, t, u);
    for (Index k = 0; k < model.pair_count(); ++k) {
      const auto& pair = model.pairs()[static_cast<std::size_t>(k)];
      const auto& pen = model.penalty()[static_cast<std::size_t>(k)];
      const Vector cond = model.conditional_kernel(s).row(k).transpose();
      const NodeValues rhs =
          pen.at(s, t) + discounted_expectation(space, cond, pair.discount.at(s, t), pen.at(t, u), s, t);
      const NodeValues& lhs = pen.at(s, u);
      double worst = 0.0;
      Index where = 0;
      for (Index a = 0; a < lhs.size(); ++a) {
        double v;
        if (std::isinf(lhs[a]) || std::isinf(rhs[a]))
          v = std::isinf(lhs[a]) && std::isinf(rhs[a]) ? 0.0 : kInf;
        else
          v = std::abs(lhs[a] - rhs[a]);
        if (v > worst) {
          worst = v;
          where = a;
        }
      }
      c.record(scope, worst, {"pair#" + std::to_string(k) + "/atom#" + std::to_string(where), {}});
      ++c.tested;
    }
  }
  c.non_vacuous = c.tested;
  ConsistencyReport r;
  r.add(std::move(c));
  r.canonicalize();
  return r;
}

namespace {

/// Hash index over real vectors with a tolerant lookup.
class KeyIndex {
 public:
  explicit KeyIndex(double quantum = 1e-9) : quantum_(quantum) {}

  void add(Vector key) {
    buckets_[hash(key)].push_back(static_cast<long>(keys_.size()));
    keys_.push_back(std::move(key));
  }

  const Vector& key(long i) const { return keys_[static_cast<std::size_t>(i)]; }
  long size() const { return static_cast<long>(keys_.size()); }

  /// Index of a key within `tol` of v (max norm), or -1. With `scan`, a miss
  /// falls back to a full scan and reports the nearest distance in *gap.
  long find(const Vector& v, double tol, bool scan, double* gap = nullptr) const {
    auto it = buckets_.find(hash(v));
    if (it != buckets_.end())
      for (long i : it->second)
        if (keys_[static_cast<std::size_t>(i)].size() == v.size()) {
          const double d = (keys_[static_cast<std::size_t>(i)] - v).cwiseAbs().maxCoeff();
          if (d <= tol) {
            if (gap) *gap = d;
            return i;
          }
        }
    if (!scan) {
      if (gap) *gap = kInf;
      return -1;
    }
    double best = kInf;
    long arg = -1;
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      if (keys_[i].size() != v.size()) continue;
      const double d = (keys_[i] - v).cwiseAbs().maxCoeff();
      if (d < best) {
        best = d;
        arg = static_cast<long>(i);
      }
    }
    if (gap) *gap = best;
    return best <= tol ? arg : -1;
  }

 private:
  std::size_t hash(const Vector& v) const {
    std::size_t h = static_cast<std::size_t>(v.size());
    for (Index i = 0; i < v.size(); ++i) {
      const long long q = std::llround(v[i] / quantum_);
      h ^= std::hash<long long>{}(q) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }

  double quantum_;
  std::vector<Vector> keys_;
  std::unordered_map<std::size_t, std::vector<long>> buckets_;
};

constexpr long kScanLimit = 64;

/// Per-pair key D_{s,u}(A_s) Q(B | A_s) over atoms B of level u.
Vector joint_key(const DualModel& model, Index k, int s, int u) {
  const FilteredSpace& space = model.space();
  const Vector leaf = lift(space, s, model.pairs()[static_cast<std::size_t>(k)].discount.at(s, u))
                          .cwiseProduct(model.conditional_kernel(s).row(k).transpose());
  return atom_masses(space, leaf, u);
}

Vector pasting_target(const DualModel& model, Index k1, Index k2, int s, int t) {
  const FilteredSpace& space = model.space();
  return group_sum(space, model.conditional_kernel(s).row(k1).transpose(), t)
      .cwiseProduct(model.conditional_kernel(t).row(k2).transpose());
}

Vector joint_target(const DualModel& model, Index k1, Index k2, int s, int t, int u) {
  const FilteredSpace& space = model.space();
  const auto& p1 = model.pairs()[static_cast<std::size_t>(k1)];
  const auto& p2 = model.pairs()[static_cast<std::size_t>(k2)];
  const Vector leaves = joint_target_leaves(space, p1.discount.at(s, t), model.conditional_kernel(s).row(k1).transpose(),
                                            p2.discount.at(t, u), model.conditional_kernel(t).row(k2).transpose(), s, t);
  return atom_masses(space, leaves, u);
}

void fill_table(ClosureTable& table, const DualModel& model, const KeyIndex& index, const StructureOptions& opts,
                bool exhaustive, std::mt19937_64& rng,
                const std::function<Vector(Index, Index)>& target) {
  const Index P = model.pair_count();
  table.exhaustive = exhaustive;
  const long count = exhaustive ? static_cast<long>(P * P) : opts.samples;
  std::uniform_int_distribution<Index> pick(0, P - 1);
  table.witness.reserve(static_cast<std::size_t>(count));
  for (long e = 0; e < count; ++e) {
    Index a, b;
    if (exhaustive) {
      a = e / P;
      b = e % P;
    } else {
      a = pick(rng);
      b = pick(rng);
      table.sampled.emplace_back(a, b);
    }
    double gap = 0.0;
    const long w = index.find(target(a, b), opts.tol, table.missing < kScanLimit, &gap);
    table.witness.push_back(w);
    if (w < 0) {
      ++table.missing;
      if (std::isfinite(gap)) table.worst_gap = std::max(table.worst_gap, gap);
      else if (table.worst_gap == 0.0) table.worst_gap = kInf;
    } else {
      table.worst_gap = std::max(table.worst_gap, gap);
    }
  }
}

long count_distinct(const std::vector<Vector>& keys, double tol) {
  KeyIndex idx;
  for (const auto& k : keys)
    if (idx.find(k, tol, false) < 0 && idx.find(k, tol, true) < 0) idx.add(k);
  return idx.size();
}

}  // namespace

std::pair<Index, Index> ClosureTable::operands(std::size_t entry, Index pairs) const {
  if (!exhaustive) return sampled[entry];
  const auto e = static_cast<Index>(entry);
  return {e / pairs, e % pairs};
}

StructuredModel certify_structure(DualModel model, const StructureOptions& opts) {
  StructuredModel sm;
  sm.model = std::move(model);
  const DualModel& m = sm.model;
  if (!m.has_dictionary()) throw Error(Errc::Unsupported, "structure certification needs a pair dictionary");
  const FilteredSpace& space = m.space();
  const int T = space.horizon();
  const Index P = m.pair_count();
  std::mt19937_64 rng(opts.seed);

  // Pasting: nontrivial (s, t) with s < t < T.
  long paste_triples = 0;
  for (int s = 0; s < T; ++s) paste_triples += std::max(0, T - 1 - s);
  const bool paste_exhaustive = static_cast<double>(P) * P * paste_triples <= opts.exhaustive_budget;
  for (int s = 0; s + 1 < T; ++s) {
    KeyIndex index;
    for (Index k = 0; k < P; ++k) index.add(m.conditional_kernel(s).row(k).transpose());
    for (int t = s + 1; t < T; ++t) {
      ClosureTable table;
      table.condition = "pasting";
      table.s = s;
      table.t = t;
      table.u = T;
      fill_table(table, m, index, opts, paste_exhaustive, rng,
                 [&](Index a, Index b) { return pasting_target(m, a, b, s, t); });
      sm.pasting.push_back(std::move(table));
    }
  }

  // Joint pasting: s <= t <= u with s < u.
  long joint_triples = 0;
  for (int s = 0; s <= T; ++s)
    for (int u = s + 1; u <= T; ++u) joint_triples += u - s + 1;
  const bool joint_exhaustive = static_cast<double>(P) * P * joint_triples <= opts.exhaustive_budget;
  for (int s = 0; s < T; ++s)
    for (int u = s + 1; u <= T; ++u) {
      KeyIndex index;
      for (Index k = 0; k < P; ++k) index.add(joint_key(m, k, s, u));
      for (int t = s; t <= u; ++t) {
        ClosureTable table;
        table.condition = "joint-pasting";
        table.s = s;
        table.t = t;
        table.u = u;
        fill_table(table, m, index, opts, joint_exhaustive, rng,
                   [&](Index a, Index b) { return joint_target(m, a, b, s, t, u); });
        sm.joint_pasting.push_back(std::move(table));
      }
    }

  // Bifurcation certificates.
  for (int s = 0; s < T; ++s) {
    const auto atoms = space.atoms(s);
    std::vector<Vector> full;
    for (Index k = 0; k < P; ++k) full.push_back(m.conditional_kernel(s).row(k).transpose());
    ProductCertificate cert;
    cert.condition = "bifurcation-q";
    cert.s = s;
    cert.t = s;
    cert.distinct = count_distinct(full, opts.tol);
    cert.product = 1.0;
    for (const Atom& a : atoms) {
      std::vector<Vector> local;
      for (const auto& f : full) local.push_back(f.segment(a.begin, a.size()));
      cert.product *= static_cast<double>(count_distinct(local, opts.tol));
    }
    cert.pass = static_cast<double>(cert.distinct) == cert.product;
    sm.bifurcation.push_back(cert);

    for (int t = s + 1; t <= T; ++t) {
      std::vector<Vector> dfull;
      for (Index k = 0; k < P; ++k) dfull.push_back(m.pairs()[static_cast<std::size_t>(k)].discount.at(s, t));
      ProductCertificate dc;
      dc.condition = "bifurcation-d";
      dc.s = s;
      dc.t = t;
      dc.distinct = count_distinct(dfull, opts.tol);
      dc.product = 1.0;
      for (Index a = 0; a < space.atom_count(s); ++a) {
        std::vector<Vector> local;
        for (const auto& f : dfull) local.push_back(f.segment(a, 1));
        dc.product *= static_cast<double>(count_distinct(local, opts.tol));
      }
      dc.pass = static_cast<double>(dc.distinct) == dc.product;
      sm.bifurcation.push_back(dc);
    }
  }
  return sm;
}

double closure_entry_gap(const StructuredModel& sm, const ClosureTable& table, std::size_t entry) {
  const DualModel& m = sm.model;
  const long w = table.witness.at(entry);
  if (w < 0) return kInf;
  const auto [a, b] = table.operands(entry, m.pair_count());
  if (table.condition == "pasting") {
    // Re-derive through the pasting constructor, not the lookup key.
    const auto& space = m.space();
    const auto& q1 = m.pairs()[static_cast<std::size_t>(a)].q;
    const auto& q2 = m.pairs()[static_cast<std::size_t>(b)].q;
    const TreeMeasure pasted = paste_measures(space, q1, q2, table.s, table.t);
    const Vector lhs = conditional_weights(space, m.pairs()[static_cast<std::size_t>(w)].q.weights(), table.s);
    double gap = (lhs - pasting_target(m, a, b, table.s, table.t)).cwiseAbs().maxCoeff();
    gap = std::max(gap, pasting_identity_gap(space, q1, q2, table.s, table.t, pasted));
    return gap;
  }
  const auto& space = m.space();
  const auto& p1 = m.pairs()[static_cast<std::size_t>(a)];
  const auto& p2 = m.pairs()[static_cast<std::size_t>(b)];
  const JointPaste jp = joint_paste(space, p1.discount, p1.q, p2.discount, p2.q, table.s, table.t, table.u);
  double gap = joint_paste_identity_gap(space, p1.discount, p1.q, p2.discount, p2.q, table.s, table.t, table.u, jp);
  gap = std::max(gap, (joint_key(m, w, table.s, table.u) - joint_target(m, a, b, table.s, table.t, table.u))
                          .cwiseAbs()
                          .maxCoeff());
  return gap;
}

ConsistencyReport check_locality(const DualModel& model, double tol) {
  const FilteredSpace& space = model.space();
  const int T = space.horizon();
  CheckResult c;
  c.name = "locality";
  c.tolerance = tol;
  for (int s = 0; s <= T; ++s)
    for (int t = s; t <= T; ++t) {
      const std::string scope = "(" + std::to_string(s) + "," + std::to_string(t) + ")";
      const auto atoms = space.atoms(s);
      double worst = 0.0;
      std::string where = "none";
      for (std::size_t a = 0; a < atoms.size(); ++a) {
        const auto ai = static_cast<Index>(a);
        KeyIndex groups;
        std::vector<double> group_penalty;
        std::vector<Index> group_owner;
        for (Index k = 0; k < model.pair_count(); ++k) {
          const Vector cond = model.conditional_kernel(s).row(k).transpose();
          const NodeValues law = atom_masses(space, cond, t);
          // Restrict the law to atoms of level t inside atom a.
          std::vector<double> key{model.pairs()[static_cast<std::size_t>(k)].discount.at(s, t)[ai]};
          for (Index b = 0; b < law.size(); ++b)
            if (atoms[a].contains(space.atoms(t)[static_cast<std::size_t>(b)].begin)) key.push_back(law[b]);
          const Vector kv = Eigen::Map<Vector>(key.data(), static_cast<Index>(key.size()));
          const double pen = model.penalty()[static_cast<std::size_t>(k)].at(s, t)[ai];
          long g = groups.find(kv, 1e-12, true);
          if (g < 0) {
            groups.add(kv);
            group_penalty.push_back(pen);
            group_owner.push_back(k);
            continue;
          }
          const double ref = group_penalty[static_cast<std::size_t>(g)];
          double v;
          if (std::isinf(ref) || std::isinf(pen))
            v = std::isinf(ref) && std::isinf(pen) ? 0.0 : kInf;
          else
            v = std::abs(ref - pen);
          ++c.non_vacuous;
          if (v > worst) {
            worst = v;
            where = "pairs#" + std::to_string(group_owner[static_cast<std::size_t>(g)]) + "," + std::to_string(k) +
                    "/atom#" + std::to_string(a);
          }
        }
        c.tested += model.pair_count();
      }
      c.record(scope, worst, {where, {}});
    }
  ConsistencyReport r;
  r.add(std::move(c));
  r.canonicalize();
  return r;
}

ConsistencyReport theorem_conditions(const StructuredModel& sm, const CheckOptions& opts) {
  const DualModel& m = sm.model;
  const FilteredSpace& space = m.space();
  const int T = space.horizon();
  const Index P = m.pair_count();
  const double closure_tol = 1e-12;
  ConsistencyReport out;

  CheckResult qa;
  qa.name = "Qa-equivalent";
  qa.tolerance = 0.0;
  for (Index k = 0; k < P; ++k) {
    const double v = m.pairs()[static_cast<std::size_t>(k)].q.equivalent_to_p() ? 0.0 : 1.0;
    qa.record("pairs", v, {"pair#" + std::to_string(k), {}});
    ++qa.tested;
  }
  qa.non_vacuous = qa.tested;
  out.add(std::move(qa));

  auto closure_check = [&](const char* name, const std::vector<ClosureTable>& tables) {
    CheckResult c;
    c.name = name;
    c.tolerance = closure_tol;
    for (const auto& tb : tables) {
      std::string id = tb.missing ? std::to_string(tb.missing) + " missing" : "all realised";
      id += tb.exhaustive ? " (exhaustive)" : " (sampled)";
      c.record(triple_label(tb.s, tb.t, tb.u), tb.worst_gap, {id, {}});
      c.tested += static_cast<long>(tb.size());
    }
    c.non_vacuous = c.tested;
    if (tables.empty()) c.record("none", 0.0, {"no nontrivial instance", {}});
    out.add(std::move(c));
  };
  closure_check("Qb-pasting", sm.pasting);
  closure_check("QDa-joint-pasting", sm.joint_pasting);

  CheckResult qc, da;
  qc.name = "Qc-bifurcation";
  da.name = "Da-bifurcation";
  qc.tolerance = da.tolerance = 0.0;
  for (const auto& cert : sm.bifurcation) {
    CheckResult& c = cert.condition == "bifurcation-q" ? qc : da;
    const std::string scope = cert.condition == "bifurcation-q"
                                  ? "s=" + std::to_string(cert.s)
                                  : "(" + std::to_string(cert.s) + "," + std::to_string(cert.t) + ")";
    c.record(scope, std::max(0.0, cert.product - static_cast<double>(cert.distinct)),
             {std::to_string(cert.distinct) + " of " + std::to_string(static_cast<long>(cert.product)), {}});
    ++c.tested;
  }
  if (qc.scopes.empty()) qc.record("none", 0.0, {"horizon has no branching level", {}});
  if (da.scopes.empty()) da.record("none", 0.0, {"horizon has no branching level", {}});
  qc.non_vacuous = qc.tested;
  da.non_vacuous = da.tested;
  out.add(std::move(qc));
  out.add(std::move(da));

  CheckResult deg;
  deg.name = "QDa-degenerate";
  deg.tolerance = closure_tol;
  for (int s = 0; s <= T; ++s)
    for (int t = s; t <= T; ++t)
      for (int u = t; u <= T; ++u) {
        for (Index k = 0; k < P; ++k) {
          const double v = (joint_key(m, k, s, u) - joint_target(m, k, k, s, t, u)).cwiseAbs().maxCoeff();
          deg.record(triple_label(s, t, u), v, {"pair#" + std::to_string(k), {}});
          ++deg.tested;
        }
      }
  deg.non_vacuous = deg.tested;
  out.add(std::move(deg));

  CheckResult ca;
  ca.name = "Ca-penalty-type";
  ca.tolerance = 0.0;
  long bad = 0;
  for (const auto& table : m.penalty())
    for (int t = 0; t <= T; ++t)
      for (int u = t; u <= T; ++u) {
        const auto& c = table.at(t, u);
        for (Index a = 0; a < c.size(); ++a)
          if (std::isnan(c[a]) || c[a] < 0.0) ++bad;
        ++ca.tested;
      }
  ca.record("all", static_cast<double>(bad), {"node-valued tables", {}});
  ca.non_vacuous = ca.tested;
  out.add(std::move(ca));

  CheckResult product;
  product.name = "dual-set-product";
  product.tolerance = 0.0;
  {
    std::vector<Vector> qs, ds, both;
    for (Index k = 0; k < P; ++k) {
      const auto& pr = m.pairs()[static_cast<std::size_t>(k)];
      std::vector<double> flat;
      for (int t = 0; t <= T; ++t)
        for (int u = t; u <= T; ++u)
          for (Index a = 0; a < pr.discount.at(t, u).size(); ++a) flat.push_back(pr.discount.at(t, u)[a]);
      const Vector dv = Eigen::Map<Vector>(flat.data(), static_cast<Index>(flat.size()));
      qs.push_back(pr.q.weights());
      ds.push_back(dv);
      Vector joint(dv.size() + pr.q.size());
      joint << dv, pr.q.weights();
      both.push_back(joint);
    }
    const long nq = count_distinct(qs, closure_tol);
    const long nd = count_distinct(ds, closure_tol);
    const long nb = count_distinct(both, closure_tol);
    product.record("pairs", static_cast<double>(nq * nd - nb),
                   {std::to_string(nb) + " pairs, " + std::to_string(nd) + " discounts x " + std::to_string(nq) +
                        " measures",
                    {}});
    product.tested = 1;
    product.non_vacuous = 1;
  }
  out.add(std::move(product));

  ConsistencyReport locality = check_locality(m, opts.tol);
  locality.checks.front().name = "Cb-locality";
  out.merge(locality);
  ConsistencyReport cocycle = check_cocycle(m, {}, opts.tol);
  cocycle.checks.front().name = "Cc-cocycle";
  out.merge(cocycle);
  out.canonicalize();
  return out;
}

ConsistencyReport verify_theorem_tc(const StructuredModel& sm, const std::vector<RandomVariable>& battery,
                                    const CheckOptions& opts) {
  ConsistencyReport report = theorem_conditions(sm, opts);
  if (!report.pass()) {
    std::string failed;
    for (const auto& c : report.checks)
      if (!c.informational && !c.pass()) failed += (failed.empty() ? "" : ", ") + c.name;
    throw Error(Errc::PreconditionNotMet, "structural conditions fail: " + failed);
  }
  ConsistencyReport strong = check_strong_tc(sm.model, battery, opts);
  CheckResult prediction = strong.checks.front();
  prediction.name = "theorem-prediction";
  report.merge(strong);
  report.add(std::move(prediction));
  report.canonicalize();
  return report;
}

}  // namespace risktree
