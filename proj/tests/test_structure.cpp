#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "risktree/battery.hpp"
#include "risktree/structure.hpp"
#include "risktree/zoo.hpp"

using namespace risktree;
using testing::code_of;
using testing::max_abs;
using testing::vec;

namespace {

using Anc = std::vector<std::vector<int>>;

Vector indicator(Index n, Index l) {
  Vector e = Vector::Zero(n);
  e[l] = 1.0;
  return e;
}

/// Leaf vector of node values at level t.
Vector spread(const Anc& anc, const NodeValues& v, int t) {
  const auto& id = anc[static_cast<std::size_t>(t)];
  Vector out(static_cast<Index>(id.size()));
  for (std::size_t l = 0; l < id.size(); ++l) out[static_cast<Index>(l)] = v[id[l]];
  return out;
}

/// Leaves whose level-s atom carries Q1 mass.
std::vector<bool> charged(const Anc& anc, const Vector& q1, int s) {
  const auto& id = anc[static_cast<std::size_t>(s)];
  std::vector<double> mass(static_cast<std::size_t>(*std::max_element(id.begin(), id.end()) + 1), 0.0);
  for (std::size_t l = 0; l < id.size(); ++l) mass[static_cast<std::size_t>(id[l])] += q1[static_cast<Index>(l)];
  std::vector<bool> out(id.size());
  for (std::size_t l = 0; l < id.size(); ++l) out[l] = mass[static_cast<std::size_t>(id[l])] > 0;
  return out;
}

double masked(const Vector& a, const Vector& b, const std::vector<bool>& mask) {
  double g = 0;
  for (Index l = 0; l < a.size(); ++l)
    if (mask[static_cast<std::size_t>(l)]) g = std::max(g, std::abs(a[l] - b[l]));
  return g;
}

/// E_{Q*}[1_w|F_s] against E_{Q1}[E_{Q2}[1_w|F_t]|F_s] for every leaf w.
double pasting_oracle_gap(const FilteredSpace& s_, const Vector& q1, const Vector& q2, int s, int t, const Vector& qs) {
  const Anc anc = oracle::ancestors(s_.horizon(), s_.spec().branching);
  const auto mask = charged(anc, q1, s);
  double g = 0;
  for (Index l = 0; l < s_.leaves(); ++l) {
    const Vector e = indicator(s_.leaves(), l);
    const Vector lhs = oracle::cond_exp(anc, e, qs, s_.p(), s);
    const Vector rhs = oracle::cond_exp(anc, oracle::cond_exp(anc, e, q2, s_.p(), t), q1, s_.p(), s);
    g = std::max(g, masked(lhs, rhs, mask));
  }
  return g;
}

/// D*_{s,u} E_{Q*}[1_B|F_s] against D1_{s,t} E_{Q1}[D2_{t,u} E_{Q2}[1_B|F_t]|F_s] for atoms B of level u.
double joint_oracle_gap(const FilteredSpace& sp, const NodeTable& d1, const Vector& q1, const NodeTable& d2,
                        const Vector& q2, int s, int t, int u, const JointPaste& jp) {
  const Anc anc = oracle::ancestors(sp.horizon(), sp.spec().branching);
  const auto mask = charged(anc, q1, s);
  const auto& id = anc[static_cast<std::size_t>(u)];
  const int atoms = *std::max_element(id.begin(), id.end()) + 1;
  double g = 0;
  for (int b = 0; b < atoms; ++b) {
    Vector e(sp.leaves());
    for (Index l = 0; l < e.size(); ++l) e[l] = id[static_cast<std::size_t>(l)] == b ? 1.0 : 0.0;
    const Vector lhs = spread(anc, jp.discount, s).cwiseProduct(oracle::cond_exp(anc, e, jp.q.weights(), sp.p(), s));
    const Vector inner = spread(anc, d2.at(t, u), t).cwiseProduct(oracle::cond_exp(anc, e, q2, sp.p(), t));
    const Vector rhs = spread(anc, d1.at(s, t), s).cwiseProduct(oracle::cond_exp(anc, inner, q1, sp.p(), s));
    g = std::max(g, masked(lhs, rhs, mask));
  }
  return g;
}

/// E_{Q*}[1_w|F_s] against 1_A E_{Q1}[1_w|F_s] + 1_{A^c} E_{Q2}[1_w|F_s].
double bifurcation_oracle_gap(const FilteredSpace& sp, const Vector& q1, const Vector& q2, const LeafMask& ev, int s,
                              const Vector& qs) {
  const Anc anc = oracle::ancestors(sp.horizon(), sp.spec().branching);
  double g = 0;
  for (Index l = 0; l < sp.leaves(); ++l) {
    const Vector e = indicator(sp.leaves(), l);
    const Vector lhs = oracle::cond_exp(anc, e, qs, sp.p(), s);
    const Vector a = oracle::cond_exp(anc, e, q1, sp.p(), s);
    const Vector b = oracle::cond_exp(anc, e, q2, sp.p(), s);
    for (Index k = 0; k < lhs.size(); ++k) g = std::max(g, std::abs(lhs[k] - (ev[k] ? a[k] : b[k])));
  }
  return g;
}

Vector random_law(std::mt19937_64& rng, Index n, bool nulls) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector q = Vector::NullaryExpr(n, [&] { return nulls && unit(rng) < 0.25 ? 0.0 : 0.05 + unit(rng); });
  if (q.sum() == 0) q[0] = 1;
  return q / q.sum();
}

NodeTable random_adapted_discount(std::mt19937_64& rng, const FilteredSpace& s) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  NodeTable d(s.horizon());
  for (int t = 0; t <= s.horizon(); ++t)
    for (int u = t; u <= s.horizon(); ++u)
      d.at(t, u) = NodeValues::NullaryExpr(s.atom_count(t), [&] { return t == u ? 1.0 : unit(rng); });
  return d;
}

FilteredSpace three_period() {
  Vector w(9);
  w << 3, 1, 2, 2, 4, 1, 1, 3, 2;
  return build_tree({3, {2, 3, 2, 2, 1, 2, 2, 2}, w / w.sum()});
}

}  // namespace

TEST_CASE("pasting examples") {
  const FilteredSpace s = binary_tree();
  const TreeMeasure p = TreeMeasure::reference(s);
  const TreeMeasure q = TreeMeasure::from_weights(s, vec({0.5, 0, 0.25, 0.25}));
  CHECK(paste_measures(s, q, q, 0, 1).weights().isApprox(q.weights()));
  CHECK(paste_measures(s, p, q, 0, 1).weights().isApprox(q.weights()));
  const TreeMeasure pq = paste_measures(s, q, p, 0, 1);
  CHECK(pq.weights().isApprox(Vector::Constant(4, 0.25)));
  CHECK(pasting_oracle_gap(s, q.weights(), p.weights(), 0, 1, pq.weights()) < 1e-15);
  CHECK(pasting_identity_gap(s, q, p, 0, 1, pq) < 1e-15);
  const TreeMeasure skew = TreeMeasure::from_weights(s, vec({0.1, 0.2, 0.3, 0.4}));
  CHECK(pasting_identity_gap(s, q, p, 0, 1, skew) > 0.1);
  CHECK(code_of([&] { paste_measures(s, q, p, 2, 1); }) == Errc::TimeOrderViolation);
}

TEST_CASE("pasting identity on random measures") {
  std::mt19937_64 rng(61);
  const FilteredSpace sp = three_period();
  for (int trial = 0; trial < 40; ++trial) {
    const Vector q1 = random_law(rng, sp.leaves(), true), q2 = random_law(rng, sp.leaves(), true);
    const TreeMeasure m1 = TreeMeasure::from_weights(sp, q1), m2 = TreeMeasure::from_weights(sp, q2);
    for (int s = 0; s <= 3; ++s)
      for (int t = s; t <= 3; ++t) {
        const TreeMeasure pasted = paste_measures(sp, m1, m2, s, t);
        CHECK(pasting_oracle_gap(sp, q1, q2, s, t, pasted.weights()) < 1e-12);
        CHECK(pasting_identity_gap(sp, m1, m2, s, t, pasted) < 1e-12);
      }
  }
}

TEST_CASE("bifurcation of measures and discounts") {
  const FilteredSpace s = binary_tree();
  const TreeMeasure q1 = TreeMeasure::from_weights(s, vec({0.5, 0, 0.25, 0.25}));
  const TreeMeasure q2 = TreeMeasure::from_weights(s, vec({0.1, 0.2, 0.3, 0.4}));
  const LeafMask all = LeafMask::Constant(4, true), none = LeafMask::Constant(4, false);
  LeafMask first = none;
  first[0] = first[1] = true;
  const Vector w1 = conditional_weights(s, q1.weights(), 1), w2 = conditional_weights(s, q2.weights(), 1);
  CHECK(conditional_weights(s, bifurcate_measures(s, q1, q2, all, 1).weights(), 1).isApprox(w1));
  CHECK(conditional_weights(s, bifurcate_measures(s, q1, q2, none, 1).weights(), 1).isApprox(w2));
  const TreeMeasure spliced = bifurcate_measures(s, q1, q2, first, 1);
  CHECK(bifurcation_oracle_gap(s, q1.weights(), q2.weights(), first, 1, spliced.weights()) < 1e-15);
  CHECK(bifurcation_identity_gap(s, q1, q2, first, 1, spliced) < 1e-15);
  CHECK(code_of([&] { bifurcate_measures(s, q1, q2, first, 0); }) == Errc::NotMeasurableEvent);

  std::mt19937_64 rng(62);
  const FilteredSpace sp = three_period();
  for (int trial = 0; trial < 30; ++trial) {
    const Vector a = random_law(rng, sp.leaves(), true), b = random_law(rng, sp.leaves(), true);
    const int lvl = static_cast<int>(rng() % 4);
    const NodeValues pick = NodeValues::NullaryExpr(sp.atom_count(lvl), [&] { return static_cast<double>(rng() % 2); });
    const LeafMask ev = lift(sp, lvl, pick).array() > 0.5;
    const TreeMeasure ma = TreeMeasure::from_weights(sp, a), mb = TreeMeasure::from_weights(sp, b);
    CHECK(bifurcation_oracle_gap(sp, a, b, ev, lvl, bifurcate_measures(sp, ma, mb, ev, lvl).weights()) < 1e-12);
  }

  const NodeTable half = product_discount(s, {1.0, 0.5});
  const NodeTable one = product_discount(s, {1.0, 1.0});
  CHECK(bifurcate_discounts(s, half, half, first, 1, 2).isApprox(Vector::Constant(4, 0.5)));
  CHECK(bifurcate_discounts(s, half, one, all, 1, 2).isApprox(Vector::Constant(4, 0.5)));
  CHECK(bifurcate_discounts(s, half, one, first, 1, 2).isApprox(vec({0.5, 0.5, 1, 1})));
  CHECK(code_of([&] { bifurcate_discounts(s, half, one, first, 0, 2); }) == Errc::NotMeasurableEvent);
}

TEST_CASE("joint pasting") {
  const FilteredSpace s = binary_tree();
  const TreeMeasure q1 = TreeMeasure::from_weights(s, vec({0.5, 0, 0.25, 0.25}));
  const TreeMeasure q2 = TreeMeasure::from_weights(s, vec({0.1, 0.2, 0.3, 0.4}));
  const NodeTable one = product_discount(s, {1.0, 1.0});

  const JointPaste plain = joint_paste(s, one, q1, one, q2, 0, 1, 2);
  CHECK(plain.discount.isApprox(vec({1.0})));
  CHECK(plain.q.weights().isApprox(paste_measures(s, q1, q2, 0, 1).weights()));

  const NodeTable alpha = product_discount(s, {0.5, 1.0});
  const NodeTable beta = product_discount(s, {1.0, 0.25});
  const JointPaste scaled = joint_paste(s, alpha, q1, beta, q2, 0, 1, 2);
  CHECK(scaled.discount[0] == doctest::Approx(0.125));
  CHECK(scaled.q.weights().isApprox(paste_measures(s, q1, q2, 0, 1).weights()));
  CHECK(joint_oracle_gap(s, alpha, q1.weights(), beta, q2.weights(), 0, 1, 2, scaled) < 1e-15);

  // Same pair on both sides of a product form returns the pair itself.
  const JointPaste self = joint_paste(s, alpha, q2, alpha, q2, 0, 1, 2);
  CHECK(self.discount.isApprox(alpha.at(0, 2)));
  CHECK(self.q.weights().isApprox(q2.weights()));

  std::mt19937_64 rng(63);
  const FilteredSpace sp = three_period();
  for (int trial = 0; trial < 30; ++trial) {
    const NodeTable d1 = random_adapted_discount(rng, sp), d2 = random_adapted_discount(rng, sp);
    const Vector a = random_law(rng, sp.leaves(), trial % 2 == 0), b = random_law(rng, sp.leaves(), trial % 3 == 0);
    const TreeMeasure ma = TreeMeasure::from_weights(sp, a), mb = TreeMeasure::from_weights(sp, b);
    for (int s0 = 0; s0 <= 3; ++s0)
      for (int t = s0; t <= 3; ++t)
        for (int u = t; u <= 3; ++u) {
          const JointPaste jp = joint_paste(sp, d1, ma, d2, mb, s0, t, u);
          CHECK(joint_oracle_gap(sp, d1, a, d2, b, s0, t, u, jp) < 1e-12);
          CHECK(joint_paste_identity_gap(sp, d1, ma, d2, mb, s0, t, u, jp) < 1e-12);
          CHECK(jp.discount.minCoeff() >= 0.0);
          CHECK(jp.discount.maxCoeff() <= 1.0);
        }
  }
}

TEST_CASE("cocycle construction") {
  const FilteredSpace s = binary_tree();
  const TreeMeasure p = TreeMeasure::reference(s);
  auto ones = [&] { return std::vector<NodeValues>{NodeValues::Ones(1), NodeValues::Ones(2)}; };

  const std::vector<DualPair> flat{{p, product_discount(s, {1.0, 1.0})}};
  const PenaltyTerm zero = build_cocycle_penalty(s, flat, {{NodeValues::Zero(1), NodeValues::Zero(2)}});
  for (int t = 0; t <= 2; ++t)
    for (int u = t; u <= 2; ++u) CHECK(max_abs(zero[0].at(t, u)) == 0.0);

  const PenaltyTerm unit = build_cocycle_penalty(s, flat, {ones()});
  CHECK(unit[0].at(0, 2)[0] == doctest::Approx(2.0));
  CHECK(unit[0].at(0, 1)[0] == doctest::Approx(1.0));
  CHECK(unit[0].at(1, 2).isApprox(vec({1, 1})));

  const std::vector<DualPair> halved{{p, product_discount(s, {0.5, 1.0})}};
  const PenaltyTerm disc = build_cocycle_penalty(s, halved, {ones()});
  CHECK(disc[0].at(0, 2)[0] == doctest::Approx(1.5));

  const DualModel m = DualModel::create(s, halved, disc, {Normalization::Skip, false});
  CHECK(check_cocycle(m).pass());
  CHECK(check_cocycle(conditional_expectation_model(s)).pass());
  CHECK(code_of([&] { build_cocycle_penalty(s, flat, {{NodeValues::Constant(1, -1.0), NodeValues::Zero(2)}}); }) ==
        Errc::InvalidModel);
}

TEST_CASE("cocycle associativity on three periods") {
  std::mt19937_64 rng(64);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const FilteredSpace sp = three_period();
  std::vector<DualPair> pairs;
  OneStepPenalties pi;
  for (int k = 0; k < 6; ++k) {
    const std::vector<double> factors{unit(rng), unit(rng), unit(rng)};
    pairs.push_back({TreeMeasure::from_weights(sp, random_law(rng, sp.leaves(), true)), product_discount(sp, factors)});
    std::vector<NodeValues> steps;
    for (int t = 0; t < 3; ++t) steps.push_back(NodeValues::NullaryExpr(sp.atom_count(t), [&] { return unit(rng); }));
    pi.push_back(steps);
  }
  const PenaltyTerm c = build_cocycle_penalty(sp, pairs, pi);
  const DualModel m = DualModel::create(sp, pairs, c, {Normalization::Skip, false});
  const auto r = check_cocycle(m);
  CHECK(r.pass());
  CHECK(r.find("cocycle")->scopes.size() == 20);

  // Independent check of c_{0,3} = c_{0,2} + E_Q[D_{0,2} c_{2,3} | F_0] by path sums.
  const auto anc = oracle::ancestors(3, sp.spec().branching);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const Vector inner = spread(anc, pairs[k].discount.at(0, 2), 0).cwiseProduct(spread(anc, c[k].at(2, 3), 2));
    const double rhs = c[k].at(0, 2)[0] + oracle::cond_exp(anc, inner, pairs[k].q.weights(), sp.p(), 0)[0];
    CHECK(c[k].at(0, 3)[0] == doctest::Approx(rhs).epsilon(1e-13));
  }

  // Raising one entry breaks exactly the triples that read it.
  const DualModel bumped = perturb_penalty(m, 2, 0, 3, 0.05);
  const auto b = check_cocycle(bumped);
  CHECK_FALSE(b.pass());
  CHECK(b.find("cocycle")->worst() == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(b.find("cocycle")->find("(0,1,3)")->witness.id == "pair#2/atom#0");
  CHECK(b.find("cocycle")->find("(1,2,3)")->pass);
  CHECK(check_cocycle(bumped, {{1, 2, 3}}).pass());
  CHECK(code_of([&] { check_cocycle(m, {{2, 1, 3}}); }) == Errc::TimeOrderViolation);
}

TEST_CASE("locality") {
  const FilteredSpace s = binary_tree();
  CHECK(check_locality(conditional_expectation_model(s)).pass());
  CHECK(check_locality(discounted_cocycle_model()).pass());

  // Two pairs that agree on the first level-1 atom but charge it differently.
  const TreeMeasure p = TreeMeasure::reference(s);
  const TreeMeasure q = TreeMeasure::from_weights(s, vec({0.25, 0.25, 0.1, 0.4}));
  const NodeTable d = product_discount(s, {1.0, 1.0});
  PenaltyTerm pen(2, NodeTable(2));
  for (int t = 0; t <= 2; ++t)
    for (int u = t; u <= 2; ++u) pen[0].at(t, u) = pen[1].at(t, u) = NodeValues::Zero(s.atom_count(t));
  pen[1].at(1, 2) = vec({0.3, 0.0});
  const DualModel m = DualModel::create(s, {{p, d}, {q, d}}, pen);
  const auto r = check_locality(m);
  CHECK_FALSE(r.pass());
  CHECK(r.find("locality")->find("(1,2)")->violation == doctest::Approx(0.3));
  CHECK(r.find("locality")->find("(1,2)")->witness.id == "pairs#0,1/atom#0");
  CHECK(r.find("locality")->find("(0,1)")->pass);
}

TEST_CASE("certified grid models") {
  for (const DualModel& m : {coherent_grid_model(), discounted_cocycle_model()}) {
    const StructuredModel sm = certify_structure(m);
    CHECK_FALSE(sm.pasting.empty());
    CHECK_FALSE(sm.joint_pasting.empty());
    for (const auto* tables : {&sm.pasting, &sm.joint_pasting})
      for (const auto& table : *tables) {
        CHECK(table.missing == 0);
        CHECK(table.worst_gap <= 1e-12);
        for (std::size_t e = 0; e < table.size(); e += 7) CHECK(closure_entry_gap(sm, table, e) <= 1e-12);
      }
    for (const auto& cert : sm.bifurcation) CHECK(cert.pass);
    const auto conditions = theorem_conditions(sm);
    CHECK(conditions.pass());
    for (const char* name : {"Qa-equivalent", "Qb-pasting", "Qc-bifurcation", "Da-bifurcation", "QDa-joint-pasting",
                             "QDa-degenerate", "Ca-penalty-type", "dual-set-product", "Cb-locality", "Cc-cocycle"})
      CHECK(conditions.find(name) != nullptr);
    const auto verdict = verify_theorem_tc(sm, standard_battery(m.space(), 100, 5));
    CHECK(verdict.pass());
    CHECK(verdict.find("theorem-prediction")->worst() < 1e-9);
  }
}

TEST_CASE("random rectangular models satisfy the conditions and are recursive") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    CAPTURE(seed);
    const DualModel m = build_rectangular_model(random_rectangular_spec(seed, 64));
    const StructuredModel sm = certify_structure(m);
    const auto verdict = verify_theorem_tc(sm, standard_battery(m.space(), 30, seed));
    CHECK(verdict.pass());
    CHECK(verdict.find("strong-tc")->worst() < 1e-9);
  }
}

TEST_CASE("theorem preconditions") {
  const DualModel broken = broken_cocycle_model();
  const StructuredModel sm = certify_structure(broken);
  const auto conditions = theorem_conditions(sm);
  CHECK_FALSE(conditions.pass());
  CHECK_FALSE(conditions.find("Cc-cocycle")->pass());
  CHECK(conditions.find("Cc-cocycle")->worst() == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(code_of([&] { verify_theorem_tc(sm, standard_battery(broken.space(), 10, 1)); }) == Errc::PreconditionNotMet);
  CHECK(check_strong_tc(broken, standard_battery(broken.space(), 10, 1)).find("strong-tc")->worst() > 0.0);

  const StructuredModel two = certify_structure(two_pair_model());
  CHECK(code_of([&] { verify_theorem_tc(two, standard_battery(two.model.space(), 10, 1)); }) ==
        Errc::PreconditionNotMet);
}

TEST_CASE("recursivity gap grows with the cocycle perturbation") {
  const DualModel base = discounted_cocycle_model();
  const RandomVariable x = RandomVariable::Constant(base.space().leaves(), -1.0);
  const Index k = root_argmax_pair(base, x);
  double prev = 0.0;
  for (double delta : {0.01, 0.05, 0.1}) {
    const DualModel m = perturb_penalty(base, k, 0, 2, delta);
    CHECK(check_cocycle(m).find("cocycle")->worst() == doctest::Approx(delta).epsilon(1e-12));
    const double gap = check_strong_tc(m, {x}).find("strong-tc")->worst();
    CHECK(gap > prev);
    prev = gap;
  }
}
