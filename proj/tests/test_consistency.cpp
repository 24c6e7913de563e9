#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "support.hpp"
#include "risktree/battery.hpp"
#include "risktree/consistency.hpp"
#include "risktree/zoo.hpp"

using namespace risktree;
using testing::code_of;
using testing::max_abs;
using testing::vec;

namespace {

std::vector<RandomVariable> constants(const FilteredSpace& s, std::initializer_list<double> values) {
  std::vector<RandomVariable> out;
  for (double v : values) out.push_back(RandomVariable::Constant(s.leaves(), v));
  return out;
}

}  // namespace

TEST_CASE("strong time-consistency") {
  const FilteredSpace s = binary_tree();
  const auto battery = standard_battery(s, 50, 1);

  const auto ce = check_strong_tc(conditional_expectation_model(s), battery);
  CHECK(ce.pass());
  CHECK(ce.find("strong-tc")->worst() < 1e-12);

  // rho_{0,2}(-1) = 1/2 while rho_{0,1}(-rho_{1,2}(-1)) = rho_{0,1}(-1/2) = 1/4.
  const DualModel put = put_premium_model(s, 2.0);
  const auto pr = check_strong_tc(put, constants(s, {-1.0}));
  CHECK_FALSE(pr.pass());
  const CheckResult* strong = pr.find("strong-tc");
  CHECK(strong->find("(0,1,2)")->violation == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(strong->worst() == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(strong->find("(0,1,2)")->witness.find("X")->isApprox(Vector::Constant(4, -1.0)));

  CHECK(check_strong_tc(coherent_grid_model(), battery).find("strong-tc")->worst() < 1e-9);
  CHECK(check_strong_tc(discounted_cocycle_model(), battery).find("strong-tc")->worst() < 1e-9);
  CHECK(code_of([&] { check_strong_tc(put, {}); }) == Errc::EmptyBattery);
}

TEST_CASE("put-premium recursivity gap under a varying gamma") {
  const FilteredSpace s = build_tree({2, {2, 3, 2}, vec({0.1, 0.2, 0.3, 0.15, 0.25})});
  std::vector<NodeValues> gamma{vec({2.0}), vec({1.5, 3.0}), vec({1.2, 2.0, 4.0, 1.1, 5.0})};
  const DualModel put = put_premium_model(s, gamma);
  for (double c : {0.5, 1.0, 3.0}) {
    // Constant X = -c: rho_{0,2} = c/g0 and rho_{0,1}(-rho_{1,2}) = E[c/(g0 g1)].
    const double expect = c / 2.0 - (0.6 * c / (2.0 * 1.5) + 0.4 * c / (2.0 * 3.0));
    const auto r = check_strong_tc(put, constants(s, {-c}));
    CHECK(r.find("strong-tc")->find("(0,1,2)")->violation == doctest::Approx(expect).epsilon(1e-13));
    CHECK(r.find("strong-tc")->worst() >= (1.0 - 1.0 / 5.0) / 5.0 * c - 1e-12);
  }
}

TEST_CASE("constancy") {
  const FilteredSpace s = binary_tree();
  CHECK(check_constancy_all(conditional_expectation_model(s), standard_battery(s, 30, 2)).pass());

  const DualModel put = put_premium_model(s, 2.0);
  const auto up = check_constancy(put, 1, constants(s, {1.0}));
  CHECK(up.find("constancy")->worst() == doctest::Approx(1.0));
  const auto down = check_constancy(put, 1, constants(s, {-1.0}));
  CHECK(down.find("constancy")->worst() == doctest::Approx(0.5));
  CHECK_FALSE(down.pass());
  CHECK(code_of([&] { check_constancy(put, 1, {vec({1, 2, 3, 4})}); }) == Errc::NotMeasurable);
  CHECK(check_constancy_all(coherent_grid_model(), standard_battery(s, 30, 2)).pass());
}

TEST_CASE("certainty equivalent") {
  const FilteredSpace s = binary_tree();
  const DualModel put = put_premium_model(s, 2.0);
  for (const auto& x : standard_battery(s, 30, 3))
    for (int t = 0; t <= 2; ++t) {
      const NodeValues k = certainty_equivalent(put, x, t, 2);
      CHECK(max_abs(put.rho_nodes(lift(s, t, k), t, 2) - put.rho_nodes(x, t, 2)) < 1e-12);
    }
}

TEST_CASE("sibling swaps and pair batteries") {
  const FilteredSpace bin = binary_tree();
  const auto swaps = sibling_swaps(bin);
  REQUIRE(swaps.size() == 3);
  CHECK(swaps[0] == std::vector<Index>{2, 3, 0, 1});
  const FilteredSpace irr = build_tree({2, {3, 1, 2, 2}, Vector::Constant(5, 0.2)});
  // Root children have shapes (.), (..), (..): only the last two swap, plus the two binary nodes.
  CHECK(sibling_swaps(irr).size() == 3);
  const auto xs = standard_battery(bin, 10, 4);
  const auto pairs = weak_pair_battery(bin, xs, 9);
  CHECK(pairs.size() == 4 * xs.size());
  for (const auto& p : pairs)
    if (p.kind == "shift-down") CHECK((p.x - p.y).minCoeff() >= 0.0);
  CHECK(symmetry_pairs(bin, xs).size() == xs.size());
}

TEST_CASE("weak time-consistency") {
  const FilteredSpace s = binary_tree();
  const auto xs = standard_battery(s, 100, 5);
  const auto pairs = weak_pair_battery(s, xs, 6);

  const auto ce = check_weak_tc(conditional_expectation_model(s), pairs);
  CHECK(ce.pass());

  const DualModel put = put_premium_model(s, 2.0);
  const auto pr = check_weak_tc(put, pairs);
  CHECK(pr.pass());
  CHECK(pr.find("weak-tc")->non_vacuous >= 500);

  // Monotone pairs alone: every premise holds, every conclusion too.
  std::vector<PositionPair> shifts;
  for (const auto& p : pairs)
    if (p.kind == "shift-down") shifts.push_back(p);
  CheckOptions plain;
  plain.derived_pairs = false;
  const auto sh = check_weak_tc(put, shifts, plain);
  CHECK(sh.pass());
  CHECK(sh.find("weak-tc")->non_vacuous >= static_cast<long>(shifts.size()) * 3);

  CheckOptions strict;
  strict.min_non_vacuous = 1000000;
  CHECK(code_of([&] { check_weak_tc(put, pairs, strict); }) == Errc::InsufficientNonVacuousPairs);
}

TEST_CASE("broken model fails weak time-consistency") {
  const DualModel broken = broken_weak_model();
  const FilteredSpace& s = broken.space();
  const auto pairs = weak_pair_battery(s, standard_battery(s, 250, 7), 8);
  REQUIRE(pairs.size() >= 1000);
  const auto r = check_weak_tc(broken, pairs);
  CHECK_FALSE(r.pass());
  const ScopeResult* worst = r.find("weak-tc")->worst_scope();
  REQUIRE(worst != nullptr);
  // Re-evaluate the witness: premise at t, conclusion broken at s.
  int ts = 0, tt = 0, tu = 0;
  REQUIRE(std::sscanf(worst->scope.c_str(), "(%d,%d,%d)", &ts, &tt, &tu) == 3);
  const Vector& x = *worst->witness.find("X");
  const Vector& y = *worst->witness.find("Y");
  const NodeValues d_t = broken.rho_nodes(x, tt, tu) - broken.rho_nodes(y, tt, tu);
  const NodeValues d_s = broken.rho_nodes(x, ts, tu) - broken.rho_nodes(y, ts, tu);
  const bool x_over = d_t.minCoeff() >= -1e-9;
  CHECK((x_over || d_t.maxCoeff() <= 1e-9));
  CHECK((x_over ? -d_s : d_s).maxCoeff() == doctest::Approx(worst->violation).epsilon(1e-12));
  CHECK(check_cocycle(broken).pass() == false);
}

TEST_CASE("weak* time-consistency") {
  const FilteredSpace s = binary_tree();
  const auto xs = standard_battery(s, 60, 12);
  const auto sym = symmetry_pairs(s, xs);

  CheckOptions plain;
  plain.derived_pairs = false;
  // P is uniform and the put premium only sees P, so sibling swaps leave rho_t unchanged up to relabelling.
  const auto pr = check_weak_star_tc(put_premium_model(s, 2.0), sym, plain);
  CHECK(pr.pass());
  CHECK(pr.find("weak-star-tc")->non_vacuous > 0);

  const auto grid = check_weak_star_tc(coherent_grid_model(), sym, plain);
  CHECK(grid.pass());
  CHECK(grid.find("weak-star-tc")->non_vacuous > 0);

  // Constancy pairs Y = -rho_{t,u}(X) on the coherent grid: equality premise by construction.
  const auto derived = check_weak_star_tc(coherent_grid_model(), std::vector<PositionPair>(sym.begin(), sym.begin() + 5));
  CHECK(derived.pass());
  CHECK(derived.find("weak-star-tc")->non_vacuous >= 5 * 3);
}

TEST_CASE("implication lattice over the fixture zoo") {
  for (const auto& entry : fixture_zoo()) {
    CAPTURE(entry.name);
    const FilteredSpace& s = entry.model.space();
    const auto xs = standard_battery(s, 60, 13);
    ImplicationBatteries b{xs, weak_pair_battery(s, xs, 14)};
    const auto r = check_tc_implications(entry.model, b);
    CHECK(r.find("implication-a")->pass());
    CHECK(r.find("implication-b")->pass());
    CHECK(r.pass());
    const bool strong = r.find("component:strong-tc")->pass();
    CHECK(strong == entry.strongly_consistent);
    if (strong && r.find("component:monotonicity")->pass()) {
      CHECK(r.find("component:weak-tc")->pass());
      CHECK(r.find("component:weak-star-tc")->pass());
    }
  }
}

TEST_CASE("sign cases of the weak implication on the put premium") {
  const FilteredSpace s = binary_tree();
  const DualModel put = put_premium_model(s, 2.0);
  const auto xs = standard_battery(s, 80, 15);
  const auto r = check_tc_implications(put, {xs, weak_pair_battery(s, xs, 16)});
  const CheckResult* neg = r.find("implication-c-nonpositive");
  const CheckResult* pos = r.find("implication-c-nonnegative");
  CHECK_FALSE(neg->informational);
  CHECK(neg->pass());
  CHECK(pos->pass());
  CHECK(neg->non_vacuous > 0);
  CHECK(pos->non_vacuous > 0);
  // X = -1: rho_1 = 1/2 >= 0 and rho_0(-rho_1(X)) = 1/4 < 1/2 = rho_0(X).
  const RandomVariable x = Vector::Constant(4, -1.0);
  const RandomVariable y = -eval_dynamic_rho(put, x, 1, 2);
  CHECK(put.rho_nodes(y, 0, 2)[0] == doctest::Approx(0.25));
  CHECK(put.rho_nodes(x, 0, 2)[0] == doctest::Approx(0.5));
}

TEST_CASE("reports do not depend on the thread count") {
  const DualModel m = discounted_cocycle_model();
  const auto xs = standard_battery(m.space(), 40, 17);
  const auto pairs = weak_pair_battery(m.space(), xs, 18);
  CheckOptions one, four;
  four.jobs = 4;
  for (auto* f : {&check_weak_tc, &check_weak_star_tc}) {
    const auto a = f(m, pairs, one);
    const auto b = f(m, pairs, four);
    const CheckResult& ca = a.checks.front();
    const CheckResult& cb = b.checks.front();
    CHECK(ca.non_vacuous == cb.non_vacuous);
    REQUIRE(ca.scopes.size() == cb.scopes.size());
    for (std::size_t i = 0; i < ca.scopes.size(); ++i) {
      CHECK(ca.scopes[i].scope == cb.scopes[i].scope);
      CHECK(ca.scopes[i].violation == cb.scopes[i].violation);
      CHECK(ca.scopes[i].witness.id == cb.scopes[i].witness.id);
    }
  }
  const auto sa = check_strong_tc(m, xs, one);
  const auto sb = check_strong_tc(m, xs, four);
  CHECK(sa.checks.front().worst() == sb.checks.front().worst());
}
