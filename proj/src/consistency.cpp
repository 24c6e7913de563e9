#include "risktree/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <functional>

#include "risktree/battery.hpp"

namespace risktree {

std::string triple_label(int s, int t, int u) {
  return "(" + std::to_string(s) + "," + std::to_string(t) + "," + std::to_string(u) + ")";
}

namespace {

struct Finding {
  std::string scope;
  double violation;
  Witness witness;
};

struct Partial {
  std::vector<Finding> findings;
  long tested = 0;
  long non_vacuous = 0;
};

CheckResult fold(const char* name, double tol, std::vector<Partial>& parts) {
  CheckResult c;
  c.name = name;
  c.tolerance = tol;
  for (auto& p : parts) {
    c.tested += p.tested;
    c.non_vacuous += p.non_vacuous;
    for (auto& f : p.findings) c.record(f.scope, f.violation, std::move(f.witness));
  }
  return c;
}

ConsistencyReport single(CheckResult c) {
  ConsistencyReport r;
  r.add(std::move(c));
  r.canonicalize();
  return r;
}

/// A pair job: either tested at every (t, u) or pinned to one.
struct PairJob {
  RandomVariable x;
  RandomVariable y;
  std::string id;
  int t = -1;
  int u = -1;
};

std::vector<PairJob> base_jobs(const std::vector<PositionPair>& pairs) {
  std::vector<PairJob> jobs;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    jobs.push_back({pairs[i].x, pairs[i].y, pairs[i].kind + "#" + std::to_string(i), -1, -1});
  return jobs;
}

/// Certainty-equivalent pairs pinned to each (t, u); for the weak check also
/// the shifted variants kappa + eta and kappa - eta, for weak* the constancy pair.
void add_derived_jobs(const DualModel& model, const std::vector<PositionPair>& pairs, bool weak,
                      std::vector<PairJob>& jobs) {
  const FilteredSpace& space = model.space();
  const int T = space.horizon();
  const std::size_t bases = std::min<std::size_t>(pairs.size(), 40);
  for (std::size_t i = 0; i < bases; ++i) {
    for (int u = 1; u <= T; ++u) {
      const RandomVariable x = project(space, pairs[i].x, u);
      for (int t = 1; t <= u; ++t) {
        const std::string tag = "#" + std::to_string(i) + "@t" + std::to_string(t) + "u" + std::to_string(u);
        const RandomVariable kappa = lift(space, t, certainty_equivalent(model, x, t, u));
        jobs.push_back({x, kappa, "certainty-equivalent" + tag, t, u});
        if (weak) {
          const double eta = 0.05 * (1.0 + x.cwiseAbs().maxCoeff());
          jobs.push_back({x, (kappa.array() + eta).matrix(), "certainty-equivalent+eta" + tag, t, u});
          jobs.push_back({x, (kappa.array() - eta).matrix(), "certainty-equivalent-eta" + tag, t, u});
        } else {
          jobs.push_back({x, -eval_dynamic_rho(model, x, t, u), "constancy-pair" + tag, t, u});
        }
      }
    }
  }
}

enum class Premise { Inequality, Equality };

ConsistencyReport run_pair_check(const DualModel& model, const std::vector<PositionPair>& pairs,
                                 const CheckOptions& opts, Premise kind) {
  const FilteredSpace& space = model.space();
  const int T = space.horizon();
  std::vector<PairJob> jobs = base_jobs(pairs);
  if (opts.derived_pairs) add_derived_jobs(model, pairs, kind == Premise::Inequality, jobs);
  DynamicRiskMeasure rho(model);

  std::vector<Partial> parts(jobs.size());
  parallel_for(jobs.size(), opts.jobs, [&](std::size_t i) {
    const PairJob& job = jobs[i];
    Partial& part = parts[i];
    const int u_lo = job.u < 0 ? 1 : job.u;
    const int u_hi = job.u < 0 ? T : job.u;
    for (int u = u_lo; u <= u_hi; ++u) {
      const RandomVariable x = project(space, job.x, u);
      const RandomVariable y = project(space, job.y, u);
      const int t_lo = job.t < 0 ? 1 : job.t;
      const int t_hi = job.t < 0 ? u : job.t;
      std::vector<NodeValues> rx(static_cast<std::size_t>(u + 1)), ry(static_cast<std::size_t>(u + 1));
      for (int s = 0; s <= t_hi; ++s) {
        rx[static_cast<std::size_t>(s)] = rho.rho_nodes(x, s, u);
        ry[static_cast<std::size_t>(s)] = rho.rho_nodes(y, s, u);
      }
      for (int t = t_lo; t <= t_hi; ++t) {
        ++part.tested;
        const NodeValues d = rx[static_cast<std::size_t>(t)] - ry[static_cast<std::size_t>(t)];
        Witness w{job.id, {{"X", x}, {"Y", y}}};
        if (kind == Premise::Equality) {
          if (d.cwiseAbs().maxCoeff() > opts.premise_tol) continue;
          ++part.non_vacuous;
          for (int s = 0; s < t; ++s) {
            const double v = (rx[static_cast<std::size_t>(s)] - ry[static_cast<std::size_t>(s)]).cwiseAbs().maxCoeff();
            part.findings.push_back({triple_label(s, t, u), v, w});
          }
          continue;
        }
        const bool x_over_y = d.minCoeff() >= -opts.premise_tol;
        const bool y_over_x = d.maxCoeff() <= opts.premise_tol;
        if (x_over_y) {
          ++part.non_vacuous;
          for (int s = 0; s < t; ++s) {
            const double v = (ry[static_cast<std::size_t>(s)] - rx[static_cast<std::size_t>(s)]).maxCoeff();
            part.findings.push_back({triple_label(s, t, u), std::max(0.0, v), w});
          }
        }
        if (y_over_x) {
          ++part.non_vacuous;
          for (int s = 0; s < t; ++s) {
            const double v = (rx[static_cast<std::size_t>(s)] - ry[static_cast<std::size_t>(s)]).maxCoeff();
            part.findings.push_back({triple_label(s, t, u), std::max(0.0, v), w});
          }
        }
      }
    }
  });

  CheckResult c = fold(kind == Premise::Equality ? "weak-star-tc" : "weak-tc", opts.conclusion_tol, parts);
  if (c.non_vacuous < opts.min_non_vacuous)
    throw Error(Errc::InsufficientNonVacuousPairs,
                c.name + " found " + std::to_string(c.non_vacuous) + " non-vacuous tests, floor is " +
                    std::to_string(opts.min_non_vacuous));
  return single(std::move(c));
}

}  // namespace

ConsistencyReport check_strong_tc(const DualModel& model, const std::vector<RandomVariable>& battery,
                                  const CheckOptions& opts) {
  if (battery.empty()) throw Error(Errc::EmptyBattery, "strong time-consistency battery is empty");
  const FilteredSpace& space = model.space();
  const int T = space.horizon();
  DynamicRiskMeasure rho(model);
  std::vector<Partial> parts(battery.size());
  parallel_for(battery.size(), opts.jobs, [&](std::size_t i) {
    Partial& part = parts[i];
    for (int u = 0; u <= T; ++u) {
      const RandomVariable x = project(space, battery[i], u);
      for (int t = 0; t <= u; ++t) {
        const RandomVariable inner = -rho.rho(x, t, u);
        for (int s = 0; s <= t; ++s) {
          const NodeValues lhs = rho.rho_nodes(x, s, u);
          const NodeValues rhs = rho.rho_nodes(inner, s, t);
          ++part.tested;
          part.findings.push_back({triple_label(s, t, u), (lhs - rhs).cwiseAbs().maxCoeff(),
                                   {"battery#" + std::to_string(i), {{"X", x}}}});
        }
      }
    }
    part.non_vacuous = part.tested;
  });
  return single(fold("strong-tc", opts.tol, parts));
}

ConsistencyReport check_weak_tc(const DualModel& model, const std::vector<PositionPair>& pairs,
                                const CheckOptions& opts) {
  return run_pair_check(model, pairs, opts, Premise::Inequality);
}

ConsistencyReport check_weak_star_tc(const DualModel& model, const std::vector<PositionPair>& pairs,
                                     const CheckOptions& opts) {
  return run_pair_check(model, pairs, opts, Premise::Equality);
}

ConsistencyReport check_constancy(const DualModel& model, int t, const std::vector<RandomVariable>& m_battery,
                                  const CheckOptions& opts) {
  const FilteredSpace& space = model.space();
  check_time(space, t);
  CheckResult c;
  c.name = "constancy";
  c.tolerance = opts.tol;
  for (std::size_t i = 0; i < m_battery.size(); ++i) {
    const auto& m = m_battery[i];
    check_size(space, m, "constancy battery member");
    if (!is_measurable(space, m, t))
      throw Error(Errc::NotMeasurable, "constancy battery member is not measurable at level " + std::to_string(t));
    const NodeValues mv = restrict_to(space, t, m);
    for (int u = t; u <= space.horizon(); ++u) {
      const double v = (model.rho_nodes(m, t, u) + mv).cwiseAbs().maxCoeff();
      c.record("t=" + std::to_string(t) + ",u=" + std::to_string(u), v,
               {"m#" + std::to_string(i), {{"m", m}}});
      ++c.tested;
    }
  }
  c.non_vacuous = c.tested;
  return single(std::move(c));
}

ConsistencyReport check_constancy_all(const DualModel& model, const std::vector<RandomVariable>& battery,
                                      const CheckOptions& opts) {
  ConsistencyReport out;
  for (int t = 0; t <= model.horizon(); ++t) {
    std::vector<RandomVariable> ms;
    for (const auto& x : battery) ms.push_back(project(model.space(), x, t));
    out.merge(check_constancy(model, t, ms, opts));
  }
  out.canonicalize();
  return out;
}

NodeValues certainty_equivalent(const DualModel& model, const RandomVariable& x, int t, int u) {
  const FilteredSpace& space = model.space();
  check_size(space, x, "position");
  const NodeValues target = model.rho_nodes(x, t, u);
  const auto atoms = space.atoms(t);
  NodeValues lo(static_cast<Index>(atoms.size())), hi(static_cast<Index>(atoms.size()));
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    lo[static_cast<Index>(a)] = x.segment(atoms[a].begin, atoms[a].size()).minCoeff();
    hi[static_cast<Index>(a)] = x.segment(atoms[a].begin, atoms[a].size()).maxCoeff();
  }
  // rho_{t,u} of an F_t-measurable position is decreasing in each atom value
  // and acts atom by atom, so all atoms bisect together.
  for (int it = 0; it < 200; ++it) {
    const NodeValues mid = 0.5 * (lo + hi);
    const NodeValues r = model.rho_nodes(lift(space, t, mid), t, u);
    for (Index a = 0; a < mid.size(); ++a) {
      if (r[a] > target[a])
        lo[a] = mid[a];
      else
        hi[a] = mid[a];
    }
    if ((hi - lo).maxCoeff() <= 1e-15 * (1.0 + hi.cwiseAbs().maxCoeff())) break;
  }
  return 0.5 * (lo + hi);
}

namespace {

std::string shape(const FilteredSpace& space, int t, Index a, std::map<std::pair<int, Index>, std::string>& memo) {
  if (t == space.horizon()) return ".";
  auto key = std::make_pair(t, a);
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;
  const auto [first, last] = space.children(t, a);
  std::string s = "(";
  for (Index c = first; c < last; ++c) s += shape(space, t + 1, c, memo);
  s += ")";
  memo[key] = s;
  return s;
}

}  // namespace

std::vector<std::vector<Index>> sibling_swaps(const FilteredSpace& space) {
  std::map<std::pair<int, Index>, std::string> memo;
  std::vector<std::vector<Index>> out;
  for (int t = 0; t < space.horizon(); ++t) {
    for (Index a = 0; a < space.atom_count(t); ++a) {
      const auto [first, last] = space.children(t, a);
      for (Index i = first; i < last; ++i)
        for (Index j = i + 1; j < last; ++j) {
          if (shape(space, t + 1, i, memo) != shape(space, t + 1, j, memo)) continue;
          const Atom& ai = space.atoms(t + 1)[static_cast<std::size_t>(i)];
          const Atom& aj = space.atoms(t + 1)[static_cast<std::size_t>(j)];
          std::vector<Index> perm(static_cast<std::size_t>(space.leaves()));
          for (Index l = 0; l < space.leaves(); ++l) perm[static_cast<std::size_t>(l)] = l;
          for (Index k = 0; k < ai.size(); ++k) {
            perm[static_cast<std::size_t>(ai.begin + k)] = aj.begin + k;
            perm[static_cast<std::size_t>(aj.begin + k)] = ai.begin + k;
          }
          out.push_back(std::move(perm));
        }
    }
  }
  return out;
}

namespace {

RandomVariable permute(const RandomVariable& x, const std::vector<Index>& perm) {
  RandomVariable y(x.size());
  for (Index l = 0; l < x.size(); ++l) y[l] = x[perm[static_cast<std::size_t>(l)]];
  return y;
}

}  // namespace

std::vector<PositionPair> symmetry_pairs(const FilteredSpace& space, const std::vector<RandomVariable>& xs) {
  const auto swaps = sibling_swaps(space);
  std::vector<PositionPair> out;
  if (swaps.empty()) return out;
  for (std::size_t i = 0; i < xs.size(); ++i)
    out.push_back({xs[i], permute(xs[i], swaps[i % swaps.size()]), "sibling-swap"});
  return out;
}

std::vector<PositionPair> weak_pair_battery(const FilteredSpace& space, const std::vector<RandomVariable>& xs,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto swaps = sibling_swaps(space);
  std::vector<PositionPair> out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto& x = xs[i];
    RandomVariable m(x.size());
    for (Index l = 0; l < m.size(); ++l) m[l] = 0.5 * unit(rng);
    out.push_back({x, x - m, "shift-down"});
    out.push_back({x, unit(rng) * x, "rescale"});
    if (!swaps.empty()) out.push_back({x, permute(x, swaps[i % swaps.size()]), "sibling-swap"});
    out.push_back({x, xs[(i + 1) % xs.size()], "random"});
  }
  return out;
}

ConsistencyReport check_tc_implications(const DualModel& model, const ImplicationBatteries& batteries,
                                        const CheckOptions& opts) {
  const FilteredSpace& space = model.space();
  const int T = space.horizon();
  CheckOptions relaxed = opts;
  relaxed.min_non_vacuous = 0;

  const ConsistencyReport strong = check_strong_tc(model, batteries.battery, opts);
  const ConsistencyReport weak = check_weak_tc(model, batteries.pairs, relaxed);
  const ConsistencyReport weak_star = check_weak_star_tc(model, batteries.pairs, relaxed);
  const ConsistencyReport constancy = check_constancy_all(model, batteries.battery, opts);
  DynamicAxiomOptions ax;
  ax.tol = opts.tol;
  const ConsistencyReport axioms = check_dynamic_axioms(model, batteries.battery, ax);

  const CheckResult& mono = *axioms.find("monotonicity");
  const CheckResult& s = strong.checks.front();
  const CheckResult& w = weak.checks.front();
  const CheckResult& ws = weak_star.checks.front();
  const bool weak_established = w.pass() && w.non_vacuous > 0;
  const bool weak_star_established = ws.pass() && ws.non_vacuous > 0;

  ConsistencyReport out;
  CheckResult a;
  a.name = "implication-a";
  a.tolerance = opts.conclusion_tol;
  const bool a_premise = s.pass() && mono.pass();
  a.record("strong+monotone=>weak+weak*", a_premise ? std::max(w.worst(), ws.worst()) : 0.0,
           {a_premise ? "premise-holds" : "premise-fails", {}});
  a.tested = 1;
  a.non_vacuous = a_premise ? 1 : 0;
  out.add(std::move(a));

  CheckResult b;
  b.name = "implication-b";
  b.tolerance = opts.tol;
  const bool b_premise = constancy.pass() && weak_star_established;
  b.record("constancy+weak*=>strong", b_premise ? s.worst() : 0.0, {b_premise ? "premise-holds" : "premise-fails", {}});
  b.tested = 1;
  b.non_vacuous = b_premise ? 1 : 0;
  out.add(std::move(b));

  CheckResult cneg, cpos;
  cneg.name = "implication-c-nonpositive";
  cpos.name = "implication-c-nonnegative";
  cneg.tolerance = cpos.tolerance = opts.tol;
  cneg.informational = cpos.informational = !weak_established;
  for (std::size_t i = 0; i < batteries.battery.size(); ++i) {
    const auto& x = batteries.battery[i];
    for (int t = 1; t <= T; ++t) {
      const NodeValues rt = model.rho_nodes(x, t, T);
      const RandomVariable y = -lift(space, t, rt);
      const bool nonpos = rt.maxCoeff() <= opts.premise_tol;
      const bool nonneg = rt.minCoeff() >= -opts.premise_tol;
      for (int sidx = 0; sidx < t; ++sidx) {
        const NodeValues lhs = model.rho_nodes(x, sidx, T);
        const NodeValues rhs = model.rho_nodes(y, sidx, T);
        Witness wit{"battery#" + std::to_string(i), {{"X", x}}};
        const std::string scope = triple_label(sidx, t, T);
        if (nonpos) {
          cneg.record(scope, std::max(0.0, (lhs - rhs).maxCoeff()), wit);
          ++cneg.non_vacuous;
        }
        if (nonneg) {
          cpos.record(scope, std::max(0.0, (rhs - lhs).maxCoeff()), wit);
          ++cpos.non_vacuous;
        }
        ++cneg.tested;
        ++cpos.tested;
      }
    }
  }
  out.add(std::move(cneg));
  out.add(std::move(cpos));

  auto component = [&](const CheckResult& c, const char* name) {
    CheckResult copy = c;
    copy.name = name;
    copy.informational = true;
    out.add(std::move(copy));
  };
  component(s, "component:strong-tc");
  component(w, "component:weak-tc");
  component(ws, "component:weak-star-tc");
  for (const auto& c : constancy.checks) component(c, "component:constancy");
  component(mono, "component:monotonicity");
  out.canonicalize();
  return out;
}

}  // namespace risktree
