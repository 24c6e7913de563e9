#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "risktree/battery.hpp"
#include "risktree/consistency.hpp"
#include "risktree/io.hpp"
#include "risktree/structure.hpp"
#include "risktree/zoo.hpp"

using namespace risktree;

namespace {

struct Config {
  std::string suite;
  std::string model;
  std::string x_file;
  std::string x_inline;
  std::string mu_file;
  std::string mu_inline;
  int t = 0;
  int u = -1;
  double tol = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 1;
  std::string format = "table";
  bool expect_fail = false;
  bool oracle = false;
  int jobs = 1;
  std::size_t battery = 200;
  long min_non_vacuous = 1;
  long pair = -1;
  double box = 10.0;
  int grid = 41;
  std::string out;
};

struct Input {
  std::optional<DualModel> dynamic;
  std::optional<StaticRiskMeasure> stat;
  const FilteredSpace& space() const { return dynamic ? dynamic->space() : stat->space; }
};

Input load_input(const Config& cfg) {
  if (cfg.model.empty()) throw Error(Errc::ParseError, "--model is required");
  Input in;
  if (file_kind(cfg.model) == "risktree-dictionary")
    in.stat = load_dictionary(cfg.model);
  else
    in.dynamic = load_model(cfg.model);
  return in;
}

double tolerance(const Config& cfg) {
  if (!std::isnan(cfg.tol)) return cfg.tol;
  if (const char* env = std::getenv("RISKTREE_TOL")) {
    try {
      return parse_number(env);
    } catch (const Error&) {
      throw Error(Errc::ParseError, std::string("RISKTREE_TOL is not a number: ") + env);
    }
  }
  return kDefaultTol;
}

Vector read_vector(const std::string& file, const std::string& inline_csv, const char* what) {
  if (!inline_csv.empty()) return parse_vector(inline_csv);
  if (!file.empty()) return load_vector(file);
  throw Error(Errc::ParseError, std::string("no ") + what + " given");
}

void emit_report(const ConsistencyReport& report, const std::string& format) {
  if (format == "csv")
    write_report_csv(std::cout, report);
  else if (format == "json")
    write_report_json(std::cout, report);
  else
    write_report_table(std::cout, report);
}

/// Rows of (label, value) printed in the requested format.
void emit_values(const std::string& title, const std::vector<std::pair<std::string, double>>& rows,
                 const std::string& format, const nlohmann::ordered_json& meta = {}) {
  if (format == "csv") {
    std::cout << "label,value\n";
    for (const auto& [label, v] : rows) std::cout << label << ',' << format_number(v) << '\n';
  } else if (format == "json") {
    nlohmann::ordered_json j = meta.is_null() ? nlohmann::ordered_json::object() : meta;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [label, v] : rows) {
      nlohmann::ordered_json r;
      r["label"] = label;
      if (std::isfinite(v))
        r["value"] = v;
      else
        r["value"] = format_number(v);
      arr.push_back(r);
    }
    j["values"] = arr;
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << title << '\n';
    for (const auto& [label, v] : rows) std::cout << "  " << label << ": " << format_number(v) << '\n';
  }
}

int run_eval(const Config& cfg) {
  const Input in = load_input(cfg);
  const Vector x = read_vector(cfg.x_file, cfg.x_inline, "position (--x or --x-inline)");
  check_size(in.space(), x, "position");
  if (in.stat) {
    emit_values("rho(X)", {{"root", eval_static_rho(*in.stat, x)}}, cfg.format);
    return 0;
  }
  const DualModel& m = *in.dynamic;
  const int u = cfg.u < 0 ? m.horizon() : cfg.u;
  if (cfg.t < 0 || cfg.t > u || u > m.horizon())
    throw Error(Errc::TimeOrderViolation, "need 0 <= t <= u <= " + std::to_string(m.horizon()));
  if (!is_measurable(m.space(), x, u))
    throw Error(Errc::NotMeasurable, "position is not measurable at level " + std::to_string(u));
  const NodeValues v = m.rho_nodes(x, cfg.t, u);
  std::vector<std::pair<std::string, double>> rows;
  for (Index a = 0; a < v.size(); ++a) rows.emplace_back("atom " + std::to_string(a), v[a]);
  nlohmann::ordered_json meta;
  meta["t"] = cfg.t;
  meta["u"] = u;
  emit_values("rho_{" + std::to_string(cfg.t) + "," + std::to_string(u) + "}(X) per atom", rows, cfg.format, meta);
  return 0;
}

std::vector<RegularityCase> regularity_cases(const FilteredSpace& space, const std::vector<RandomVariable>& xs,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<RegularityCase> cases;
  for (int t = 0; t <= space.horizon(); ++t)
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      NodeValues pick(space.atom_count(t));
      for (Index a = 0; a < pick.size(); ++a) pick[a] = static_cast<double>(rng() % 2);
      cases.push_back({xs[i], xs[i + 1], lift(space, t, pick).array() > 0.5, t});
    }
  return cases;
}

ConsistencyReport run_suite(const Config& cfg, const Input& in) {
  const double tol = tolerance(cfg);
  const auto battery = standard_battery(in.space(), cfg.battery, cfg.seed);
  CheckOptions opts;
  opts.tol = tol;
  opts.min_non_vacuous = cfg.min_non_vacuous;
  opts.jobs = cfg.jobs;

  if (in.stat) {
    if (cfg.suite != "axioms") throw Error(Errc::Unsupported, "a dictionary supports only the axioms suite");
    StaticAxiomOptions so;
    so.tol = tol;
    return check_static_axioms(*in.stat, battery, so);
  }
  const DualModel& m = *in.dynamic;
  const std::string& s = cfg.suite;
  if (s == "axioms") {
    DynamicAxiomOptions ao;
    ao.tol = tol;
    return check_dynamic_axioms(m, battery, ao);
  }
  if (s == "regularity") return check_regularity(m, regularity_cases(m.space(), battery, cfg.seed), tol);
  if (s == "cocycle") return check_cocycle(m, {}, tol);
  if (s == "locality") return check_locality(m, tol);
  if (s == "strong") return check_strong_tc(m, battery, opts);
  if (s == "weak") return check_weak_tc(m, weak_pair_battery(m.space(), battery, cfg.seed), opts);
  if (s == "weakstar") return check_weak_star_tc(m, symmetry_pairs(m.space(), battery), opts);
  if (s == "constancy") return check_constancy_all(m, battery, opts);
  if (s == "implications")
    return check_tc_implications(m, {battery, weak_pair_battery(m.space(), battery, cfg.seed)}, opts);
  if (s == "pasting" || s == "theorem") {
    const StructuredModel sm = certify_structure(m);
    ConsistencyReport cond = theorem_conditions(sm, opts);
    if (s == "pasting") {
      ConsistencyReport out;
      for (const auto& c : cond.checks)
        if (c.name.rfind("Qb", 0) == 0 || c.name.rfind("Qc", 0) == 0 || c.name.rfind("Da", 0) == 0 ||
            c.name.rfind("QDa", 0) == 0)
          out.add(c);
      out.canonicalize();
      return out;
    }
    if (!cond.pass()) return cond;
    return verify_theorem_tc(sm, battery, opts);
  }
  throw Error(Errc::Unsupported, "unknown suite '" + s + "'");
}

int run_check(const Config& cfg) {
  const Input in = load_input(cfg);
  const ConsistencyReport report = run_suite(cfg, in);
  emit_report(report, cfg.format);
  const bool pass = report.pass();
  return (pass != cfg.expect_fail) ? 0 : 1;
}

int run_conjugate(const Config& cfg) {
  const Input in = load_input(cfg);
  std::vector<std::pair<std::string, double>> rows;
  nlohmann::ordered_json meta;
  if (in.stat) {
    const StaticRiskMeasure& rm = *in.stat;
    std::vector<std::pair<std::string, Vector>> targets;
    if (!cfg.mu_file.empty() || !cfg.mu_inline.empty()) {
      targets.emplace_back("mu", read_vector(cfg.mu_file, cfg.mu_inline, "measure"));
    } else {
      for (Index i = 0; i < rm.dictionary.size(); ++i)
        targets.emplace_back("entry " + std::to_string(i), rm.dictionary.entries()[static_cast<std::size_t>(i)].mu.raw());
    }
    double worst = 0.0;
    for (const auto& [label, mu] : targets) {
      check_size(rm.space, mu, "measure");
      const double lp = minimal_penalty_static(rm, mu);
      rows.emplace_back(label + " penalty", lp);
      if (cfg.oracle) {
        const double grid = conjugate_grid_oracle(rm, mu, cfg.box, cfg.grid);
        rows.emplace_back(label + " oracle", grid);
        if (std::isfinite(lp)) worst = std::max(worst, std::abs(lp - grid));
      }
    }
    if (cfg.oracle) {
      const double step = 2.0 * cfg.box / (cfg.grid - 1);
      rows.emplace_back("grid step", step);
      rows.emplace_back("max discrepancy", worst);
      meta["within_two_steps"] = worst <= 2.0 * step;
    }
    emit_values("minimal penalty", rows, cfg.format, meta);
    return 0;
  }
  const DualModel& m = *in.dynamic;
  const int u = cfg.u < 0 ? m.horizon() : cfg.u;
  if (!cfg.mu_file.empty() || !cfg.mu_inline.empty()) {
    const Vector mu = read_vector(cfg.mu_file, cfg.mu_inline, "measure");
    check_size(m.space(), mu, "measure");
    rows.emplace_back("aggregated penalty at t=" + std::to_string(cfg.t), aggregated_minimal_penalty(m, cfg.t, mu));
    emit_values("minimal penalty", rows, cfg.format);
    return 0;
  }
  const Index first = cfg.pair < 0 ? 0 : cfg.pair;
  const Index last = cfg.pair < 0 ? m.pair_count() : cfg.pair + 1;
  if (first >= m.pair_count() || last > m.pair_count()) throw Error(Errc::InvalidModel, "pair index out of range");
  for (Index k = first; k < last; ++k) {
    const NodeValues c = minimal_penalty_dynamic(m, k, cfg.t, u);
    for (Index a = 0; a < c.size(); ++a)
      rows.emplace_back("pair " + std::to_string(k) + " atom " + std::to_string(a), c[a]);
  }
  meta["t"] = cfg.t;
  meta["u"] = u;
  emit_values("minimal penalty c_{" + std::to_string(cfg.t) + "," + std::to_string(u) + "} per pair and atom", rows,
              cfg.format, meta);
  return 0;
}

int run_zoo(const Config& cfg) {
  auto zoo = fixture_zoo();
  if (cfg.out.empty()) {
    for (const auto& e : zoo) std::cout << e.name << ".model\n";
    std::cout << "two_pair.dict\n";
    return 0;
  }
  std::filesystem::create_directories(cfg.out);
  for (const auto& e : zoo) {
    std::ofstream f(std::filesystem::path(cfg.out) / (e.name + ".model"));
    write_model(f, e.model);
  }
  std::ofstream f(std::filesystem::path(cfg.out) / "two_pair.dict");
  write_dictionary(f, {binary_tree(), two_pair_dictionary()});
  return 0;
}

int exit_code(const Error& e) {
  switch (e.code()) {
    case Errc::SpaceMismatch:
    case Errc::NotMeasurable:
    case Errc::NotMeasurableEvent:
      return 3;
    case Errc::InsufficientNonVacuousPairs:
      return 4;
    default:
      return 2;
  }
}

void add_common(CLI::App* cmd, Config& cfg) {
  cmd->add_option("--model", cfg.model, "Model or dictionary file");
  cmd->add_option("--tol", cfg.tol, "Tolerance (default 1e-9 or RISKTREE_TOL)");
  cmd->add_option("--seed", cfg.seed, "Battery seed");
  cmd->add_option("--format", cfg.format, "Output format")->check(CLI::IsMember({"csv", "json", "table"}));
  cmd->add_option("--jobs", cfg.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--t", cfg.t, "Time t");
  cmd->add_option("--u", cfg.u, "Time u (default T)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scenario-tree lab for dynamic cash-subadditive risk measures"};
  app.require_subcommand(1);
  Config cfg;

  auto* eval = app.add_subcommand("eval", "Evaluate rho_{t,u}(X) per atom");
  add_common(eval, cfg);
  eval->add_option("--x", cfg.x_file, "File with leaf values");
  eval->add_option("--x-inline", cfg.x_inline, "Comma-separated leaf values");

  auto* check = app.add_subcommand("check", "Run a checker suite");
  check->add_option("suite", cfg.suite, "Suite")
      ->required()
      ->check(CLI::IsMember({"axioms", "regularity", "cocycle", "locality", "pasting", "strong", "weak", "weakstar",
                             "constancy", "theorem", "implications"}));
  add_common(check, cfg);
  check->add_option("--battery", cfg.battery, "Random battery size");
  check->add_option("--min-non-vacuous", cfg.min_non_vacuous, "Floor on non-vacuous implication tests");
  check->add_flag("--expect-fail", cfg.expect_fail, "Exit 0 when the checks fail");

  auto* conj = app.add_subcommand("conjugate", "Minimal penalty values");
  add_common(conj, cfg);
  conj->add_option("--mu", cfg.mu_file, "File with leaf weights of the measure");
  conj->add_option("--mu-inline", cfg.mu_inline, "Comma-separated leaf weights");
  conj->add_option("--pair", cfg.pair, "Pair index (default all)");
  conj->add_flag("--oracle", cfg.oracle, "Compare with the grid oracle");
  conj->add_option("--box", cfg.box, "Oracle box half-width");
  conj->add_option("--grid", cfg.grid, "Oracle grid points per axis");

  auto* zoo = app.add_subcommand("zoo", "List or write the fixture zoo");
  zoo->add_option("--out", cfg.out, "Directory to write fixtures into");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*eval) return run_eval(cfg);
    if (*check) return run_check(cfg);
    if (*conj) return run_conjugate(cfg);
    if (*zoo) return run_zoo(cfg);
  } catch (const Error& e) {
    std::cerr << "risktree: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "risktree: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
