#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + RISKTREE_CLI + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string fixture(const std::string& name) { return std::string(RISKTREE_FIXTURES) + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / ("risktree-cli-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("eval") {
  const Run ce = run("eval --model " + fixture("cond_expectation.model") + " --x-inline 4,0,2,2 --t 1");
  CHECK(ce.code == 0);
  CHECK(contains(ce.out, "atom 0: -2\n"));
  CHECK(contains(ce.out, "atom 1: -2\n"));

  const Run put = run("eval --model " + fixture("put_premium.model") + " --x-inline=-1,-1,-1,-1 --t 0");
  CHECK(put.code == 0);
  CHECK(contains(put.out, "atom 0: 0.5\n"));

  const Run dict = run("eval --model " + fixture("two_pair.dict") + " --x-inline 4,0,2,2");
  CHECK(dict.code == 0);
  CHECK(contains(dict.out, "-1.6"));

  const fs::path x = scratch() / "x.txt";
  std::ofstream(x) << "# position\n-4 0\n-2 2\n";
  const Run file = run("eval --model " + fixture("put_premium.model") + " --x " + x.string() + " --t 1");
  CHECK(file.code == 0);
  CHECK(contains(file.out, "atom 0: 1\n"));
  CHECK(contains(file.out, "atom 1: 0.5\n"));
}

TEST_CASE("eval error exits") {
  const fs::path bad = scratch() / "bad.model";
  std::ofstream(bad) << "risktree-model 1\nhorizon 2\nbranching 2 2 2\nweights 0.25 x 0.25 0.25\npair\nq reference\nend\n";
  const Run parse = run("eval --model " + bad.string() + " --x-inline 1,2,3,4");
  CHECK(parse.code == 2);
  CHECK(contains(parse.out, "bad.model:4:"));

  CHECK(run("eval --model " + fixture("cond_expectation.model") + " --x-inline 1,2").code == 3);
  // X must be F_u-measurable.
  CHECK(run("eval --model " + fixture("cond_expectation.model") + " --x-inline 1,2,3,4 --t 0 --u 1").code == 3);
  CHECK(run("eval --model " + fixture("cond_expectation.model") + " --x-inline 1,1,3,3 --t 0 --u 1").code == 0);
  CHECK(run("eval --model /nonexistent.model --x-inline 1").code == 2);
  CHECK(run("eval --model " + fixture("cond_expectation.model") + " --x-inline 1,2,3,4 --t 2 --u 1").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("check nonsense --model " + fixture("cond_expectation.model")).code == 2);
}

TEST_CASE("check exit codes") {
  const std::string put = fixture("put_premium.model");
  const Run strong = run("check strong --format csv --model " + put);
  CHECK(strong.code == 1);
  CHECK(contains(strong.out, "strong-tc,\"(0,1,2)\",fail,0.25,"));
  CHECK(run("check strong --expect-fail --model " + put).code == 0);
  CHECK(run("check weak --model " + put).code == 0);
  CHECK(run("check weak --expect-fail --model " + put).code == 1);
  CHECK(run("check weak --min-non-vacuous 100000000 --model " + put).code == 4);

  const Run theorem = run("check theorem --model " + fixture("discounted_cocycle.model"));
  CHECK(theorem.code == 0);
  CHECK(contains(theorem.out, "theorem-prediction"));
  CHECK(contains(theorem.out, "overall: pass"));

  const Run cocycle = run("check cocycle --format json --model " + fixture("broken_cocycle.model"));
  CHECK(cocycle.code == 1);
  const auto j = nlohmann::json::parse(cocycle.out);
  CHECK(j["checks"][0]["name"] == "cocycle");
  CHECK(std::abs(j["checks"][0]["worst_violation"].get<double>() - 0.05) < 1e-12);

  const Run blocked = run("check theorem --model " + fixture("broken_cocycle.model"));
  CHECK(blocked.code == 1);
  CHECK(contains(blocked.out, "Cc-cocycle"));

  CHECK(run("check axioms --model " + fixture("coherent_grid.model")).code == 0);
  CHECK(run("check axioms --model " + fixture("two_pair.dict")).code == 0);
  CHECK(run("check implications --model " + put).code == 0);
  CHECK(run("check weak --model " + fixture("broken_weak.model")).code == 1);
}

TEST_CASE("tolerance from the environment") {
  const std::string args = "check strong --model " + fixture("put_premium.model");
  CHECK(run(args, "RISKTREE_TOL=0.3").code == 0);
  CHECK(run(args + " --tol 1e-9", "RISKTREE_TOL=0.3").code == 1);
  CHECK(run(args, "RISKTREE_TOL=abc").code == 2);
}

TEST_CASE("conjugate") {
  const Run own = run("conjugate --model " + fixture("two_pair.dict") + " --mu-inline 0.25,0.25,0.25,0.25");
  CHECK(own.code == 0);
  CHECK(contains(own.out, "penalty: 0\n"));
  const Run outside = run("conjugate --model " + fixture("two_pair.dict") + " --mu-inline 0.1,0.1,0.1,0.1");
  CHECK(outside.code == 0);
  CHECK(contains(outside.out, "+inf"));

  const Run oracle = run("conjugate --oracle --box 10 --grid 41 --model " + fixture("two_pair.dict") +
                         " --mu-inline 0.25,0,0.125,0.125");
  CHECK(oracle.code == 0);
  CHECK(contains(oracle.out, "penalty: 0.1\n"));
  const auto at = oracle.out.find("max discrepancy: ");
  REQUIRE(at != std::string::npos);
  CHECK(std::stod(oracle.out.substr(at + 17)) <= 2 * 0.5);

  const Run dyn = run("conjugate --model " + fixture("two_pair.model") + " --t 0");
  CHECK(dyn.code == 0);
  CHECK(contains(dyn.out, "pair 1 atom 0: 0.1\n"));
  CHECK(run("conjugate --model " + fixture("two_pair.dict") + " --mu-inline 0.5,0.5").code == 3);
}

TEST_CASE("reports are deterministic") {
  const std::string args = "check weak --format json --seed 5 --model " + fixture("discounted_cocycle.model");
  const Run a = run(args);
  const Run b = run(args);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  const Run c = run(args + " --jobs 3");
  CHECK(c.out == a.out);
  const Run d = run("check weak --format json --seed 6 --model " + fixture("discounted_cocycle.model"));
  CHECK(d.out != a.out);
}

TEST_CASE("zoo output matches the shipped fixtures") {
  const fs::path dir = scratch() / "zoo";
  CHECK(run("zoo --out " + dir.string()).code == 0);
  int files = 0;
  for (const auto& entry : fs::directory_iterator(RISKTREE_FIXTURES)) {
    CAPTURE(entry.path().filename().string());
    CHECK(slurp(entry.path()) == slurp(dir / entry.path().filename()));
    ++files;
  }
  CHECK(files == 8);
  fs::remove_all(scratch());
}
