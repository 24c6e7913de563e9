#include "risktree/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "risktree/structure.hpp"

namespace risktree {

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[40];
  for (int digits = 15; digits <= 17; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

double parse_number(const std::string& token) {
  if (token == "inf" || token == "+inf") return kInf;
  const char* begin = token.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (token.empty() || end != begin + token.size() || errno == ERANGE || std::isnan(v) || std::isinf(v))
    throw Error(Errc::ParseError, "'" + token + "' is not a number");
  return v;
}

Vector parse_vector(const std::string& text) {
  std::string cleaned = text;
  for (char& ch : cleaned)
    if (ch == ',' || ch == ';') ch = ' ';
  std::istringstream in(cleaned);
  std::vector<double> values;
  std::string tok;
  while (in >> tok) values.push_back(parse_number(tok));
  if (values.empty()) throw Error(Errc::ParseError, "empty vector");
  return Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
}

Vector load_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open " + path);
  std::ostringstream all;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    all << line.substr(0, hash) << '\n';
  }
  return parse_vector(all.str());
}

namespace {

struct Line {
  int number = 0;
  std::vector<std::string> tokens;
};

std::vector<Line> tokenize(std::istream& in) {
  std::vector<Line> out;
  std::string text;
  int number = 0;
  while (std::getline(in, text)) {
    ++number;
    const auto hash = text.find('#');
    if (hash != std::string::npos) text.resize(hash);
    std::istringstream ss(text);
    Line line{number, {}};
    std::string tok;
    while (ss >> tok) line.tokens.push_back(tok);
    if (!line.tokens.empty()) out.push_back(std::move(line));
  }
  return out;
}

[[noreturn]] void fail(const std::string& source, int line, const std::string& what) {
  throw Error(Errc::ParseError, source + ":" + std::to_string(line) + ": " + what);
}

class Reader {
 public:
  Reader(std::istream& in, std::string source) : lines_(tokenize(in)), source_(std::move(source)) {}

  bool done() const { return pos_ >= lines_.size(); }
  const Line& peek() const { return lines_[pos_]; }
  const Line& next() { return lines_[pos_++]; }
  int last_line() const { return lines_.empty() ? 0 : lines_.back().number; }
  const std::string& source() const { return source_; }

  [[noreturn]] void fail_at(const Line& line, const std::string& what) const { fail(source_, line.number, what); }

  double number(const Line& line, std::size_t i) const {
    if (i >= line.tokens.size()) fail_at(line, "missing value after '" + line.tokens.front() + "'");
    try {
      return parse_number(line.tokens[i]);
    } catch (const Error& e) {
      fail_at(line, e.what());
    }
  }

  int integer(const Line& line, std::size_t i) const {
    const double v = number(line, i);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail_at(line, "'" + line.tokens[i] + "' is not an integer");
    return static_cast<int>(v);
  }

  Vector values(const Line& line, std::size_t from, Index expected, const std::string& what) const {
    const Index n = static_cast<Index>(line.tokens.size()) - static_cast<Index>(from);
    if (expected >= 0 && n != expected)
      fail_at(line, what + " needs " + std::to_string(expected) + " values, got " + std::to_string(std::max<Index>(n, 0)));
    Vector v(std::max<Index>(n, 0));
    for (Index i = 0; i < v.size(); ++i) v[i] = number(line, from + static_cast<std::size_t>(i));
    return v;
  }

  void header(const char* kind) {
    if (done()) fail(source_, 1, std::string("empty file, expected '") + kind + " 1'");
    const Line& h = next();
    if (h.tokens.front() != kind) fail_at(h, std::string("expected header '") + kind + " 1'");
    if (h.tokens.size() != 2 || h.tokens[1] != "1") fail_at(h, "unsupported format version");
  }

  /// horizon, branching and weights, in this order.
  FilteredSpace tree() {
    TreeSpec spec;
    bool have_horizon = false, have_branching = false;
    while (!done()) {
      const Line& line = next();
      const std::string& key = line.tokens.front();
      if (key == "horizon") {
        if (line.tokens.size() != 2) fail_at(line, "horizon takes one value");
        spec.horizon = integer(line, 1);
        have_horizon = true;
      } else if (key == "branching") {
        if (!have_horizon) fail_at(line, "branching before horizon");
        for (std::size_t i = 1; i < line.tokens.size(); ++i) spec.branching.push_back(integer(line, i));
        have_branching = true;
      } else if (key == "weights") {
        if (!have_horizon || !have_branching) fail_at(line, "weights before horizon and branching");
        try {
          if (line.tokens.size() == 2 && line.tokens[1] == "uniform") {
            spec.weights = Vector::Ones(count_leaves(spec, line));
            spec.weights /= static_cast<double>(spec.weights.size());
          } else {
            spec.weights = values(line, 1, -1, "weights");
          }
          return FilteredSpace::build(spec);
        } catch (const Error& e) {
          if (e.code() == Errc::ParseError) throw;
          fail_at(line, e.what());
        }
      } else {
        fail_at(line, "unexpected '" + key + "' before the tree is complete");
      }
    }
    fail(source_, last_line(), "tree definition incomplete");
  }

 private:
  Index count_leaves(const TreeSpec& spec, const Line& line) const {
    std::size_t next = 0;
    Index leaves = 0;
    auto visit = [&](auto&& self, int depth) -> void {
      if (depth == spec.horizon) {
        ++leaves;
        return;
      }
      if (next >= spec.branching.size()) fail_at(line, "branching list ends before the tree is complete");
      const int b = spec.branching[next++];
      if (b < 1) fail_at(line, "branching factors must be positive");
      for (int i = 0; i < b; ++i) self(self, depth + 1);
    };
    if (spec.horizon < 1) fail_at(line, "horizon must be at least 1");
    visit(visit, 0);
    return leaves;
  }

  std::vector<Line> lines_;
  std::size_t pos_ = 0;
  std::string source_;
};

const char* normalization_name(Normalization n) {
  switch (n) {
    case Normalization::Verify: return "verify";
    case Normalization::Shift: return "shift";
    case Normalization::Skip: return "skip";
  }
  return "verify";
}

Normalization parse_normalization(const Reader& r, const Line& line) {
  if (line.tokens.size() != 2) r.fail_at(line, "normalization takes one of verify, shift, skip");
  const std::string& v = line.tokens[1];
  if (v == "verify") return Normalization::Verify;
  if (v == "shift") return Normalization::Shift;
  if (v == "skip") return Normalization::Skip;
  r.fail_at(line, "unknown normalization '" + v + "'");
}

void write_values(std::ostream& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) out << ' ' << format_number(v[i]);
}

struct PendingPair {
  int line = 0;
  std::optional<TreeMeasure> q;
  std::optional<std::vector<double>> factors;
  std::map<std::pair<int, int>, NodeValues> d;
  std::map<std::pair<int, int>, NodeValues> c;
  std::map<int, NodeValues> pi;
};

std::pair<int, int> time_pair(const Reader& r, const Line& line, const FilteredSpace& space) {
  const int t = r.integer(line, 1);
  const int u = r.integer(line, 2);
  if (t < 0 || t > u || u > space.horizon())
    r.fail_at(line, "time pair (" + std::to_string(t) + "," + std::to_string(u) + ") not ordered in 0.." +
                        std::to_string(space.horizon()));
  return {t, u};
}

}  // namespace

FilteredSpace read_tree(std::istream& in, const std::string& source) {
  Reader r(in, source);
  r.header("risktree-tree");
  FilteredSpace space = r.tree();
  if (!r.done()) r.fail_at(r.peek(), "unexpected '" + r.peek().tokens.front() + "' after the tree");
  return space;
}

static void write_tree_lines(std::ostream& out, const FilteredSpace& space) {
  const TreeSpec& spec = space.spec();
  out << "horizon " << spec.horizon << '\n' << "branching";
  for (int b : spec.branching) out << ' ' << b;
  out << '\n' << "weights";
  write_values(out, space.p());
  out << '\n';
}

void write_tree(std::ostream& out, const FilteredSpace& space) {
  out << "risktree-tree 1\n";
  write_tree_lines(out, space);
}

DualModel read_model(std::istream& in, const std::string& source) {
  Reader r(in, source);
  r.header("risktree-model");
  const FilteredSpace space = r.tree();
  const int T = space.horizon();

  ModelOptions opts;
  bool put_premium = false;
  std::map<int, NodeValues> gamma;
  int gamma_line = 0;
  std::vector<PendingPair> pending;

  while (!r.done()) {
    const Line& line = r.next();
    const std::string& key = line.tokens.front();
    if (key == "kind") {
      if (line.tokens.size() != 2 || (line.tokens[1] != "dual" && line.tokens[1] != "put-premium"))
        r.fail_at(line, "kind is dual or put-premium");
      put_premium = line.tokens[1] == "put-premium";
    } else if (key == "normalization") {
      opts.normalization = parse_normalization(r, line);
    } else if (key == "equivalent") {
      if (line.tokens.size() != 2 || (line.tokens[1] != "yes" && line.tokens[1] != "no"))
        r.fail_at(line, "equivalent is yes or no");
      opts.require_equivalent = line.tokens[1] == "yes";
    } else if (key == "gamma") {
      const int t = r.integer(line, 1);
      if (t < 0 || t > T) r.fail_at(line, "gamma level out of range");
      gamma[t] = r.values(line, 2, space.atom_count(t), "gamma at level " + std::to_string(t));
      gamma_line = line.number;
    } else if (key == "pair") {
      if (line.tokens.size() != 1) r.fail_at(line, "pair takes no values");
      PendingPair p;
      p.line = line.number;
      bool closed = false;
      while (!r.done()) {
        const Line& item = r.next();
        const std::string& k = item.tokens.front();
        if (k == "end") {
          closed = true;
          break;
        }
        if (k == "q") {
          if (item.tokens.size() == 2 && item.tokens[1] == "reference") {
            p.q = TreeMeasure::reference(space);
          } else {
            try {
              p.q = TreeMeasure::from_weights(space, r.values(item, 1, space.leaves(), "q"));
            } catch (const Error& e) {
              if (e.code() == Errc::ParseError) throw;
              r.fail_at(item, e.what());
            }
          }
        } else if (k == "factors") {
          const Vector f = r.values(item, 1, T, "factors");
          p.factors = std::vector<double>(f.data(), f.data() + f.size());
        } else if (k == "d" || k == "c") {
          const auto tu = time_pair(r, item, space);
          const NodeValues v = r.values(item, 3, space.atom_count(tu.first), k + " table");
          (k == "d" ? p.d : p.c)[tu] = v;
        } else if (k == "pi") {
          const int t = r.integer(item, 1);
          if (t < 0 || t >= T) r.fail_at(item, "one-step penalty level must be in 0..T-1");
          p.pi[t] = r.values(item, 2, space.atom_count(t), "pi");
        } else {
          r.fail_at(item, "unexpected '" + k + "' inside pair");
        }
      }
      if (!closed) fail(r.source(), r.last_line(), "pair opened at line " + std::to_string(p.line) + " has no end");
      pending.push_back(std::move(p));
    } else {
      r.fail_at(line, "unexpected '" + key + "'");
    }
  }

  std::optional<PutPremiumForm> form;
  if (put_premium) {
    PutPremiumForm f;
    for (int t = 0; t <= T; ++t) {
      if (!gamma.count(t))
        fail(r.source(), gamma_line ? gamma_line : r.last_line(), "gamma missing for level " + std::to_string(t));
      f.gamma.push_back(gamma[t]);
    }
    form = std::move(f);
  } else if (!gamma.empty()) {
    fail(r.source(), gamma_line, "gamma only applies to kind put-premium");
  }

  const bool cocycle = !pending.empty() && !pending.front().pi.empty();
  std::vector<DualPair> pairs;
  PenaltyTerm penalty;
  OneStepPenalties one_step;
  for (const auto& p : pending) {
    if (cocycle != !p.pi.empty()) fail(r.source(), p.line, "either every pair or no pair uses one-step penalties");
    if (cocycle && !p.c.empty()) fail(r.source(), p.line, "a pair cannot mix c tables with one-step penalties");
    NodeTable d(T);
    try {
      d = p.factors ? product_discount(space, *p.factors) : NodeTable(T);
    } catch (const Error& e) {
      fail(r.source(), p.line, e.what());
    }
    NodeTable c(T);
    for (int t = 0; t <= T; ++t)
      for (int u = t; u <= T; ++u) {
        if (!p.factors) d.at(t, u) = NodeValues::Ones(space.atom_count(t));
        c.at(t, u) = NodeValues::Zero(space.atom_count(t));
      }
    for (const auto& [tu, v] : p.d) d.at(tu.first, tu.second) = v;
    for (const auto& [tu, v] : p.c) c.at(tu.first, tu.second) = v;
    if (cocycle) {
      std::vector<NodeValues> steps;
      for (int t = 0; t < T; ++t) {
        if (!p.pi.count(t)) fail(r.source(), p.line, "pi missing for level " + std::to_string(t));
        steps.push_back(p.pi.at(t));
      }
      one_step.push_back(std::move(steps));
    }
    pairs.push_back({p.q ? *p.q : TreeMeasure::reference(space), std::move(d)});
    penalty.push_back(std::move(c));
  }
  try {
    if (cocycle) penalty = build_cocycle_penalty(space, pairs, one_step);
    return DualModel::create(space, std::move(pairs), std::move(penalty), opts, std::move(form));
  } catch (const Error& e) {
    fail(r.source(), pending.empty() ? r.last_line() : pending.front().line, e.what());
  }
}

DualModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open " + path);
  return read_model(in, path);
}

void write_model(std::ostream& out, const DualModel& model) {
  const int T = model.horizon();
  out << "risktree-model 1\n";
  write_tree_lines(out, model.space());
  out << "kind " << (model.closed_form() ? "put-premium" : "dual") << '\n';
  out << "normalization " << normalization_name(model.options().normalization) << '\n';
  out << "equivalent " << (model.options().require_equivalent ? "yes" : "no") << '\n';
  if (model.closed_form())
    for (int t = 0; t <= T; ++t) {
      out << "gamma " << t;
      write_values(out, model.closed_form()->gamma[static_cast<std::size_t>(t)]);
      out << '\n';
    }
  for (Index k = 0; k < model.pair_count(); ++k) {
    const auto& pair = model.pairs()[static_cast<std::size_t>(k)];
    const auto& c = model.penalty()[static_cast<std::size_t>(k)];
    out << "\npair\nq";
    write_values(out, pair.q.weights());
    out << '\n';
    for (int t = 0; t <= T; ++t)
      for (int u = t; u <= T; ++u) {
        out << "d " << t << ' ' << u;
        write_values(out, pair.discount.at(t, u));
        out << '\n';
      }
    for (int t = 0; t <= T; ++t)
      for (int u = t; u <= T; ++u) {
        out << "c " << t << ' ' << u;
        write_values(out, c.at(t, u));
        out << '\n';
      }
    out << "end\n";
  }
}

std::string model_to_string(const DualModel& model) {
  std::ostringstream out;
  write_model(out, model);
  return out.str();
}

StaticRiskMeasure read_dictionary(std::istream& in, const std::string& source) {
  Reader r(in, source);
  r.header("risktree-dictionary");
  FilteredSpace space = r.tree();
  Normalization norm = Normalization::Verify;
  std::vector<DualEntry> entries;
  int first_entry = 0;
  while (!r.done()) {
    const Line& line = r.next();
    const std::string& key = line.tokens.front();
    if (key == "normalization") {
      norm = parse_normalization(r, line);
    } else if (key == "entry") {
      if (!first_entry) first_entry = line.number;
      const double a = r.number(line, 1);
      const double c = r.number(line, 2);
      DualEntry e;
      e.penalty = c;
      e.mu.a = a;
      try {
        if (line.tokens.size() == 4 && line.tokens[3] == "reference")
          e.mu.q = TreeMeasure::reference(space);
        else
          e.mu.q = TreeMeasure::from_weights(space, r.values(line, 3, space.leaves(), "entry measure"));
      } catch (const Error& err) {
        if (err.code() == Errc::ParseError) throw;
        r.fail_at(line, err.what());
      }
      entries.push_back(std::move(e));
    } else {
      r.fail_at(line, "unexpected '" + key + "'");
    }
  }
  try {
    DualDictionary dict = DualDictionary::create(space, std::move(entries), norm);
    return {std::move(space), std::move(dict)};
  } catch (const Error& e) {
    fail(r.source(), first_entry ? first_entry : r.last_line(), e.what());
  }
}

StaticRiskMeasure load_dictionary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open " + path);
  return read_dictionary(in, path);
}

void write_dictionary(std::ostream& out, const StaticRiskMeasure& rm) {
  out << "risktree-dictionary 1\n";
  write_tree_lines(out, rm.space);
  out << "normalization verify\n";
  for (const auto& e : rm.dictionary.entries()) {
    out << "entry " << format_number(e.mu.a) << ' ' << format_number(e.penalty);
    write_values(out, e.mu.q.weights());
    out << '\n';
  }
}

std::string file_kind(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open " + path);
  const auto lines = tokenize(in);
  if (lines.empty()) throw Error(Errc::ParseError, path + ": empty file");
  return lines.front().tokens.front();
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

nlohmann::ordered_json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

}  // namespace

void write_report_csv(std::ostream& out, const ConsistencyReport& report) {
  out << "check,scope,verdict,violation,witness,non_vacuous,informational\n";
  for (const auto& c : report.checks)
    for (const auto& s : c.scopes)
      out << csv_field(c.name) << ',' << csv_field(s.scope) << ',' << (s.pass ? "pass" : "fail") << ','
          << format_number(s.violation) << ',' << csv_field(s.witness.id) << ',' << c.non_vacuous << ','
          << (c.informational ? "yes" : "no") << '\n';
}

void write_report_json(std::ostream& out, const ConsistencyReport& report) {
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["pass"] = report.pass();
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : report.checks) {
    nlohmann::ordered_json cj;
    cj["name"] = c.name;
    cj["pass"] = c.pass();
    cj["informational"] = c.informational;
    cj["tolerance"] = c.tolerance;
    cj["worst_violation"] = json_number(c.worst());
    const ScopeResult* w = c.worst_scope();
    cj["worst_scope"] = w ? w->scope : "";
    cj["tested"] = c.tested;
    cj["non_vacuous"] = c.non_vacuous;
    cj["scopes"] = nlohmann::ordered_json::array();
    for (const auto& s : c.scopes) {
      nlohmann::ordered_json sj;
      sj["scope"] = s.scope;
      sj["verdict"] = s.pass ? "pass" : "fail";
      sj["violation"] = json_number(s.violation);
      sj["witness"] = s.witness.id;
      if (!s.witness.inputs.empty()) {
        nlohmann::ordered_json in;
        for (const auto& [name, v] : s.witness.inputs) {
          auto arr = nlohmann::ordered_json::array();
          for (Index i = 0; i < v.size(); ++i) arr.push_back(json_number(v[i]));
          in[name] = arr;
        }
        sj["inputs"] = in;
      }
      cj["scopes"].push_back(sj);
    }
    j["checks"].push_back(cj);
  }
  out << j.dump(2) << '\n';
}

void write_report_table(std::ostream& out, const ConsistencyReport& report) {
  std::size_t wname = 5, wscope = 5;
  for (const auto& c : report.checks) {
    wname = std::max(wname, c.name.size() + (c.informational ? 7 : 0));
    for (const auto& s : c.scopes) wscope = std::max(wscope, s.scope.size());
  }
  out << std::left << std::setw(static_cast<int>(wname)) << "check" << "  verdict  " << std::setw(24) << "worst"
      << "  " << std::setw(static_cast<int>(wscope)) << "scope" << "  non-vacuous  witness\n";
  for (const auto& c : report.checks) {
    const ScopeResult* s = c.worst_scope();
    out << std::setw(static_cast<int>(wname)) << (c.informational ? c.name + " (info)" : c.name) << "  "
        << std::setw(7) << (c.pass() ? "pass" : "fail") << "  " << std::setw(24) << format_number(c.worst())
        << "  " << std::setw(static_cast<int>(wscope)) << (s ? s->scope : "-") << "  " << std::setw(11)
        << c.non_vacuous << "  " << (s ? s->witness.id : "") << '\n';
    if (c.scopes.size() < 2) continue;
    for (const auto& sc : c.scopes)
      out << std::setw(static_cast<int>(wname)) << "" << "  " << std::setw(7) << (sc.pass ? "pass" : "fail") << "  "
          << std::setw(24) << format_number(sc.violation) << "  " << std::setw(static_cast<int>(wscope)) << sc.scope
          << "  " << std::setw(11) << "" << "  " << sc.witness.id << '\n';
  }
  out << "overall: " << (report.pass() ? "pass" : "fail") << '\n';
}

}  // namespace risktree
