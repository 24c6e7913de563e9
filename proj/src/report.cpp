#include "risktree/report.hpp"

#include <algorithm>

namespace risktree {

const Vector* Witness::find(const std::string& name) const {
  for (const auto& [key, value] : inputs)
    if (key == name) return &value;
  return nullptr;
}

bool CheckResult::pass() const {
  return std::all_of(scopes.begin(), scopes.end(), [](const ScopeResult& s) { return s.pass; });
}

double CheckResult::worst() const {
  double w = 0.0;
  for (const auto& s : scopes) w = std::max(w, s.violation);
  return w;
}

const ScopeResult* CheckResult::worst_scope() const {
  const ScopeResult* best = nullptr;
  for (const auto& s : scopes)
    if (!best || s.violation > best->violation) best = &s;
  return best;
}

const ScopeResult* CheckResult::find(const std::string& scope) const {
  for (const auto& s : scopes)
    if (s.scope == scope) return &s;
  return nullptr;
}

void CheckResult::record(const std::string& scope, double violation, Witness witness) {
  auto it = std::find_if(scopes.begin(), scopes.end(),
                         [&](const ScopeResult& s) { return s.scope == scope; });
  if (it == scopes.end()) {
    scopes.push_back({scope, true, 0.0, {}});
    it = scopes.end() - 1;
    it->violation = violation;
    it->witness = std::move(witness);
  } else if (violation > it->violation ||
             (violation == it->violation && witness.id < it->witness.id)) {
    it->violation = violation;
    it->witness = std::move(witness);
  }
  it->pass = !(it->violation > tolerance);
}

bool ConsistencyReport::pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.informational || c.pass(); });
}

const CheckResult* ConsistencyReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

CheckResult& ConsistencyReport::add(CheckResult check) {
  checks.push_back(std::move(check));
  return checks.back();
}

void ConsistencyReport::merge(const ConsistencyReport& other) {
  for (const auto& c : other.checks) {
    auto it = std::find_if(checks.begin(), checks.end(),
                           [&](const CheckResult& x) { return x.name == c.name; });
    if (it == checks.end()) {
      checks.push_back(c);
      continue;
    }
    it->tested += c.tested;
    it->non_vacuous += c.non_vacuous;
    for (const auto& s : c.scopes) it->record(s.scope, s.violation, s.witness);
  }
}

void ConsistencyReport::canonicalize() {
  for (auto& c : checks)
    std::sort(c.scopes.begin(), c.scopes.end(),
              [](const ScopeResult& a, const ScopeResult& b) { return a.scope < b.scope; });
  std::stable_sort(checks.begin(), checks.end(),
                   [](const CheckResult& a, const CheckResult& b) { return a.name < b.name; });
}

}  // namespace risktree
