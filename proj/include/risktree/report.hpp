#ifndef RISKTREE_REPORT_HPP_
#define RISKTREE_REPORT_HPP_

#include <string>
#include <utility>
#include <vector>

#include "risktree/tree.hpp"

namespace risktree {

/// Inputs that realise a reported violation, stored by name so a caller can
/// re-evaluate the check.
struct Witness {
  std::string id;
  std::vector<std::pair<std::string, Vector>> inputs;

  const Vector* find(const std::string& name) const;
};

/// One scope item (a time triple, a pair index, an axiom instance family).
struct ScopeResult {
  std::string scope;
  bool pass = true;
  double violation = 0.0;
  Witness witness;
};

struct CheckResult {
  std::string name;
  std::vector<ScopeResult> scopes;
  double tolerance = kDefaultTol;
  long tested = 0;
  long non_vacuous = 0;
  /// Informational checks are reported but do not affect the overall verdict.
  bool informational = false;

  bool pass() const;
  double worst() const;
  const ScopeResult* worst_scope() const;
  const ScopeResult* find(const std::string& scope) const;

  /// Records a violation for `scope`; keeps the worse of the existing and new
  /// value (ties keep the existing witness so merging is order-independent
  /// once witnesses are canonicalised by id).
  void record(const std::string& scope, double violation, Witness witness);
};

struct ConsistencyReport {
  std::vector<CheckResult> checks;

  bool pass() const;
  const CheckResult* find(const std::string& name) const;
  CheckResult& add(CheckResult check);
  void merge(const ConsistencyReport& other);

  /// Sorts checks by name and scopes by label; the canonical output order.
  void canonicalize();
};

}  // namespace risktree

#endif  // RISKTREE_REPORT_HPP_
