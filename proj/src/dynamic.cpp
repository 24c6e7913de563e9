#include "risktree/dynamic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace risktree {

bool NodeTable::operator==(const NodeTable& other) const {
  if (horizon() != other.horizon()) return false;
  for (int t = 0; t <= horizon(); ++t)
    for (int u = t; u <= horizon(); ++u) {
      const auto& a = at(t, u);
      const auto& b = other.at(t, u);
      if (a.size() != b.size() || a != b) return false;
    }
  return true;
}

DualModel DualModel::create(FilteredSpace space, std::vector<DualPair> pairs, PenaltyTerm penalty,
                            ModelOptions opts, std::optional<PutPremiumForm> closed_form) {
  const int T = space.horizon();
  if (pairs.empty() && !closed_form) throw Error(Errc::InvalidModel, "model has no dual pairs");
  if (penalty.size() != pairs.size())
    throw Error(Errc::InvalidModel, "penalty table count does not match pair count");
  if (closed_form) {
    if (static_cast<int>(closed_form->gamma.size()) != T + 1)
      throw Error(Errc::InvalidModel, "closed form needs gamma for every level 0..T");
    for (int t = 0; t <= T; ++t) {
      const auto& g = closed_form->gamma[static_cast<std::size_t>(t)];
      if (g.size() != space.atom_count(t))
        throw Error(Errc::SpaceMismatch, "gamma at level " + std::to_string(t) + " has wrong size");
      if (!(g.array() > 1.0).all())
        throw Error(Errc::GammaNotGreaterThanOne, "gamma must exceed 1 at level " + std::to_string(t));
    }
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& pr = pairs[k];
    check_size(space, pr.q.weights(), "pair measure");
    if (opts.require_equivalent && !pr.q.equivalent_to_p())
      throw Error(Errc::InvalidModel, "pair " + std::to_string(k) + " measure is not equivalent to P");
    if (pr.discount.horizon() != T || penalty[k].horizon() != T)
      throw Error(Errc::InvalidModel, "pair " + std::to_string(k) + " tables have the wrong horizon");
    for (int t = 0; t <= T; ++t)
      for (int u = t; u <= T; ++u) {
        const auto& d = pr.discount.at(t, u);
        const auto& c = penalty[k].at(t, u);
        if (d.size() != space.atom_count(t) || c.size() != space.atom_count(t))
          throw Error(Errc::SpaceMismatch, "pair " + std::to_string(k) + " table (" + std::to_string(t) +
                                               "," + std::to_string(u) + ") has wrong size");
        if (!((d.array() >= 0.0).all() && (d.array() <= 1.0).all()))
          throw Error(Errc::FactorOutOfRange, "discount outside [0,1] in pair " + std::to_string(k));
        for (Index a = 0; a < c.size(); ++a)
          if (std::isnan(c[a]) || c[a] < 0.0)
            throw Error(Errc::InvalidModel, "penalty negative or NaN in pair " + std::to_string(k));
      }
  }

  if (!pairs.empty()) {
    for (int t = 0; t <= T; ++t)
      for (int u = t; u <= T; ++u) {
        NodeValues low = NodeValues::Constant(space.atom_count(t), kInf);
        for (const auto& c : penalty) low = low.cwiseMin(c.at(t, u));
        if (!low.allFinite())
          throw Error(Errc::InvalidModel, "an atom at level " + std::to_string(t) +
                                              " has no finite penalty for u=" + std::to_string(u));
        if (opts.normalization == Normalization::Verify && low.cwiseAbs().maxCoeff() > kConstructionTol)
          throw Error(Errc::InvalidModel, "penalty minimum at (" + std::to_string(t) + "," +
                                              std::to_string(u) + ") is " +
                                              std::to_string(low.cwiseAbs().maxCoeff()) +
                                              ", normalisation needs 0");
        if (opts.normalization == Normalization::Shift)
          for (auto& c : penalty) c.at(t, u) -= low;
      }
  }

  DualModel m;
  m.space_ = std::move(space);
  m.pairs_ = std::move(pairs);
  m.penalty_ = std::move(penalty);
  m.opts_ = opts;
  m.closed_form_ = std::move(closed_form);
  m.cond_.resize(static_cast<std::size_t>(T + 1));
  for (int t = 0; t <= T; ++t) {
    Matrix& k = m.cond_[static_cast<std::size_t>(t)];
    k.resize(m.pair_count(), m.space_.leaves());
    for (Index p = 0; p < m.pair_count(); ++p)
      k.row(p) = conditional_weights(m.space_, m.pairs_[static_cast<std::size_t>(p)].q.weights(), t).transpose();
  }
  return m;
}

bool DualModel::all_equivalent() const {
  return std::all_of(pairs_.begin(), pairs_.end(), [](const DualPair& p) { return p.q.equivalent_to_p(); });
}

void DualModel::require_dictionary() const {
  if (pairs_.empty()) throw Error(Errc::Unsupported, "model has no pair dictionary");
}

Matrix DualModel::discount_matrix(int t, int u) const {
  Matrix d(pair_count(), space_.atom_count(t));
  for (Index k = 0; k < pair_count(); ++k)
    d.row(k) = pairs_[static_cast<std::size_t>(k)].discount.at(t, u).transpose();
  return d;
}

Matrix DualModel::penalty_matrix(int t, int u) const {
  Matrix c(pair_count(), space_.atom_count(t));
  for (Index k = 0; k < pair_count(); ++k) c.row(k) = penalty_[static_cast<std::size_t>(k)].at(t, u).transpose();
  return c;
}

Matrix DualModel::pair_values(const RandomVariable& x, int t, int u) const {
  require_dictionary();
  check_size(space_, x, "position");
  if (t < 0 || t > u || u > horizon())
    throw Error(Errc::TimeOrderViolation, "need 0 <= t <= u <= T");
  const auto atoms = space_.atoms(t);
  const Matrix& kern = cond_[static_cast<std::size_t>(t)];
  Matrix out(pair_count(), static_cast<Index>(atoms.size()));
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    const Atom& at = atoms[a];
    out.col(static_cast<Index>(a)) = -(kern.middleCols(at.begin, at.size()) * x.segment(at.begin, at.size()));
  }
  for (Index k = 0; k < pair_count(); ++k) {
    const auto& d = pairs_[static_cast<std::size_t>(k)].discount.at(t, u);
    const auto& c = penalty_[static_cast<std::size_t>(k)].at(t, u);
    for (Index a = 0; a < out.cols(); ++a)
      out(k, a) = std::isfinite(c[a]) ? d[a] * out(k, a) - c[a] : -kInf;
  }
  return out;
}

NodeValues DualModel::rho_dictionary_nodes(const RandomVariable& x, int t, int u) const {
  return pair_values(x, t, u).colwise().maxCoeff().transpose();
}

NodeValues DualModel::rho_nodes(const RandomVariable& x, int t, int u) const {
  if (!closed_form_) return rho_dictionary_nodes(x, t, u);
  check_size(space_, x, "position");
  if (t < 0 || t > u || u > horizon()) throw Error(Errc::TimeOrderViolation, "need 0 <= t <= u <= T");
  const RandomVariable loss = (-x).cwiseMax(0.0);
  return conditional_expectation_nodes(space_, loss, space_.p(), t)
      .cwiseQuotient(closed_form_->gamma[static_cast<std::size_t>(t)]);
}

RandomVariable eval_dynamic_rho(const DualModel& model, const RandomVariable& x, int t, int u) {
  return lift(model.space(), t, model.rho_nodes(x, t, u));
}

namespace {

std::size_t hash_vector(const RandomVariable& x, int t, int u) {
  std::size_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  mix(&t, sizeof t);
  mix(&u, sizeof u);
  mix(x.data(), sizeof(double) * static_cast<std::size_t>(x.size()));
  return h;
}

}  // namespace

NodeValues DynamicRiskMeasure::rho_nodes(const RandomVariable& x, int t, int u) const {
  const std::size_t key = hash_vector(x, t, u);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end())
      for (const auto& e : it->second)
        if (e.t == t && e.u == u && e.x.size() == x.size() && e.x == x) {
          ++hits_;
          return e.value;
        }
  }
  NodeValues value = model_->rho_nodes(x, t, u);
  std::lock_guard<std::mutex> lock(mutex_);
  ++misses_;
  cache_[key].push_back({t, u, x, value});
  return value;
}

RandomVariable DynamicRiskMeasure::rho(const RandomVariable& x, int t, int u) const {
  return lift(model_->space(), t, rho_nodes(x, t, u));
}

std::size_t DynamicRiskMeasure::hits() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return hits_;
}

std::size_t DynamicRiskMeasure::misses() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return misses_;
}

namespace {

/// Kernel of one pair on the atoms of level u below atom `a` of level t,
/// scaled by its discount D_{t,u}(a).
Vector restricted_point(const FilteredSpace& space, const Vector& cond_t, double discount, const Atom& top,
                        int u) {
  std::vector<double> values;
  for (Index l = top.begin; l < top.end;) {
    const Atom& b = space.atoms(u)[static_cast<std::size_t>(space.atom_of(u, l))];
    values.push_back(discount * cond_t.segment(b.begin, b.size()).sum());
    l = b.end;
  }
  return Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace

NodeValues minimal_penalty_dynamic(const DualModel& model, const DualPair& pair, int t, int u) {
  if (!model.has_dictionary()) throw Error(Errc::Unsupported, "model has no pair dictionary");
  const FilteredSpace& space = model.space();
  check_size(space, pair.q.weights(), "pair measure");
  if (t < 0 || t > u || u > space.horizon()) throw Error(Errc::TimeOrderViolation, "need 0 <= t <= u <= T");
  const auto atoms = space.atoms(t);
  const Vector target_cond = conditional_weights(space, pair.q.weights(), t);
  const Matrix& kern = model.conditional_kernel(t);
  const Matrix D = model.discount_matrix(t, u);
  const Matrix C = model.penalty_matrix(t, u);
  NodeValues out(static_cast<Index>(atoms.size()));
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    const auto ai = static_cast<Index>(a);
    const Vector mu = restricted_point(space, target_cond, pair.discount.at(t, u)[ai], atoms[a], u);
    Matrix points(model.pair_count(), mu.size());
    for (Index k = 0; k < model.pair_count(); ++k)
      points.row(k) = restricted_point(space, kern.row(k).transpose(), D(k, ai), atoms[a], u).transpose();
    out[ai] = minimal_penalty_hull(points, C.col(ai), mu);
  }
  return out;
}

NodeValues minimal_penalty_dynamic(const DualModel& model, const DualPair& pair, int t) {
  return minimal_penalty_dynamic(model, pair, t, model.horizon());
}

NodeValues minimal_penalty_dynamic(const DualModel& model, Index pair, int t, int u) {
  return minimal_penalty_dynamic(model, model.pairs().at(static_cast<std::size_t>(pair)), t, u);
}

DualModel with_minimal_penalty(const DualModel& model) {
  const int T = model.horizon();
  PenaltyTerm pen;
  for (Index k = 0; k < model.pair_count(); ++k) {
    NodeTable table(T);
    for (int t = 0; t <= T; ++t)
      for (int u = t; u <= T; ++u) table.at(t, u) = minimal_penalty_dynamic(model, k, t, u);
    pen.push_back(std::move(table));
  }
  ModelOptions opts = model.options();
  opts.normalization = Normalization::Skip;
  return DualModel::create(model.space(), model.pairs(), std::move(pen), opts);
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double positive_max(const NodeValues& v) { return std::max(0.0, v.maxCoeff()); }

}  // namespace

ConsistencyReport check_dynamic_axioms(const DualModel& model, const std::vector<RandomVariable>& battery,
                                       const DynamicAxiomOptions& opts) {
  if (battery.empty()) throw Error(Errc::EmptyBattery, "axiom battery is empty");
  const FilteredSpace& space = model.space();
  for (const auto& x : battery) check_size(space, x, "battery member");
  const int T = space.horizon();
  const std::size_t N = battery.size();

  auto make = [&](const char* name, bool informational = false) {
    CheckResult c;
    c.name = name;
    c.tolerance = opts.tol;
    c.informational = informational;
    return c;
  };
  CheckResult convexity = make("convexity");
  CheckResult monotone = make("monotonicity");
  CheckResult csa = make("cash-subadditivity");
  CheckResult additive = make("cash-additivity", true);
  CheckResult normal = make("normalization");
  CheckResult lower = make("bound-rho-m");
  CheckResult upper = make("bound-rho-minus-m");
  CheckResult identity = make("dual-shift-identity");

  for (int t = 0; t <= T; ++t) {
    const std::string scope = "t=" + std::to_string(t);
    std::vector<NodeValues> base(N);
    for (std::size_t i = 0; i < N; ++i) base[i] = model.rho_nodes(battery[i], t, T);
    const Index atoms = space.atom_count(t);

    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t j = (i + 1) % N;
      const auto& x = battery[i];
      const auto& y = battery[j];
      const std::string tag = std::to_string(i) + "," + std::to_string(j);

      const double l = opts.lambdas[i % opts.lambdas.size()];
      const NodeValues mix = model.rho_nodes(l * x + (1.0 - l) * y, t, T);
      convexity.record(scope, positive_max(mix - l * base[i] - (1.0 - l) * base[j]),
                       {"pair(" + tag + ")@" + num(l), {{"X", x}, {"Y", y}, {"lambda", Vector::Constant(1, l)}}});
      ++convexity.tested;

      const RandomVariable hi = x.cwiseMax(y);
      monotone.record(scope, positive_max(model.rho_nodes(hi, t, T) - base[i]),
                      {"max(" + tag + ")", {{"X", hi}, {"Y", x}}});
      ++monotone.tested;

      const double scale = std::max(y.cwiseAbs().maxCoeff(), 1e-3);
      const NodeValues adapted = conditional_expectation_nodes(space, y, space.p(), t).cwiseAbs();
      const NodeValues constant = NodeValues::Constant(atoms, scale);
      int variant = 0;
      for (const NodeValues& m : {constant, adapted}) {
        const RandomVariable mt = lift(space, t, m);
        const NodeValues shifted = model.rho_nodes(x + mt, t, T);
        Witness w{"shift(" + std::to_string(i) + ")#" + std::to_string(variant++) + "@t" + std::to_string(t),
                  {{"X", x}, {"m", mt}}};
        csa.record(scope, positive_max(base[i] - m - shifted), w);
        additive.record(scope, (shifted - (base[i] - m)).cwiseAbs().maxCoeff(), w);
        ++csa.tested;
        ++additive.tested;

        if (model.has_dictionary()) {
          const Matrix vals = model.pair_values(x, t, T);
          const Matrix D = model.discount_matrix(t, T);
          NodeValues rhs(atoms);
          for (Index a = 0; a < atoms; ++a) {
            double best = -kInf;
            for (Index k = 0; k < model.pair_count(); ++k)
              best = std::max(best, m[a] * (1.0 - D(k, a)) + vals(k, a));
            rhs[a] = best;
          }
          identity.record(scope, (shifted + m - rhs).cwiseAbs().maxCoeff(), w);
          ++identity.tested;
        }

        const NodeValues at_m = model.rho_nodes(mt, t, T);
        const NodeValues at_minus_m = model.rho_nodes(-mt, t, T);
        lower.record(scope, positive_max(-m - at_m), {"m#" + std::to_string(i) + "@t" + std::to_string(t), {{"m", mt}}});
        upper.record(scope, positive_max(at_minus_m - m), {"m#" + std::to_string(i) + "@t" + std::to_string(t), {{"m", mt}}});
        ++lower.tested;
        ++upper.tested;
      }
    }
    normal.record(scope, model.rho_nodes(Vector::Zero(space.leaves()), t, T).cwiseAbs().maxCoeff(),
                  {"zero@t" + std::to_string(t), {}});
    ++normal.tested;
  }

  ConsistencyReport report;
  for (auto* c : {&convexity, &monotone, &csa, &additive, &normal, &lower, &upper, &identity}) {
    if (c->tested == 0) continue;
    c->non_vacuous = c->tested;
    report.add(std::move(*c));
  }
  report.canonicalize();
  return report;
}

ConsistencyReport check_regularity(const DualModel& model, const std::vector<RegularityCase>& cases, double tol) {
  const FilteredSpace& space = model.space();
  const int T = space.horizon();
  CheckResult check;
  check.name = "regularity";
  check.tolerance = tol;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    check_time(space, c.t);
    check_size(space, c.x, "regularity X");
    check_size(space, c.y, "regularity Y");
    if (!is_measurable_event(space, c.event, c.t))
      throw Error(Errc::NotMeasurableEvent, "event is not a union of atoms at level " + std::to_string(c.t));
    const RandomVariable ind = c.event.cast<double>().matrix();
    const RandomVariable spliced = c.x.cwiseProduct(ind) + c.y.cwiseProduct(Vector::Ones(ind.size()) - ind);
    const RandomVariable lhs = eval_dynamic_rho(model, spliced, c.t, T);
    const RandomVariable rx = eval_dynamic_rho(model, c.x, c.t, T);
    const RandomVariable ry = eval_dynamic_rho(model, c.y, c.t, T);
    const RandomVariable rhs = rx.cwiseProduct(ind) + ry.cwiseProduct(Vector::Ones(ind.size()) - ind);
    check.record("t=" + std::to_string(c.t), (lhs - rhs).cwiseAbs().maxCoeff(),
                 {"case#" + std::to_string(i), {{"X", c.x}, {"Y", c.y}, {"event", ind}}});
    ++check.tested;
  }
  check.non_vacuous = check.tested;
  ConsistencyReport report;
  report.add(std::move(check));
  report.canonicalize();
  return report;
}

DiscountDecomposition discount_decomposition(const FilteredSpace& space, const SubProbability& mu, int t) {
  check_time(space, t);
  check_size(space, mu.q.weights(), "sub-probability");
  if (mu.a > 1.0 + kConstructionTol) throw Error(Errc::MassExceedsOne, "mass exceeds one");
  DiscountDecomposition out;
  out.z_t = density_process(space, mu.q, t);
  out.z_T = mu.q.weights().cwiseQuotient(space.p());
  out.null_set = out.z_t.array() <= 0.0;
  out.d = mu.a * out.z_t;
  Vector qt(space.leaves());
  for (Index l = 0; l < space.leaves(); ++l)
    qt[l] = out.null_set[l] ? space.p()[l] : mu.q.weights()[l] / out.z_t[l];
  out.q_tilde = TreeMeasure::from_weights(space, qt);
  out.bounded = (out.d.array() <= 1.0 + kConstructionTol).all();
  return out;
}

ScalarFunctional aggregate_rho0t(const DualModel& model, int t) {
  check_time(model.space(), t);
  return [&model, t](const RandomVariable& x) {
    return model.rho_nodes(x, t, model.horizon()).dot(model.space().atom_probabilities(t));
  };
}

Vector induced_subprobability(const DualModel& model, const DualPair& pair, int t) {
  const FilteredSpace& space = model.space();
  const Vector cond = conditional_weights(space, pair.q.weights(), t);
  const NodeValues weight =
      space.atom_probabilities(t).cwiseProduct(pair.discount.at(t, space.horizon()));
  return cond.cwiseProduct(lift(space, t, weight));
}

double aggregated_minimal_penalty(const DualModel& model, int t, const Vector& mu) {
  if (!model.has_dictionary()) throw Error(Errc::Unsupported, "model has no pair dictionary");
  const FilteredSpace& space = model.space();
  check_size(space, mu, "target measure");
  const int T = space.horizon();
  const auto atoms = space.atoms(t);
  const Matrix& kern = model.conditional_kernel(t);
  const Matrix D = model.discount_matrix(t, T);
  const Matrix C = model.penalty_matrix(t, T);
  std::vector<AffineGroup> groups;
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    const auto ai = static_cast<Index>(a);
    AffineGroup g;
    g.weight = space.atom_probabilities(t)[ai];
    g.measures = Matrix::Zero(model.pair_count(), space.leaves());
    for (Index k = 0; k < model.pair_count(); ++k)
      g.measures.row(k).segment(atoms[a].begin, atoms[a].size()) =
          D(k, ai) * kern.row(k).segment(atoms[a].begin, atoms[a].size());
    g.penalties = C.col(ai);
    groups.push_back(std::move(g));
  }
  return conjugate_primal_lp(groups, mu);
}

AggregationCheck penalty_aggregation_check(const DualModel& model, const DualPair& pair, int t, double tol) {
  AggregationCheck out;
  const NodeValues cbar = minimal_penalty_dynamic(model, pair, t);
  const NodeValues& pa = model.space().atom_probabilities(t);
  out.lhs = 0.0;
  for (Index a = 0; a < cbar.size(); ++a) out.lhs += std::isfinite(cbar[a]) ? pa[a] * cbar[a] : kInf;
  out.rhs = aggregated_minimal_penalty(model, t, induced_subprobability(model, pair, t));
  if (std::isinf(out.lhs) || std::isinf(out.rhs)) {
    out.pass = std::isinf(out.lhs) && std::isinf(out.rhs);
    out.gap = out.pass ? 0.0 : kInf;
  } else {
    out.gap = std::abs(out.lhs - out.rhs);
    out.pass = out.gap <= tol;
  }
  return out;
}

}  // namespace risktree
