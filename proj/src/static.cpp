#include "risktree/static.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "risktree/simplex.hpp"

namespace risktree {

DualDictionary DualDictionary::create(const FilteredSpace& space, std::vector<DualEntry> entries,
                                      Normalization norm) {
  if (entries.empty()) throw Error(Errc::InvalidDictionary, "dictionary has no entries");
  double lowest = kInf;
  for (const auto& e : entries) {
    check_size(space, e.mu.q.weights(), "dictionary measure");
    if (!(e.mu.a >= 0.0 && e.mu.a <= 1.0))
      throw Error(Errc::InvalidDictionary, "mass a = " + std::to_string(e.mu.a) + " outside [0, 1]");
    if (std::isnan(e.penalty) || e.penalty < 0.0)
      throw Error(Errc::InvalidDictionary, "penalty must be a non-negative number or +inf");
    lowest = std::min(lowest, e.penalty);
  }
  if (!std::isfinite(lowest)) throw Error(Errc::InvalidDictionary, "every penalty is +inf");
  if (norm == Normalization::Verify && std::abs(lowest) > kConstructionTol)
    throw Error(Errc::InvalidDictionary,
                "smallest penalty is " + std::to_string(lowest) + ", normalisation needs 0");
  if (norm == Normalization::Shift)
    for (auto& e : entries) e.penalty -= lowest;

  DualDictionary d;
  d.entries_ = std::move(entries);
  const auto finite = std::count_if(d.entries_.begin(), d.entries_.end(),
                                    [](const DualEntry& e) { return std::isfinite(e.penalty); });
  d.measures_.resize(finite, space.leaves());
  d.penalties_.resize(finite);
  Index row = 0;
  for (const auto& e : d.entries_) {
    if (!std::isfinite(e.penalty)) continue;
    d.measures_.row(row) = e.mu.raw().transpose();
    d.penalties_[row] = e.penalty;
    ++row;
  }
  return d;
}

double StaticRiskMeasure::operator()(const RandomVariable& x) const { return eval_static_rho(*this, x); }

double eval_static_rho(const StaticRiskMeasure& rm, const RandomVariable& x) {
  check_size(rm.space, x, "position");
  const Vector values = rm.dictionary.finite_measures() * (-x) - rm.dictionary.finite_penalties();
  return values.maxCoeff();
}

double minimal_penalty_hull(const Matrix& measures, const Vector& penalties, const Vector& mu) {
  std::vector<Index> rows;
  for (Index k = 0; k < measures.rows(); ++k)
    if (std::isfinite(penalties[k])) rows.push_back(k);
  if (rows.empty()) return kInf;
  const Index n = measures.cols();
  const auto K = static_cast<Index>(rows.size());
  Matrix A(n + 1, K);
  Vector c(K);
  for (Index j = 0; j < K; ++j) {
    A.col(j).head(n) = measures.row(rows[static_cast<std::size_t>(j)]).transpose();
    A(n, j) = 1.0;
    c[j] = penalties[rows[static_cast<std::size_t>(j)]];
  }
  Vector b(n + 1);
  b.head(n) = mu;
  b[n] = 1.0;
  const auto res = solve_standard_lp<double>(A, b, c);
  if (res.status != LpStatus::Optimal) return kInf;
  return std::max(0.0, res.objective);
}

double minimal_penalty_static(const StaticRiskMeasure& rm, const Vector& mu) {
  check_size(rm.space, mu, "target measure");
  return minimal_penalty_hull(rm.dictionary.finite_measures(), rm.dictionary.finite_penalties(), mu);
}

double minimal_penalty_static(const StaticRiskMeasure& rm, const SubProbability& mu) {
  return minimal_penalty_static(rm, mu.raw());
}

double conjugate_primal_lp(const std::vector<AffineGroup>& groups, const Vector& mu) {
  const Index n = mu.size();
  const auto G = static_cast<Index>(groups.size());
  Index rows = 0;
  for (const auto& g : groups) {
    if (g.measures.cols() != n) throw Error(Errc::SpaceMismatch, "affine group width differs from target");
    Index finite = 0;
    for (Index k = 0; k < g.penalties.size(); ++k)
      if (std::isfinite(g.penalties[k])) ++finite;
    if (finite == 0) throw Error(Errc::InvalidModel, "affine group without a finite penalty");
    rows += finite;
  }
  // Columns: Y+ (n), Y- (n), tau+ (G), tau- (G), slack (rows). Y stands for -X.
  const Index cols = 2 * n + 2 * G + rows;
  Matrix A = Matrix::Zero(rows, cols);
  Vector b(rows);
  Vector c = Vector::Zero(cols);
  c.head(n) = -mu;
  c.segment(n, n) = mu;
  Index r = 0;
  for (Index g = 0; g < G; ++g) {
    const auto& grp = groups[static_cast<std::size_t>(g)];
    c[2 * n + g] = grp.weight;
    c[2 * n + G + g] = -grp.weight;
    for (Index k = 0; k < grp.measures.rows(); ++k) {
      if (!std::isfinite(grp.penalties[k])) continue;
      A.row(r).head(n) = grp.measures.row(k);
      A.row(r).segment(n, n) = -grp.measures.row(k);
      A(r, 2 * n + g) = -1.0;
      A(r, 2 * n + G + g) = 1.0;
      A(r, 2 * n + 2 * G + r) = 1.0;
      b[r] = grp.penalties[k];
      ++r;
    }
  }
  const auto res = solve_standard_lp<double>(A, b, c);
  if (res.status == LpStatus::Unbounded) return kInf;
  if (res.status == LpStatus::Infeasible) throw Error(Errc::InvalidModel, "primal conjugate LP infeasible");
  return -res.objective;
}

SubProbability decompose_subprobability(const FilteredSpace& space, const Vector& raw) {
  check_size(space, raw, "sub-probability");
  if ((raw.array() < 0.0).any()) throw Error(Errc::InvalidMeasure, "sub-probability has a negative weight");
  const double a = raw.sum();
  if (a > 1.0 + kConstructionTol)
    throw Error(Errc::MassExceedsOne, "total mass " + std::to_string(a) + " exceeds one");
  SubProbability out;
  if (a <= 0.0) {
    out.a = 0.0;
    out.q = TreeMeasure::reference(space);
    out.unique = false;
    return out;
  }
  out.a = std::min(a, 1.0);
  out.q = TreeMeasure::from_weights(space, raw / a);
  return out;
}

namespace {

struct ConjugateObjective {
  const Matrix& m;
  const Vector& c;
  const Vector& mu;

  // E_mu[-X] - rho(X), written in Y = -X.
  double operator()(const Vector& y) const { return mu.dot(y) - (m * y - c).maxCoeff(); }

  double smooth(const Vector& y, double beta, Vector* grad) const {
    const Vector s = m * y - c;
    const double top = s.maxCoeff();
    const Vector e = (beta * (s.array() - top)).exp().matrix();
    const double z = e.sum();
    if (grad) *grad = mu - m.transpose() * (e / z);
    return mu.dot(y) - (top + std::log(z) / beta);
  }
};

Vector clamp_box(Vector y, double box) { return y.cwiseMax(-box).cwiseMin(box); }

}  // namespace

double conjugate_grid_oracle(const StaticRiskMeasure& rm, const Vector& mu, double box, int n,
                             const OracleOptions& opts) {
  check_size(rm.space, mu, "target measure");
  if (!(box > 0.0) || n < 2) throw Error(Errc::PreconditionNotMet, "oracle needs box > 0 and n >= 2");
  const Index leaves = rm.space.leaves();
  if (leaves * static_cast<long>(n) > opts.budget)
    throw Error(Errc::GridTooLarge, "leaves * n = " + std::to_string(leaves * n) +
                                        " exceeds budget " + std::to_string(opts.budget));
  const ConjugateObjective f{rm.dictionary.finite_measures(), rm.dictionary.finite_penalties(), mu};
  const double step = 2.0 * box / (n - 1);
  auto grid = [&](int k) { return -box + step * k; };

  std::mt19937_64 rng(opts.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  double best = -kInf;
  Vector best_y = Vector::Zero(leaves);

  for (int start = 0; start <= opts.restarts; ++start) {
    std::vector<int> idx(static_cast<std::size_t>(leaves), (n - 1) / 2);
    if (start > 0)
      for (auto& k : idx) k = pick(rng);
    Vector y(leaves);
    for (Index i = 0; i < leaves; ++i) y[i] = grid(idx[static_cast<std::size_t>(i)]);
    double value = f(y);
    for (bool improved = true; improved;) {
      improved = false;
      for (Index i = 0; i < leaves; ++i) {
        int arg = idx[static_cast<std::size_t>(i)];
        for (int k = 0; k < n; ++k) {
          y[i] = grid(k);
          const double v = f(y);
          if (v > value + 1e-15) {
            value = v;
            arg = k;
            improved = true;
          }
        }
        idx[static_cast<std::size_t>(i)] = arg;
        y[i] = grid(arg);
      }
    }
    if (value > best) {
      best = value;
      best_y = y;
    }
  }

  // Projected gradient ascent on the log-sum-exp smoothing, sharpening beta.
  Vector y = best_y;
  for (double beta : {1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6}) {
    double lr = 1.0;
    for (int it = 0; it < 400; ++it) {
      Vector g;
      const double fy = f.smooth(y, beta, &g);
      bool moved = false;
      while (lr > 1e-14) {
        const Vector next = clamp_box(y + lr * g, box);
        const Vector d = next - y;
        if (d.squaredNorm() == 0.0) break;
        const double fn = f.smooth(next, beta, nullptr);
        if (fn >= fy + g.dot(d) - d.squaredNorm() / (2.0 * lr)) {
          y = next;
          moved = true;
          lr *= 2.0;
          break;
        }
        lr *= 0.5;
      }
      best = std::max(best, f(y));
      if (!moved) break;
    }
  }
  return best;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ConsistencyReport check_static_axioms(const ScalarFunctional& rho, const FilteredSpace& space,
                                      const std::vector<RandomVariable>& battery,
                                      const StaticAxiomOptions& opts) {
  if (battery.empty()) throw Error(Errc::EmptyBattery, "axiom battery is empty");
  for (const auto& x : battery) check_size(space, x, "battery member");
  const std::size_t N = battery.size();
  std::vector<double> base(N);
  for (std::size_t i = 0; i < N; ++i) base[i] = rho(battery[i]);
  const std::string scope = "t=0";

  ConsistencyReport report;
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

  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t j = (i + 1) % N;
    const auto& x = battery[i];
    const auto& y = battery[j];
    for (double l : opts.lambdas) {
      const double v = rho(l * x + (1.0 - l) * y) - l * base[i] - (1.0 - l) * base[j];
      convexity.record(scope, std::max(0.0, v),
                       {"pair(" + std::to_string(i) + "," + std::to_string(j) + ")@" + num(l),
                        {{"X", x}, {"Y", y}, {"lambda", Vector::Constant(1, l)}}});
      ++convexity.tested;
    }
    const RandomVariable hi = x.cwiseMax(y);
    monotone.record(scope, std::max(0.0, rho(hi) - base[i]),
                    {"max(" + std::to_string(i) + "," + std::to_string(j) + ")", {{"X", hi}, {"Y", x}}});
    ++monotone.tested;

    const double scale = y.cwiseAbs().maxCoeff();
    for (double m : {scale, 0.5 * scale, 1.0}) {
      const Vector shifted = x.array() + m;
      const double lhs = rho(shifted);
      Witness w{"shift(" + std::to_string(i) + ")+" + num(m), {{"X", x}, {"m", Vector::Constant(1, m)}}};
      csa.record(scope, std::max(0.0, base[i] - m - lhs), w);
      additive.record(scope, std::abs(lhs - (base[i] - m)), w);
      ++csa.tested;
      ++additive.tested;
      const double at_m = rho(Vector::Constant(space.leaves(), m));
      const double at_minus_m = rho(Vector::Constant(space.leaves(), -m));
      lower.record(scope, std::max(0.0, -m - at_m), {"m=" + num(m), {{"m", Vector::Constant(1, m)}}});
      upper.record(scope, std::max(0.0, at_minus_m - m), {"m=" + num(m), {{"m", Vector::Constant(1, m)}}});
      ++lower.tested;
      ++upper.tested;
    }
  }
  normal.record(scope, std::abs(rho(Vector::Zero(space.leaves()))), {"zero", {}});
  normal.tested = 1;

  for (auto* c : {&convexity, &monotone, &csa, &additive, &normal, &lower, &upper}) {
    c->non_vacuous = c->tested;
    report.add(std::move(*c));
  }
  report.canonicalize();
  return report;
}

ConsistencyReport check_static_axioms(const StaticRiskMeasure& rm,
                                      const std::vector<RandomVariable>& battery,
                                      const StaticAxiomOptions& opts) {
  return check_static_axioms([&rm](const RandomVariable& x) { return eval_static_rho(rm, x); },
                             rm.space, battery, opts);
}

}  // namespace risktree
