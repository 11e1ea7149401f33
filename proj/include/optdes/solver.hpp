#pragma once

// Multiplicative weight iteration for optimal designs:
//
//   w_i <- w_i d_i(w)^lambda / sum_j w_j d_j(w)^lambda,  d_i = tr(phi'(M(w)) A_i)
//
// stopped when max_i d_i <= (1 + delta) * sum_i w_i d_i.

#include "optdes/criteria.hpp"
#include "optdes/design.hpp"
#include "optdes/directional.hpp"
#include "optdes/linalg.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace optdes {

enum class StepRule {
  Multiplicative,
  /// Closed-form centered update for D-optimality of the slopes in an
  /// intercept model; equivalent to the DK step with K = (0, I)^T, lambda = 1.
  Centered,
};

enum class SolveStatus { Converged, MaxIters, SingularM, Oscillating };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIters: return "max_iters";
    case SolveStatus::SingularM: return "singular_m";
    case SolveStatus::Oscillating: return "oscillating";
  }
  return "unknown";
}

struct SolverConfig {
  /// Constant lambda (one entry) or a per-iteration schedule; the last entry
  /// is held once the schedule runs out.
  std::vector<double> lambda{1.0};
  double delta = 1e-4;
  long max_iters = 10000;
  /// Starting measure; uniform when empty.
  std::optional<DesignMeasure> w0;
  bool record_weights = false;
  StepRule step = StepRule::Multiplicative;
  /// Stop with SolveStatus::Oscillating on a persistent 2-cycle.
  bool stop_on_oscillation = true;

  /// Config with the criterion's recommended lambda.
  static SolverConfig defaults_for(const Criterion& crit) {
    SolverConfig c;
    c.lambda = {crit.default_lambda()};
    return c;
  }

  void validate() const {
    if (lambda.empty()) throw std::invalid_argument("lambda: schedule is empty");
    for (double l : lambda)
      if (!(l > 0.0 && l <= 1.0))
        throw std::invalid_argument("lambda: value " + std::to_string(l) + " is outside (0, 1]");
    if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta: must be positive");
    if (max_iters < 1) throw std::invalid_argument("max_iters: must be at least 1");
  }
};

struct TraceRecord {
  long t = 0;
  double phi = 0.0;
  double max_d = 0.0;
  double dbar = 0.0;
  double ratio = 0.0;
  double min_eig = 0.0;  // smallest eigenvalue of M(w^t)
  Vector w;              // empty unless weights are recorded
};

struct RunTrace {
  std::vector<TraceRecord> records;
  SolveStatus status = SolveStatus::MaxIters;
};

struct SolveResult {
  DesignMeasure w;
  double phi = 0.0;
  long iterations = 0;
  RunTrace trace;
};

/// lambda at iteration t.
inline double lambda_schedule_eval(const SolverConfig& config, long t) {
  if (t < 0) throw std::invalid_argument("lambda_schedule_eval: t must be nonnegative");
  if (config.lambda.empty()) throw std::invalid_argument("lambda: schedule is empty");
  const double l = std::size_t(t) < config.lambda.size() ? config.lambda[std::size_t(t)] : config.lambda.back();
  if (!(l > 0.0 && l <= 1.0))
    throw std::invalid_argument("lambda: value " + std::to_string(l) + " at t=" + std::to_string(t) +
                                " is outside (0, 1]");
  return l;
}

/// Equivalence-theorem stopping rule; the max runs over every design point.
inline bool check_converged(const Vector& d, const DesignMeasure& w, double delta) {
  if (d.size() != w.size()) throw std::invalid_argument("check_converged: length mismatch");
  return d.maxCoeff() <= (1.0 + delta) * dbar(w, d);
}

/// Weights below this are flushed to zero after each step.
inline constexpr double kUnderflowWeight = 1e-300;

/// One multiplicative update from precomputed directional values d = d(w).
inline DesignMeasure multiplicative_step(const DesignMeasure& w, const Vector& d, double lambda) {
  if (d.size() != w.size()) throw std::invalid_argument("multiplicative_step: length mismatch");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("multiplicative_step: lambda outside (0, 1]");
  if (!d.allFinite()) throw std::domain_error("multiplicative_step: non-finite directional value");
  const double scale = d.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw std::domain_error("multiplicative_step: all directional values are zero");

  // The update is invariant to a common positive scaling of d.
  Vector num(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    double di = d[i] / scale;
    if (di < 0.0) {
      if (di >= -1e-10) di = 0.0;
      else
        throw std::domain_error("multiplicative_step: directional value d_" + std::to_string(i + 1) +
                                " = " + std::to_string(d[i]) + " is negative");
    }
    num[i] = w[i] == 0.0 ? 0.0 : w[i] * (lambda == 1.0 ? di : std::pow(di, lambda));
  }
  const double denom = num.sum();
  if (!(denom > 0.0)) throw std::domain_error("multiplicative_step: zero denominator");
  Vector next = num / denom;
  for (Eigen::Index i = 0; i < next.size(); ++i)
    if (next[i] < kUnderflowWeight) next[i] = 0.0;
  return DesignMeasure(std::move(next));
}

inline DesignMeasure multiplicative_step(const DesignProblem& problem, const DesignMeasure& w, double lambda) {
  return multiplicative_step(w, directional_values(problem, w), lambda);
}

/// Centered update for A_i = x_i x_i^T with x_i = (1, z_i):
///   w_i <- w_i (z_i - zbar)^T Mc^{-1} (z_i - zbar) / (m - 1),
/// zbar = sum w_i z_i, Mc = sum w_i (z_i - zbar)(z_i - zbar)^T.
inline DesignMeasure centered_d_step(const DesignProblem& problem, const DesignMeasure& w) {
  const Eigen::Index m = problem.dim();
  if (m < 2) throw std::invalid_argument("centered_d_step: requires m >= 2");
  if (problem.model_tag() != ModelTag::Linear)
    throw std::invalid_argument("centered_d_step: requires a linear model (A_i = x_i x_i^T)");
  if (w.size() != problem.size()) throw std::invalid_argument("centered_d_step: length mismatch");
  const auto& pts = problem.points();
  Vector zbar = Vector::Zero(m - 1);
  for (Eigen::Index i = 0; i < problem.size(); ++i) {
    const auto& x = pts[std::size_t(i)];
    if (x.size() != m || x[0] != 1.0)
      throw std::invalid_argument("centered_d_step: design point " + std::to_string(i + 1) +
                                  " does not start with an intercept 1");
    zbar += w[i] * x.tail(m - 1);
  }
  Matrix mc = Matrix::Zero(m - 1, m - 1);
  for (Eigen::Index i = 0; i < problem.size(); ++i) {
    const Vector dz = pts[std::size_t(i)].tail(m - 1) - zbar;
    mc.noalias() += w[i] * dz * dz.transpose();
  }
  const Matrix mc_inv = linalg::inverse_sym(mc);
  Vector next(problem.size());
  for (Eigen::Index i = 0; i < problem.size(); ++i) {
    const Vector dz = pts[std::size_t(i)].tail(m - 1) - zbar;
    next[i] = w[i] * dz.dot(mc_inv * dz);
  }
  // sum_i w_i q_i = tr(Mc^{-1} Mc) = m - 1; divide by the computed sum so
  // roundoff stays off the simplex constraint.
  return DesignMeasure(next / next.sum());
}

namespace detail {

inline double sup_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace detail

/// Runs the iteration to convergence, max_iters, a singular moment matrix,
/// or (optionally) a detected 2-cycle. Stopping is tested before each step;
/// `iterations` counts steps taken.
inline SolveResult solve(const DesignProblem& problem, const SolverConfig& config) {
  config.validate();
  DesignMeasure w = config.w0 ? *config.w0 : DesignMeasure::uniform(problem.size());
  if (w.size() != problem.size())
    throw std::invalid_argument("w0: has " + std::to_string(w.size()) + " weights, expected " +
                                std::to_string(problem.size()));

  SolveResult result;
  RunTrace& trace = result.trace;
  std::optional<Vector> prev1, prev2;  // w^{t-1}, w^{t-2}
  int cycle_hits = 0;
  long t = 0;
  for (;; ++t) {
    const Matrix m = moment_matrix(problem, w);
    Matrix grad;
    double phi = 0.0;
    double min_eig = 0.0;
    try {
      const auto eig = linalg::require_pd(m, "solve");
      min_eig = eig.values.minCoeff();
      grad = phi_gradient(problem.criterion(), m);
      phi = phi_value(problem.criterion(), m);
    } catch (const singular_matrix_error&) {
      trace.status = SolveStatus::SingularM;
      break;
    }
    const Vector d = directional_values(problem, grad);
    const double db = dbar(w, d);
    TraceRecord rec;
    rec.t = t;
    rec.phi = phi;
    rec.max_d = d.maxCoeff();
    rec.dbar = db;
    rec.ratio = rec.max_d / db;
    rec.min_eig = min_eig;
    if (config.record_weights) rec.w = w.weights();
    trace.records.push_back(std::move(rec));

    if (check_converged(d, w, config.delta)) {
      trace.status = SolveStatus::Converged;
      break;
    }
    if (t >= config.max_iters) {
      trace.status = SolveStatus::MaxIters;
      break;
    }
    if (config.stop_on_oscillation && prev2) {
      const bool cyc = detail::sup_diff(w.weights(), *prev2) < 1e-12 &&
                       detail::sup_diff(w.weights(), *prev1) >= 1e-12;
      cycle_hits = cyc ? cycle_hits + 1 : 0;
      if (cycle_hits >= 3) {
        trace.status = SolveStatus::Oscillating;
        break;
      }
    }

    DesignMeasure next;
    try {
      next = config.step == StepRule::Centered ? centered_d_step(problem, w)
                                               : multiplicative_step(w, d, lambda_schedule_eval(config, t));
    } catch (const singular_matrix_error&) {
      trace.status = SolveStatus::SingularM;
      break;
    }
    prev2 = std::move(prev1);
    prev1 = w.weights();
    w = std::move(next);
  }
  result.iterations = t;
  result.phi = trace.records.empty() ? std::numeric_limits<double>::quiet_NaN() : trace.records.back().phi;
  result.w = std::move(w);
  return result;
}

}  // namespace optdes
