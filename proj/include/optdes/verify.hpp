#pragma once

// Runtime audits of the multiplicative algorithm: optimality certificates,
// monotonicity and oscillation diagnostics, the auxiliary-variable
// inequality chain behind monotonicity, and a brute-force simplex oracle.

#include "optdes/criteria.hpp"
#include "optdes/design.hpp"
#include "optdes/directional.hpp"
#include "optdes/linalg.hpp"
#include "optdes/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace optdes {

// ---------------------------------------------------------------------------
// Equivalence-theorem certificate

struct OptimalityCertificate {
  bool passed = false;
  double max_d = 0.0;
  double dbar = 0.0;
  double ratio = 0.0;
  Eigen::Index worst_point_index = 0;  // 0-based argmax of d, lowest index on ties
};

inline OptimalityCertificate equivalence_certificate(const DesignProblem& problem, const DesignMeasure& w,
                                                     double delta) {
  const Vector d = directional_values(problem, w);
  OptimalityCertificate cert;
  cert.max_d = d[0];
  for (Eigen::Index i = 1; i < d.size(); ++i)
    if (d[i] > cert.max_d) {
      cert.max_d = d[i];
      cert.worst_point_index = i;
    }
  cert.dbar = dbar(w, d);
  cert.ratio = cert.max_d / cert.dbar;
  cert.passed = cert.ratio <= 1.0 + delta;
  return cert;
}

// ---------------------------------------------------------------------------
// Monotonicity

struct MonotonicityReport {
  bool monotone = true;
  std::optional<long> first_violation_iter;  // t such that phi(t+1) < phi(t) - tol
  double worst_drop = 0.0;                   // most negative increment, 0 if none
  long violations = 0;
};

/// Flags increments phi(t+1) - phi(t) < -tol * max(1, |phi(t)|).
inline MonotonicityReport monotonicity_audit(const RunTrace& trace, double tol) {
  MonotonicityReport rep;
  const auto& r = trace.records;
  for (std::size_t k = 0; k + 1 < r.size(); ++k) {
    const double inc = r[k + 1].phi - r[k].phi;
    rep.worst_drop = std::min(rep.worst_drop, inc);
    if (inc < -tol * std::max(1.0, std::abs(r[k].phi))) {
      ++rep.violations;
      if (!rep.first_violation_iter) rep.first_violation_iter = r[k].t;
      rep.monotone = false;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Oscillation

struct CycleDescription {
  long start_iter = 0;
  Vector a;  // w^{t}
  Vector b;  // w^{t+1}
};

/// Reports a 2-cycle when w^{t+2} = w^t != w^{t+1} (sup norm 1e-10) holds for
/// three consecutive t.
inline std::optional<CycleDescription> oscillation_detect(const RunTrace& trace, double tol = 1e-10) {
  const auto& r = trace.records;
  for (const auto& rec : r)
    if (rec.w.size() == 0) throw std::invalid_argument("oscillation_detect: trace has no weight snapshots");
  int run = 0;
  for (std::size_t k = 0; k + 2 < r.size(); ++k) {
    const bool hit = detail::sup_diff(r[k + 2].w, r[k].w) < tol && detail::sup_diff(r[k + 1].w, r[k].w) >= tol;
    run = hit ? run + 1 : 0;
    if (run >= 3) {
      const std::size_t s = k - 2;
      return CycleDescription{r[s].t, r[s].w, r[s + 1].w};
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Auxiliary-variable chain
//
// With Sigma = M^{-1}(w^t) and Q_i = w_i^t M^{-1}(w^t) A_i^{1/2}:
//   g(v, Q)        = psi(sum_i Q_i Q_i^T / v_i)
//   h(Sigma, v, Q) = psi(Sigma) + tr(psi'(Sigma) (sum_i Q_i Q_i^T / v_i - Sigma))
// and for a certified criterion
//   psi(M^{-1}(w^t)) >= h(Sigma, w^{t+1}, Q) >= g(w^{t+1}, Q) >= psi(M^{-1}(w^{t+1})).

/// Quantities frozen at w^t. Evaluated in extended precision: the identities
/// checked here hold to roundoff, and that roundoff scales with cond(M).
class AuxiliaryState {
public:
  using Ext = long double;
  using MatE = MatrixT<Ext>;

  AuxiliaryState(const DesignProblem& problem, const DesignMeasure& wt) : crit_(problem.criterion()) {
    if (!crit_.monotone_certified())
      throw std::invalid_argument("auxiliary chain audit: criterion " + crit_.tag() +
                                  " is not certified monotone (psi must be increasing and concave)");
    if (wt.size() != problem.size()) throw std::invalid_argument("auxiliary chain audit: length mismatch");
    const Eigen::Index m = problem.dim();
    sigma_ = linalg::inverse_sym(moment_ext(problem, wt.weights()));
    psi_sigma_ = psi_value(crit_, sigma_);
    psi_grad_ = psi_gradient(crit_, sigma_);
    constraint_ = MatE::Zero(m, m);
    for (Eigen::Index i = 0; i < problem.size(); ++i) {
      if (wt[i] == 0.0) continue;
      const MatE root = linalg::sqrt_sym(MatE(problem.infos()[std::size_t(i)].cast<Ext>()));
      const MatE qi = Ext(wt[i]) * sigma_ * root;
      index_.push_back(i);
      qq_.push_back(linalg::symmetrize(qi * qi.transpose()));
      r_.push_back(linalg::frobenius_dot(psi_grad_, qq_.back()));
      constraint_ += qi * root;  // Q G
    }
    n_ = problem.size();
    wt_ = wt.weights();
  }

  /// M(v) accumulated in extended precision.
  static MatE moment_ext(const DesignProblem& problem, const Vector& v) {
    MatE acc = MatE::Zero(problem.dim(), problem.dim());
    for (Eigen::Index i = 0; i < problem.size(); ++i)
      if (v[i] != 0.0) acc += Ext(v[i]) * problem.infos()[std::size_t(i)].cast<Ext>();
    return linalg::symmetrize(acc);
  }

  /// psi(M^{-1}(v)).
  static Ext psi_at(const DesignProblem& problem, const Vector& v) {
    return psi_value(problem.criterion(), MatE(linalg::inverse_sym(moment_ext(problem, v))));
  }

  Matrix sigma() const { return sigma_.cast<double>(); }
  double psi_sigma() const { return double(psi_sigma_); }

  /// r_i = tr(Q_i^T psi'(Sigma) Q_i), indexed like the full design space
  /// (zero off the support of w^t).
  Vector r() const {
    Vector out = Vector::Zero(n_);
    for (std::size_t k = 0; k < index_.size(); ++k) out[index_[k]] = double(r_[k]);
    return out;
  }

  /// || Q G - I ||_max (unbiasedness constraint).
  double constraint_residual() const {
    return double((constraint_ - MatE::Identity(constraint_.rows(), constraint_.cols())).cwiseAbs().maxCoeff());
  }

  /// Q Delta_v Q^T = sum_i Q_i Q_i^T / v_i over the support of w^t.
  MatE weighted_cov(const Vector& v) const {
    if (v.size() != n_) throw std::invalid_argument("auxiliary chain audit: length mismatch");
    MatE s = MatE::Zero(sigma_.rows(), sigma_.cols());
    for (std::size_t k = 0; k < index_.size(); ++k) {
      const double vi = v[index_[k]];
      if (!(vi > 0.0))
        throw std::domain_error("auxiliary chain audit: weight " + std::to_string(index_[k] + 1) +
                                " vanished on the support of w^t");
      s += qq_[k] / Ext(vi);
    }
    return linalg::symmetrize(s);
  }

  Ext g_ext(const Vector& v) const { return psi_value(crit_, weighted_cov(v)); }
  Ext h_ext(const Vector& v) const {
    return psi_sigma_ + linalg::frobenius_dot(psi_grad_, MatE(weighted_cov(v) - sigma_));
  }
  Ext psi_sigma_ext() const { return psi_sigma_; }

  double g(const Vector& v) const { return double(g_ext(v)); }
  double h(const Vector& v) const { return double(h_ext(v)); }

  /// The lambda-step rewritten as w_i <- r_i^lambda w_i^{1-2 lambda} / sum.
  Vector jensen_form_step(double lambda) const {
    VectorT<Ext> out = VectorT<Ext>::Zero(n_);
    for (std::size_t k = 0; k < index_.size(); ++k) {
      const Ext wi = wt_[index_[k]];
      out[index_[k]] = std::pow(std::max(r_[k], Ext(0)), Ext(lambda)) * std::pow(wi, Ext(1) - Ext(2) * Ext(lambda));
    }
    return (out / out.sum()).cast<double>();
  }

private:
  Criterion crit_;
  MatE sigma_;
  Ext psi_sigma_ = 0;
  MatE psi_grad_;
  MatE constraint_;
  std::vector<Eigen::Index> index_;
  std::vector<MatE> qq_;
  std::vector<Ext> r_;
  Eigen::Index n_ = 0;
  Vector wt_;
};

struct AuxiliaryChainReport {
  double psi_t = 0.0;     // psi(M^{-1}(w^t))
  double h_next = 0.0;    // h(Sigma^t, w^{t+1}, Q^t)
  double g_next = 0.0;    // g(w^{t+1}, Q^t)
  double psi_next = 0.0;  // psi(M^{-1}(w^{t+1}))
  double wls_gap = 0.0;   // |g(w^t, Q^t) - psi(M^{-1}(w^t))|
  double h_at_t_gap = 0.0;            // |h(Sigma^t, w^t, Q^t) - psi(M^{-1}(w^t))|
  double constraint_residual = 0.0;   // ||Q G - I||
  double jensen_form_gap = 0.0;       // sup |w^{t+1} - r^lambda w^{1-2 lambda} / sum|
  Vector r;
  bool chain_ok = false;
};

inline constexpr double kChainRelSlack = 1e-8;

inline AuxiliaryChainReport auxiliary_chain_audit(const DesignProblem& problem, const DesignMeasure& wt,
                                                  const DesignMeasure& wnext, double lambda) {
  using Ext = AuxiliaryState::Ext;
  const AuxiliaryState st(problem, wt);
  const Ext psi_t = st.psi_sigma_ext();
  const Ext h_next = st.h_ext(wnext.weights());
  const Ext g_next = st.g_ext(wnext.weights());
  const Ext psi_next = AuxiliaryState::psi_at(problem, wnext.weights());
  AuxiliaryChainReport rep;
  rep.psi_t = double(psi_t);
  rep.h_next = double(h_next);
  rep.g_next = double(g_next);
  rep.psi_next = double(psi_next);
  rep.wls_gap = double(std::abs(st.g_ext(wt.weights()) - psi_t));
  rep.h_at_t_gap = double(std::abs(st.h_ext(wt.weights()) - psi_t));
  rep.constraint_residual = st.constraint_residual();
  rep.jensen_form_gap = detail::sup_diff(st.jensen_form_step(lambda), wnext.weights());
  rep.r = st.r();

  const double scale = std::max({1.0, std::abs(rep.psi_t), std::abs(rep.h_next), std::abs(rep.g_next),
                                 std::abs(rep.psi_next)});
  const Ext slack = Ext(kChainRelSlack * scale);
  const bool finite = std::isfinite(rep.psi_t) && std::isfinite(rep.h_next) && std::isfinite(rep.g_next) &&
                      std::isfinite(rep.psi_next);
  rep.chain_ok = finite && psi_t >= h_next - slack && h_next >= g_next - slack && g_next >= psi_next - slack &&
                 Ext(rep.wls_gap) <= slack;
  return rep;
}

// ---------------------------------------------------------------------------
// Brute-force oracle

struct OracleResult {
  DesignMeasure w;
  double phi = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline std::optional<double> try_phi(const DesignProblem& problem, const Vector& w) {
  const Matrix m = linalg::symmetrize([&] {
    Matrix acc = Matrix::Zero(problem.dim(), problem.dim());
    for (Eigen::Index i = 0; i < w.size(); ++i)
      if (w[i] != 0.0) acc += w[i] * problem.infos()[std::size_t(i)];
    return acc;
  }());
  if (!linalg::is_positive_definite(m)) return std::nullopt;
  try {
    const double v = phi_value(problem.criterion(), m);
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const singular_matrix_error&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Exhaustive search over simplex points with denominator `grid_resolution`,
/// followed by pairwise-transfer coordinate search with a shrinking step.
inline OracleResult brute_force_optimum(const DesignProblem& problem, int grid_resolution) {
  const Eigen::Index n = problem.size();
  if (n > 4) throw std::invalid_argument("brute_force_optimum: n must be at most 4");
  if (grid_resolution < 10) throw std::invalid_argument("brute_force_optimum: grid_resolution must be >= 10");

  Vector best_w;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> counts(std::size_t(n), 0);
  const std::function<void(Eigen::Index, int)> rec = [&](Eigen::Index i, int left) {
    if (i == n - 1) {
      counts[std::size_t(i)] = left;
      Vector w(n);
      for (Eigen::Index k = 0; k < n; ++k) w[k] = double(counts[std::size_t(k)]) / double(grid_resolution);
      if (auto v = detail::try_phi(problem, w); v && *v > best) {
        best = *v;
        best_w = w;
      }
      return;
    }
    for (int c = 0; c <= left; ++c) {
      counts[std::size_t(i)] = c;
      rec(i + 1, left - c);
    }
  };
  rec(0, grid_resolution);
  if (best_w.size() == 0) throw std::domain_error("brute_force_optimum: every grid point gives a singular M");

  double step = 1.0 / double(grid_resolution);
  for (long sweep = 0; sweep < 1000000 && step >= 1e-12; ++sweep) {
    const double before = best;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double amt = std::min(step, best_w[j]);
        if (amt <= 0.0) continue;
        Vector v = best_w;
        v[i] += amt;
        v[j] -= amt;
        if (auto val = detail::try_phi(problem, v); val && *val > best) {
          best = *val;
          best_w = v;
        }
      }
    if (best - before < 1e-12) step *= 0.5;
  }
  return {DesignMeasure::normalized(best_w), best};
}

// ---------------------------------------------------------------------------
// Empirical scan of p-mean monotonicity over (p, lambda)

struct ScanRow {
  double p = 0.0;
  double lambda = 0.0;
  std::size_t problem = 0;
  bool monotone = true;
  std::optional<long> first_violation_iter;
  long iterations = 0;
  SolveStatus status = SolveStatus::MaxIters;
};

/// Runs PMean(p) with each constant lambda on each problem for at most
/// `iters` steps and records whether phi ever decreased. Exploratory only.
inline std::vector<ScanRow> conjecture_scan(const std::vector<DesignProblem>& family,
                                            const std::vector<double>& p_values,
                                            const std::vector<double>& lambda_values, long iters,
                                            double delta = 1e-4, double tol = 1e-9) {
  std::vector<ScanRow> rows;
  for (std::size_t k = 0; k < family.size(); ++k)
    for (double p : p_values)
      for (double lambda : lambda_values) {
        const DesignProblem prob = family[k].with_criterion(Criterion::p_mean(p));
        SolverConfig cfg;
        cfg.lambda = {lambda};
        cfg.delta = delta;
        cfg.max_iters = iters;
        const SolveResult res = solve(prob, cfg);
        const MonotonicityReport mon = monotonicity_audit(res.trace, tol);
        rows.push_back({p, lambda, k, mon.monotone, mon.first_violation_iter, res.iterations, res.trace.status});
      }
  return rows;
}

}  // namespace optdes
