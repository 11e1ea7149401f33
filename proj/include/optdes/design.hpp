#pragma once

// Design spaces, per-point information matrices and moment matrices.

#include "optdes/criteria.hpp"
#include "optdes/linalg.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace optdes {

using DesignPoint = Vector;
using InfoMatrix = Matrix;

enum class ModelTag { Linear, Logistic, Custom };

inline std::string to_string(ModelTag tag) {
  switch (tag) {
    case ModelTag::Linear: return "linear";
    case ModelTag::Logistic: return "logistic";
    case ModelTag::Custom: return "custom";
  }
  return "custom";
}

/// Logistic variance weight e^eta / (1 + e^eta)^2, evaluated without overflow.
/// Symmetric in eta, maximal (1/4) at eta = 0.
inline double logistic_weight(double eta) {
  const double e = std::exp(-std::abs(eta));
  return e / ((1.0 + e) * (1.0 + e));
}

inline InfoMatrix fisher_info_linear(const DesignPoint& x) {
  if (!x.allFinite()) throw std::invalid_argument("fisher_info_linear: design point must be finite");
  return x * x.transpose();
}

/// weight_fn(x^T theta) x x^T for a GLM with scalar variance weight.
template <typename WeightFn>
InfoMatrix fisher_info_glm(const DesignPoint& x, const Vector& theta_star, WeightFn&& weight_fn) {
  if (x.size() != theta_star.size())
    throw std::invalid_argument("fisher_info_glm: x and theta_star differ in length");
  if (!x.allFinite() || !theta_star.allFinite())
    throw std::invalid_argument("fisher_info_glm: inputs must be finite");
  const double mu = weight_fn(x.dot(theta_star));
  if (!(mu >= 0.0) || !std::isfinite(mu))
    throw std::invalid_argument("fisher_info_glm: weight function returned a negative or non-finite value");
  return mu * (x * x.transpose());
}

inline InfoMatrix fisher_info_logistic(const DesignPoint& x, const Vector& theta_star) {
  return fisher_info_glm(x, theta_star, logistic_weight);
}

/// Probability vector over the design points.
class DesignMeasure {
public:
  static constexpr double kSumTol = 1e-12;

  DesignMeasure() = default;

  /// Validates w >= 0 and sum(w) = 1 within tol.
  explicit DesignMeasure(Vector w, double tol = kSumTol) : w_(std::move(w)) {
    if (w_.size() == 0) throw std::invalid_argument("design measure: empty weight vector");
    if (!w_.allFinite()) throw std::invalid_argument("design measure: weights must be finite");
    if (w_.minCoeff() < 0.0) throw std::invalid_argument("design measure: negative weight");
    if (std::abs(w_.sum() - 1.0) > tol)
      throw std::invalid_argument("design measure: weights sum to " + std::to_string(w_.sum()) + ", not 1");
  }

  static DesignMeasure uniform(Eigen::Index n) { return DesignMeasure(Vector::Constant(n, 1.0 / double(n))); }

  /// Normalizes nonnegative weights to sum 1.
  static DesignMeasure normalized(const Vector& raw) {
    if (raw.size() == 0 || !raw.allFinite() || raw.minCoeff() < 0.0 || !(raw.sum() > 0.0))
      throw std::invalid_argument("design measure: cannot normalize weights");
    return DesignMeasure(raw / raw.sum());
  }

  const Vector& weights() const { return w_; }
  Eigen::Index size() const { return w_.size(); }
  double operator[](Eigen::Index i) const { return w_[i]; }

  std::vector<Eigen::Index> support(double tol = 0.0) const {
    std::vector<Eigen::Index> s;
    for (Eigen::Index i = 0; i < w_.size(); ++i)
      if (w_[i] > tol) s.push_back(i);
    return s;
  }

private:
  Vector w_;
};

/// A finite design space with one information matrix per point.
class DesignProblem {
public:
  DesignProblem(std::vector<DesignPoint> points, std::vector<InfoMatrix> infos, Criterion crit,
                ModelTag tag = ModelTag::Custom)
      : points_(std::move(points)), infos_(std::move(infos)), criterion_(std::move(crit)), tag_(tag) {
    if (infos_.empty()) throw std::invalid_argument("design problem: empty design space");
    if (points_.size() != infos_.size())
      throw std::invalid_argument("design problem: points and information matrices differ in count");
    const Eigen::Index m = infos_.front().rows();
    if (m < 1) throw std::invalid_argument("design problem: information matrices must be at least 1x1");
    for (std::size_t i = 0; i < infos_.size(); ++i) {
      auto& a = infos_[i];
      if (a.rows() != m || a.cols() != m)
        throw std::invalid_argument("design problem: information matrix " + std::to_string(i + 1) +
                                    " has inconsistent dimension");
      if (!a.allFinite())
        throw std::invalid_argument("design problem: information matrix " + std::to_string(i + 1) +
                                    " is not finite");
      if (!linalg::is_symmetric(a, 1e-12))
        throw std::invalid_argument("design problem: information matrix " + std::to_string(i + 1) +
                                    " is not symmetric");
      a = linalg::symmetrize(a);
      const Vector eig = linalg::sym_eigen(a).values;
      if (eig.minCoeff() < -1e-10 * linalg::spectral_scale(eig))
        throw std::invalid_argument("design problem: information matrix " + std::to_string(i + 1) +
                                    " is not nonnegative definite");
      if (points_[i].size() < 1 || !points_[i].allFinite())
        throw std::invalid_argument("design problem: design point " + std::to_string(i + 1) + " is invalid");
    }
    const auto need = criterion_.required_dim();
    if (need != 0 && need != m)
      throw std::invalid_argument("design problem: criterion dimension " + std::to_string(need) +
                                  " does not match parameter dimension " + std::to_string(m));
    Matrix mu = Matrix::Zero(m, m);
    for (const auto& a : infos_) mu += a;
    mu /= double(infos_.size());
    if (!(linalg::min_eigenvalue(mu) > 0.0))
      throw std::invalid_argument("design problem: uniform design gives a singular moment matrix");
  }

  Eigen::Index size() const { return Eigen::Index(infos_.size()); }
  Eigen::Index dim() const { return infos_.front().rows(); }
  const std::vector<DesignPoint>& points() const { return points_; }
  const std::vector<InfoMatrix>& infos() const { return infos_; }
  const Criterion& criterion() const { return criterion_; }
  ModelTag model_tag() const { return tag_; }

  DesignProblem with_criterion(Criterion crit) const {
    return DesignProblem(points_, infos_, std::move(crit), tag_);
  }

private:
  std::vector<DesignPoint> points_;
  std::vector<InfoMatrix> infos_;
  Criterion criterion_;
  ModelTag tag_;
};

inline DesignProblem make_linear_problem(std::vector<DesignPoint> points, Criterion crit) {
  std::vector<InfoMatrix> infos;
  infos.reserve(points.size());
  for (const auto& x : points) infos.push_back(fisher_info_linear(x));
  return DesignProblem(std::move(points), std::move(infos), std::move(crit), ModelTag::Linear);
}

inline DesignProblem make_logistic_problem(std::vector<DesignPoint> points, const Vector& theta_star,
                                           Criterion crit) {
  std::vector<InfoMatrix> infos;
  infos.reserve(points.size());
  for (const auto& x : points) infos.push_back(fisher_info_logistic(x, theta_star));
  return DesignProblem(std::move(points), std::move(infos), std::move(crit), ModelTag::Logistic);
}

/// M(w) = sum_i w_i A_i, symmetrized.
inline Matrix moment_matrix(const DesignProblem& problem, const DesignMeasure& w) {
  if (w.size() != problem.size())
    throw std::invalid_argument("moment_matrix: measure has " + std::to_string(w.size()) +
                                " weights but the design space has " + std::to_string(problem.size()) +
                                " points");
  Matrix m = Matrix::Zero(problem.dim(), problem.dim());
  for (Eigen::Index i = 0; i < problem.size(); ++i)
    if (w[i] != 0.0) m.noalias() += w[i] * problem.infos()[std::size_t(i)];
  return linalg::symmetrize(m);
}

}  // namespace optdes
