#pragma once

#include "optdes/criteria.hpp"
#include "optdes/design.hpp"

#include <stdexcept>

namespace optdes {

/// d_i = tr(phi'(M) A_i) for an already evaluated gradient.
inline Vector directional_values(const DesignProblem& problem, const Matrix& gradient) {
  Vector d(problem.size());
  for (Eigen::Index i = 0; i < problem.size(); ++i)
    d[i] = linalg::frobenius_dot(gradient, problem.infos()[std::size_t(i)]);
  return d;
}

/// d_i(w) = tr(phi'(M(w)) A_i).
inline Vector directional_values(const DesignProblem& problem, const DesignMeasure& w) {
  return directional_values(problem, phi_gradient(problem.criterion(), moment_matrix(problem, w)));
}

/// Weighted mean of d under w; equals tr(phi'(M) M).
inline double dbar(const DesignMeasure& w, const Vector& d) {
  if (w.size() != d.size()) throw std::invalid_argument("dbar: length mismatch");
  return w.weights().dot(d);
}

}  // namespace optdes
