#pragma once

// Symmetric matrix functions. Every inverse, fractional power and square
// root in the library is routed through a symmetric eigendecomposition.
// The functions are generic in the scalar type so audits can run in
// extended precision.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace optdes {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

template <typename S>
using MatrixT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VectorT = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Raised when a matrix that must be positive definite is not.
class singular_matrix_error : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

namespace linalg {

/// Eigenvalues within this relative distance below zero are treated as zero.
inline constexpr double kClampRelTol = 1e-10;
/// Relative floor under which a moment matrix is considered singular.
inline constexpr double kPdFloorRel = 1e-12;

template <typename D>
MatrixT<typename D::Scalar> symmetrize(const Eigen::MatrixBase<D>& a) {
  using S = typename D::Scalar;
  return S(0.5) * (a + a.transpose());
}

inline bool is_symmetric(const Matrix& a, double tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  return ((a - a.transpose()).cwiseAbs().maxCoeff() <= tol);
}

template <typename S>
struct SymEigenT {
  VectorT<S> values;   // ascending
  MatrixT<S> vectors;  // columns
};
using SymEigen = SymEigenT<double>;

template <typename D>
SymEigenT<typename D::Scalar> sym_eigen(const Eigen::MatrixBase<D>& a) {
  using S = typename D::Scalar;
  if (a.rows() != a.cols() || a.rows() == 0)
    throw std::invalid_argument("sym_eigen: matrix must be square and nonempty");
  Eigen::SelfAdjointEigenSolver<MatrixT<S>> es(symmetrize(a));
  if (es.info() != Eigen::Success)
    throw std::runtime_error("sym_eigen: eigendecomposition failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Largest eigenvalue magnitude.
template <typename S>
S spectral_scale(const VectorT<S>& eig) {
  using std::abs;
  return std::max(abs(eig.minCoeff()), abs(eig.maxCoeff()));
}

/// Snap eigenvalues in [-kClampRelTol * scale, 0) to exactly 0.
template <typename S>
void clamp_eigenvalues(VectorT<S>& eig) {
  const S scale = spectral_scale(eig);
  for (Eigen::Index i = 0; i < eig.size(); ++i)
    if (eig[i] < S(0) && eig[i] >= -S(kClampRelTol) * scale) eig[i] = S(0);
}

/// V f(diag) V^T for a scalar function f applied to the spectrum.
template <typename S, typename F>
MatrixT<S> apply_spectral(const SymEigenT<S>& e, F&& f) {
  VectorT<S> mapped(e.values.size());
  for (Eigen::Index i = 0; i < e.values.size(); ++i) mapped[i] = f(e.values[i]);
  return symmetrize(e.vectors * mapped.asDiagonal() * e.vectors.transpose());
}

template <typename D>
typename D::Scalar min_eigenvalue(const Eigen::MatrixBase<D>& a) {
  return sym_eigen(a).values.minCoeff();
}

/// Positive definite in the scale-aware sense used for moment matrices:
/// min eigenvalue > 1e-12 * max(1, max eigenvalue).
template <typename S>
bool passes_pd_floor(const VectorT<S>& eig) {
  return eig.minCoeff() > S(kPdFloorRel) * std::max(S(1), eig.maxCoeff());
}

template <typename D>
bool is_positive_definite(const Eigen::MatrixBase<D>& a) {
  return passes_pd_floor(sym_eigen(a).values);
}

template <typename D>
SymEigenT<typename D::Scalar> require_pd(const Eigen::MatrixBase<D>& a, const char* what) {
  auto e = sym_eigen(a);
  if (!passes_pd_floor(e.values))
    throw singular_matrix_error(std::string(what) + ": matrix is not positive definite (min eigenvalue " +
                                std::to_string(double(e.values.minCoeff())) + ")");
  return e;
}

/// Inverse of a positive definite symmetric matrix.
template <typename D>
MatrixT<typename D::Scalar> inverse_sym(const Eigen::MatrixBase<D>& a) {
  using S = typename D::Scalar;
  const auto e = require_pd(a, "inverse_sym");
  return apply_spectral(e, [](S v) { return S(1) / v; });
}

/// M^p for positive definite M. M^0 = I and M^1 = M.
template <typename D>
MatrixT<typename D::Scalar> matrix_power_sym(const Eigen::MatrixBase<D>& m, double p) {
  using S = typename D::Scalar;
  auto e = sym_eigen(m);
  clamp_eigenvalues(e.values);
  if (e.values.minCoeff() <= S(0))
    throw singular_matrix_error("matrix_power_sym: non-positive eigenvalue " +
                                std::to_string(double(e.values.minCoeff())));
  if (p == 0.0) return MatrixT<S>::Identity(m.rows(), m.cols());
  if (p == 1.0) return symmetrize(m);
  return apply_spectral(e, [p](S v) {
    using std::pow;
    return pow(v, S(p));
  });
}

/// Symmetric nonnegative definite square root.
template <typename D>
MatrixT<typename D::Scalar> sqrt_sym(const Eigen::MatrixBase<D>& a) {
  using S = typename D::Scalar;
  const auto e = sym_eigen(a);
  const S scale = spectral_scale(e.values);
  if (e.values.minCoeff() < -S(1e-8) * scale)
    throw std::domain_error("sqrt_sym: matrix is not nonnegative definite (min eigenvalue " +
                            std::to_string(double(e.values.minCoeff())) + ")");
  return apply_spectral(e, [](S v) {
    using std::sqrt;
    return v > S(0) ? sqrt(v) : S(0);
  });
}

/// log det of a positive definite matrix.
template <typename D>
typename D::Scalar log_det_sym(const Eigen::MatrixBase<D>& a) {
  const auto e = require_pd(a, "log_det_sym");
  return e.values.array().log().sum();
}

/// Frobenius inner product tr(A^T B).
template <typename A, typename B>
typename A::Scalar frobenius_dot(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a.cwiseProduct(b).sum();
}

}  // namespace linalg
}  // namespace optdes
