#pragma once

// Optimality criteria phi(M) on positive definite moment matrices, their
// gradients, and the dual form psi(S) = -phi(S^{-1}) used by the audits.

#include "optdes/linalg.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>

namespace optdes {

namespace criterion {

/// log det M.
struct D {};

/// -tr(M^p), p < 0. p = -1 is A-optimality.
struct PMean {
  double p;
};

/// -log det(K^T M^{-1} K).
struct DK {
  Matrix K;
};

/// -tr((K^T M^{-1} K)^{-p}), p <= 0. p = 0 behaves as DK.
struct PMeanK {
  double p;
  Matrix K;
};

/// -c^T M^{-1} c.
struct COpt {
  Vector c;
};

}  // namespace criterion

class Criterion {
public:
  using Variant = std::variant<criterion::D, criterion::PMean, criterion::DK, criterion::PMeanK, criterion::COpt>;

  Criterion() : v_(criterion::D{}) {}

  static Criterion d_optimal() { return Criterion(criterion::D{}); }

  static Criterion p_mean(double p) {
    if (!(p < 0.0) || !std::isfinite(p))
      throw std::invalid_argument("criterion pmean: p must be a finite negative number");
    return Criterion(criterion::PMean{p});
  }

  static Criterion dk(Matrix K) {
    check_K(K);
    return Criterion(criterion::DK{std::move(K)});
  }

  static Criterion p_mean_k(double p, Matrix K) {
    if (!(p <= 0.0) || !std::isfinite(p))
      throw std::invalid_argument("criterion pmeanK: p must be a finite number <= 0");
    check_K(K);
    return Criterion(criterion::PMeanK{p, std::move(K)});
  }

  static Criterion c_optimal(Vector c) {
    if (c.size() == 0 || !c.allFinite() || c.cwiseAbs().maxCoeff() == 0.0)
      throw std::invalid_argument("criterion c: vector c must be finite and nonzero");
    return Criterion(criterion::COpt{std::move(c)});
  }

  const Variant& variant() const { return v_; }

  std::string tag() const {
    return std::visit(
        [](const auto& c) -> std::string {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, criterion::D>) return "D";
          else if constexpr (std::is_same_v<T, criterion::PMean>) return "pmean";
          else if constexpr (std::is_same_v<T, criterion::DK>) return "DK";
          else if constexpr (std::is_same_v<T, criterion::PMeanK>) return "pmeanK";
          else return "c";
        },
        v_);
  }

  /// True when the multiplicative algorithm is known to be monotone for
  /// every lambda in (0, 1]: D, DK, c, and the p-mean families with p in [-1, 0].
  bool monotone_certified() const {
    return std::visit(
        [](const auto& c) -> bool {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, criterion::PMean>) return c.p >= -1.0 && c.p < 0.0;
          else if constexpr (std::is_same_v<T, criterion::PMeanK>) return c.p >= -1.0 && c.p <= 0.0;
          else return true;
        },
        v_);
  }

  /// Dimension m the criterion parameters require, or 0 when unconstrained.
  Eigen::Index required_dim() const {
    return std::visit(
        [](const auto& c) -> Eigen::Index {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, criterion::DK> || std::is_same_v<T, criterion::PMeanK>)
            return c.K.rows();
          else if constexpr (std::is_same_v<T, criterion::COpt>) return c.c.size();
          else return 0;
        },
        v_);
  }

  /// Default multiplicative power: 1/2 for c and A (p = -1), otherwise 1.
  double default_lambda() const {
    return std::visit(
        [](const auto& c) -> double {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, criterion::COpt>) return 0.5;
          else if constexpr (std::is_same_v<T, criterion::PMean>) return c.p == -1.0 ? 0.5 : 1.0;
          else return 1.0;
        },
        v_);
  }

private:
  explicit Criterion(Variant v) : v_(std::move(v)) {}

  static void check_K(const Matrix& K) {
    if (K.rows() == 0 || K.cols() == 0 || K.cols() > K.rows())
      throw std::invalid_argument("criterion K: must be m x r with 1 <= r <= m");
    if (!K.allFinite()) throw std::invalid_argument("criterion K: entries must be finite");
    Eigen::JacobiSVD<Matrix> svd(K);
    const Vector s = svd.singularValues();
    if (!(s.minCoeff() > 1e-10 * s.maxCoeff()))
      throw std::invalid_argument("criterion K: must have full column rank");
  }

  Variant v_;
};

namespace detail {

// B = K^T Minv K, the inverse information for K^T theta.
template <typename S>
MatrixT<S> restricted_cov(const MatrixT<S>& minv, const MatrixT<S>& K) {
  return linalg::symmetrize(K.transpose() * minv * K);
}

template <typename S>
void check_dim(const Criterion& crit, const MatrixT<S>& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("criterion: moment matrix must be square");
  const auto need = crit.required_dim();
  if (need != 0 && need != m.rows())
    throw std::invalid_argument("criterion: parameter dimension " + std::to_string(need) +
                                " does not match matrix dimension " + std::to_string(m.rows()));
}

// -tr(B^{-p}) with B positive definite, p <= 0; p == 0 is -log det B.
template <typename S>
S restricted_value(double p, const MatrixT<S>& b) {
  if (p == 0.0) return -linalg::log_det_sym(b);
  linalg::require_pd(b, "K^T M^-1 K");
  return -linalg::matrix_power_sym(b, -p).trace();
}

}  // namespace detail

/// Criterion value phi(M); larger is better.
inline double phi_value(const Criterion& crit, const Matrix& m) {
  detail::check_dim<double>(crit, m);
  return std::visit(
      [&m](const auto& c) -> double {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, criterion::D>) {
          return linalg::log_det_sym(m);
        } else if constexpr (std::is_same_v<T, criterion::PMean>) {
          linalg::require_pd(m, "phi_value");
          return -linalg::matrix_power_sym(m, c.p).trace();
        } else if constexpr (std::is_same_v<T, criterion::DK>) {
          return detail::restricted_value(0.0, detail::restricted_cov<double>(linalg::inverse_sym(m), c.K));
        } else if constexpr (std::is_same_v<T, criterion::PMeanK>) {
          return detail::restricted_value(c.p, detail::restricted_cov<double>(linalg::inverse_sym(m), c.K));
        } else {
          const Vector u = linalg::inverse_sym(m) * c.c;
          return -c.c.dot(u);
        }
      },
      crit.variant());
}

/// Gradient dphi/dM as a symmetric matrix.
inline Matrix phi_gradient(const Criterion& crit, const Matrix& m) {
  detail::check_dim<double>(crit, m);
  return std::visit(
      [&m](const auto& c) -> Matrix {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, criterion::D>) {
          return linalg::inverse_sym(m);
        } else if constexpr (std::is_same_v<T, criterion::PMean>) {
          linalg::require_pd(m, "phi_gradient");
          return -c.p * linalg::matrix_power_sym(m, c.p - 1.0);
        } else if constexpr (std::is_same_v<T, criterion::DK> || std::is_same_v<T, criterion::PMeanK>) {
          double p = 0.0;
          if constexpr (std::is_same_v<T, criterion::PMeanK>) p = c.p;
          const Matrix minv = linalg::inverse_sym(m);
          const Matrix mk = minv * c.K;  // M^{-1} K
          const Matrix b = detail::restricted_cov<double>(minv, c.K);
          // DK: (K^T M^-1 K)^{-1}; PMeanK: -p (K^T M^-1 K)^{-p-1}.
          const Matrix core = p == 0.0 ? linalg::inverse_sym(b) : Matrix(-p * linalg::matrix_power_sym(b, -p - 1.0));
          return linalg::symmetrize(mk * core * mk.transpose());
        } else {
          const Vector u = linalg::inverse_sym(m) * c.c;
          return u * u.transpose();
        }
      },
      crit.variant());
}

/// psi(S) = -phi(S^{-1}), evaluated directly on S > 0 without inverting it
/// where the closed form allows. Generic in the scalar type.
template <typename S>
S psi_value(const Criterion& crit, const MatrixT<S>& s) {
  detail::check_dim(crit, s);
  return std::visit(
      [&s](const auto& c) -> S {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, criterion::D>) {
          return linalg::log_det_sym(s);
        } else if constexpr (std::is_same_v<T, criterion::PMean>) {
          linalg::require_pd(s, "psi_value");
          return linalg::matrix_power_sym(s, -c.p).trace();
        } else if constexpr (std::is_same_v<T, criterion::DK>) {
          return -detail::restricted_value(0.0, detail::restricted_cov<S>(s, c.K.template cast<S>()));
        } else if constexpr (std::is_same_v<T, criterion::PMeanK>) {
          return -detail::restricted_value(c.p, detail::restricted_cov<S>(s, c.K.template cast<S>()));
        } else {
          linalg::require_pd(s, "psi_value");
          const VectorT<S> cs = c.c.template cast<S>();
          return cs.dot(s * cs);
        }
      },
      crit.variant());
}

/// dpsi/dS, symmetric.
template <typename S>
MatrixT<S> psi_gradient(const Criterion& crit, const MatrixT<S>& s) {
  detail::check_dim(crit, s);
  return std::visit(
      [&s](const auto& c) -> MatrixT<S> {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, criterion::D>) {
          return linalg::inverse_sym(s);
        } else if constexpr (std::is_same_v<T, criterion::PMean>) {
          linalg::require_pd(s, "psi_gradient");
          return S(-c.p) * linalg::matrix_power_sym(s, -c.p - 1.0);
        } else if constexpr (std::is_same_v<T, criterion::DK> || std::is_same_v<T, criterion::PMeanK>) {
          double p = 0.0;
          if constexpr (std::is_same_v<T, criterion::PMeanK>) p = c.p;
          linalg::require_pd(s, "psi_gradient");
          const MatrixT<S> K = c.K.template cast<S>();
          const MatrixT<S> b = detail::restricted_cov<S>(s, K);
          const MatrixT<S> core =
              p == 0.0 ? linalg::inverse_sym(b) : MatrixT<S>(S(-p) * linalg::matrix_power_sym(b, -p - 1.0));
          return linalg::symmetrize(K * core * K.transpose());
        } else {
          linalg::require_pd(s, "psi_gradient");
          const VectorT<S> cs = c.c.template cast<S>();
          return cs * cs.transpose();
        }
      },
      crit.variant());
}

}  // namespace optdes
