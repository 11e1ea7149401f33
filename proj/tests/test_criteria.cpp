#include "optdes/criteria.hpp"
#include "optdes/directional.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace optdes;
using optdes::testing::Rng;

namespace {

Matrix diag(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

/// Max over symmetric basis directions of |FD - tr(G E)|, relative to max|G|.
template <typename F>
double gradient_fd_error(F&& f, const Matrix& m, const Matrix& g) {
  const Eigen::Index n = m.rows();
  double worst = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = j; k < n; ++k) {
      Matrix e = Matrix::Zero(n, n);
      e(j, k) = 1.0;
      e(k, j) = 1.0;
      const double fd = optdes::testing::central_difference(f, m, e, 1e-5);
      worst = std::max(worst, std::abs(fd - linalg::frobenius_dot(g, e)));
    }
  return worst / std::max(g.cwiseAbs().maxCoeff(), 1e-300);
}

}  // namespace

TEST(PhiValue, Examples) {
  EXPECT_NEAR(phi_value(Criterion::d_optimal(), Matrix::Identity(2, 2)), 0.0, 1e-15);
  EXPECT_NEAR(phi_value(Criterion::p_mean(-1.0), diag(2, 4)), -0.75, 1e-15);
  EXPECT_NEAR(phi_value(Criterion::c_optimal(vec2(1, 0)), diag(2, 4)), -0.5, 1e-15);
}

TEST(PhiValue, RejectsSingularAndMismatchedDimension) {
  EXPECT_THROW(phi_value(Criterion::d_optimal(), diag(1, 0)), singular_matrix_error);
  EXPECT_THROW(phi_value(Criterion::p_mean(-1), diag(1, 0)), singular_matrix_error);
  EXPECT_THROW(phi_value(Criterion::c_optimal(vec2(1, 0)), Matrix::Identity(3, 3)), std::invalid_argument);
}

TEST(PhiGradient, Examples) {
  EXPECT_LT((phi_gradient(Criterion::d_optimal(), diag(2, 4)) - diag(0.5, 0.25)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((phi_gradient(Criterion::p_mean(-1.0), diag(2, 4)) - diag(0.25, 0.0625)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PhiGradient, MatchesFiniteDifferencesForEveryTag) {
  Rng rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index m = optdes::testing::uniform_int(rng, 1, 5);
    const Matrix M = optdes::testing::random_spd(rng, m);
    for (const auto& crit : optdes::testing::all_criteria(rng, m)) {
      const Matrix g = phi_gradient(crit, M);
      EXPECT_TRUE(linalg::is_symmetric(g, 0.0));
      const double err = gradient_fd_error([&](const Matrix& x) { return phi_value(crit, x); }, M, g);
      EXPECT_LT(err, 1e-5) << crit.tag() << " m=" << m;
    }
  }
}

TEST(PsiGradient, MatchesFiniteDifferencesForEveryTag) {
  Rng rng(22);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index m = optdes::testing::uniform_int(rng, 1, 5);
    const Matrix S = optdes::testing::random_spd(rng, m);
    for (const auto& crit : optdes::testing::all_criteria(rng, m)) {
      const Matrix g = psi_gradient(crit, S);
      const double err = gradient_fd_error([&](const Matrix& x) { return psi_value(crit, x); }, S, g);
      EXPECT_LT(err, 1e-5) << crit.tag() << " m=" << m;
    }
  }
}

TEST(PsiValue, IsNegatedPhiOfInverse) {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index m = optdes::testing::uniform_int(rng, 1, 5);
    const Matrix M = optdes::testing::random_spd(rng, m);
    const Matrix Minv = optdes::testing::lu_inverse(M);
    for (const auto& crit : optdes::testing::all_criteria(rng, m)) {
      const double phi = phi_value(crit, M);
      EXPECT_NEAR(psi_value(crit, Minv), -phi, 1e-10 * std::max(1.0, std::abs(phi))) << crit.tag();
    }
  }
}

TEST(DirectionalValues, IdentityMomentGivesTraces) {
  // A_1 = diag(1, 0), A_2 = diag(0, 1), uniform w -> M = I/2; scale so M = I.
  std::vector<DesignPoint> pts{vec2(1, 0), vec2(0, 1)};
  std::vector<InfoMatrix> infos{diag(2, 0), diag(0, 2)};
  const DesignProblem p(pts, infos, Criterion::d_optimal());
  const DesignMeasure w = DesignMeasure::uniform(2);
  ASSERT_LT((moment_matrix(p, w) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
  const Vector d = directional_values(p, w);
  EXPECT_NEAR(d[0], infos[0].trace(), 1e-15);
  EXPECT_NEAR(d[1], infos[1].trace(), 1e-15);
}

TEST(DirectionalValues, ScalarProblem) {
  const auto p = optdes::testing::scalar_problem();
  const DesignMeasure w = DesignMeasure::uniform(2);
  const Vector d = directional_values(p, w);
  EXPECT_NEAR(d[0], 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(d[1], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(dbar(w, d), 1.0, 1e-15);
}

TEST(DirectionalValues, COptQuadraticFormMatchesTraceForm) {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index m = optdes::testing::uniform_int(rng, 2, 4);
    const Eigen::Index n = optdes::testing::uniform_int(rng, int(m), 10);
    const Vector c = optdes::testing::random_vector(rng, m);
    const auto p = optdes::testing::random_problem(rng, m, n, optdes::testing::Model::Logistic, Criterion::c_optimal(c));
    const DesignMeasure w(optdes::testing::random_simplex(rng, n));
    const Vector d = directional_values(p, w);
    const Matrix M = moment_matrix(p, w);
    const Matrix Minv = optdes::testing::lu_inverse(M);
    // both inverses carry relative error of order cond(M) * eps
    Eigen::SelfAdjointEigenSolver<Matrix> es(M);
    const double cond = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double quad = c.dot(Minv * p.infos()[std::size_t(i)] * Minv * c);
      EXPECT_NEAR(d[i], quad, 1e-13 * cond * std::max(1.0, std::abs(quad)));
    }
  }
}

TEST(Dbar, EqualsTraceOfGradientTimesMoment) {
  Rng rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index m = optdes::testing::uniform_int(rng, 1, 4);
    const Eigen::Index n = optdes::testing::uniform_int(rng, std::max(2, int(m)), 10);
    const auto base = optdes::testing::random_problem(rng, m, n, optdes::testing::Model::Linear, Criterion::d_optimal());
    const DesignMeasure w(optdes::testing::random_simplex(rng, n));
    const Matrix M = moment_matrix(base, w);
    for (const auto& crit : optdes::testing::all_criteria(rng, m)) {
      const auto p = base.with_criterion(crit);
      const Vector d = directional_values(p, w);
      const double expect = linalg::frobenius_dot(phi_gradient(crit, M), M);
      EXPECT_NEAR(dbar(w, d), expect, 1e-10 * std::max(1.0, std::abs(expect))) << crit.tag();
      if (crit.tag() == "D") {
        EXPECT_NEAR(dbar(w, d), double(m), 1e-10);
      }
      if (crit.tag() == "c") {
        EXPECT_NEAR(dbar(w, d), -phi_value(crit, M), 1e-10 * std::max(1.0, dbar(w, d)));
      }
      // nonnegative up to roundoff for certified criteria
      if (crit.monotone_certified()) {
        EXPECT_GE(d.minCoeff(), -1e-10 * d.cwiseAbs().maxCoeff());
      }
    }
  }
}

TEST(CriterionIdentities, SpecialCasesAgree) {
  Rng rng(33);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index m = optdes::testing::uniform_int(rng, 1, 4);
    const Eigen::Index n = optdes::testing::uniform_int(rng, std::max(2, int(m)), 8);
    const auto base = optdes::testing::random_problem(rng, m, n, optdes::testing::Model::Logistic, Criterion::d_optimal());
    const DesignMeasure w(optdes::testing::random_simplex(rng, n));
    const Matrix M = moment_matrix(base, w);
    const Matrix I = Matrix::Identity(m, m);
    auto same = [&](const Criterion& a, const Criterion& b) {
      const double va = phi_value(a, M), vb = phi_value(b, M);
      EXPECT_NEAR(va, vb, 1e-10 * std::max(1.0, std::abs(va))) << a.tag() << " vs " << b.tag();
      const Vector da = directional_values(base.with_criterion(a), w);
      const Vector db = directional_values(base.with_criterion(b), w);
      EXPECT_LT((da - db).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, da.cwiseAbs().maxCoeff()));
    };
    same(Criterion::dk(I), Criterion::d_optimal());
    for (double p : {-1.0, -0.5, -2.0}) same(Criterion::p_mean_k(p, I), Criterion::p_mean(p));
    const Vector c = optdes::testing::random_vector(rng, m);
    same(Criterion::c_optimal(c), Criterion::p_mean_k(-1.0, c));
    // p = 0 inside PMeanK is the DK criterion
    const Matrix K = optdes::testing::random_K(rng, m);
    same(Criterion::p_mean_k(0.0, K), Criterion::dk(K));
  }
}

TEST(CriterionIdentities, ScalingInfosPreservesOrderingOfD) {
  Rng rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index m = 3, n = 8;
    const auto base = optdes::testing::random_problem(rng, m, n, optdes::testing::Model::Logistic, Criterion::d_optimal());
    const double s = optdes::testing::uniform(rng, 0.1, 10.0);
    std::vector<InfoMatrix> scaled;
    for (const auto& a : base.infos()) scaled.push_back(s * a);
    const DesignMeasure w(optdes::testing::random_simplex(rng, n));
    for (const auto& crit : optdes::testing::all_criteria(rng, m)) {
      const Vector d1 = directional_values(base.with_criterion(crit), w);
      const Vector d2 = directional_values(DesignProblem(base.points(), scaled, crit), w);
      std::vector<int> o1(n), o2(n);
      std::iota(o1.begin(), o1.end(), 0);
      std::iota(o2.begin(), o2.end(), 0);
      std::stable_sort(o1.begin(), o1.end(), [&](int a, int b) { return d1[a] < d1[b]; });
      std::stable_sort(o2.begin(), o2.end(), [&](int a, int b) { return d2[a] < d2[b]; });
      EXPECT_EQ(o1, o2) << crit.tag();
      // common positive factor
      const Vector ratio = d2.cwiseQuotient(d1);
      EXPECT_LT(ratio.maxCoeff() - ratio.minCoeff(), 1e-9 * ratio.maxCoeff()) << crit.tag();
      EXPECT_GT(ratio.minCoeff(), 0.0);
    }
  }
}

TEST(Criterion, CertifiedFlag) {
  EXPECT_TRUE(Criterion::d_optimal().monotone_certified());
  EXPECT_TRUE(Criterion::p_mean(-1.0).monotone_certified());
  EXPECT_TRUE(Criterion::p_mean(-0.3).monotone_certified());
  EXPECT_FALSE(Criterion::p_mean(-2.0).monotone_certified());
  EXPECT_FALSE(Criterion::p_mean(-1.0001).monotone_certified());
  EXPECT_TRUE(Criterion::dk(Matrix::Identity(2, 2)).monotone_certified());
  EXPECT_TRUE(Criterion::p_mean_k(-1.0, Matrix::Identity(2, 2)).monotone_certified());
  EXPECT_TRUE(Criterion::p_mean_k(0.0, Matrix::Identity(2, 2)).monotone_certified());
  EXPECT_FALSE(Criterion::p_mean_k(-3.0, Matrix::Identity(2, 2)).monotone_certified());
  EXPECT_TRUE(Criterion::c_optimal(vec2(1, 0)).monotone_certified());
}

TEST(Criterion, ConstructionErrors) {
  EXPECT_THROW(Criterion::p_mean(0.0), std::invalid_argument);
  EXPECT_THROW(Criterion::p_mean(0.5), std::invalid_argument);
  EXPECT_THROW(Criterion::p_mean_k(0.1, Matrix::Identity(2, 2)), std::invalid_argument);
  EXPECT_THROW(Criterion::c_optimal(vec2(0, 0)), std::invalid_argument);
  Matrix rank_deficient(3, 2);
  rank_deficient << 1, 2, 2, 4, 3, 6;
  EXPECT_THROW(Criterion::dk(rank_deficient), std::invalid_argument);
  EXPECT_THROW(Criterion::dk(Matrix::Ones(2, 3)), std::invalid_argument);
}

TEST(Criterion, DefaultLambda) {
  EXPECT_EQ(Criterion::d_optimal().default_lambda(), 1.0);
  EXPECT_EQ(Criterion::dk(Matrix::Identity(2, 2)).default_lambda(), 1.0);
  EXPECT_EQ(Criterion::c_optimal(vec2(1, 0)).default_lambda(), 0.5);
  EXPECT_EQ(Criterion::p_mean(-1.0).default_lambda(), 0.5);
  EXPECT_EQ(Criterion::p_mean(-2.0).default_lambda(), 1.0);
}
