#include <doctest.h>

#include <random>

#include "binn/baselines.hpp"
#include "binn/metrics.hpp"
#include "test_support.hpp"

using namespace binn;
using binn::testing::finite_difference_gradient;
using binn::testing::max_relative_error;
using binn::testing::random_matrix;
using binn::testing::random_vector;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("ridge hand-solved normal equation") {
  Matrix X(2, 1);
  X << 1, -1;
  const Vector y = vec({1, -1});
  const auto model = ridge_fit(X, y, 1.0);
  CHECK(model.coefficients[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  const Vector pred = model.predict(X);
  CHECK(pred[0] == doctest::Approx(2.0 / 3.0));
  CHECK(pred[1] == doctest::Approx(-2.0 / 3.0));
}

TEST_CASE("ridge at alpha 0 interpolates a square full-rank system") {
  std::mt19937_64 rng(41);
  const Matrix X = random_matrix(5, 5, rng);
  const Vector y = random_vector(5, rng);
  const auto model = ridge_fit(X, y, 0.0);
  CHECK((model.predict(X) - y).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("ridge at alpha 0 rejects rank-deficient designs") {
  std::mt19937_64 rng(43);
  Matrix X = random_matrix(8, 3, rng);
  X.col(2) = X.col(1);  // duplicated column
  const Vector y = random_vector(8, rng);
  CHECK_THROWS_AS(ridge_fit(X, y, 0.0), SingularSystem);
  CHECK_NOTHROW(ridge_fit(X, y, 0.1));
}

TEST_CASE("infinite shrinkage pulls predictions to the mean") {
  std::mt19937_64 rng(47);
  const Matrix X = random_matrix(20, 4, rng);
  const Vector y = random_vector(20, rng);
  const auto model = ridge_fit(X, y, 1e9);
  const double ybar = y.mean();
  CHECK((model.predict(X).array() - ybar).abs().maxCoeff() <= 1e-3);
}

TEST_CASE("gram and feature forms agree") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 4 + trial % 7;
    const Index p = 3 + trial % 9;  // covers n < p and n >= p
    const Matrix X = random_matrix(n, p, rng);
    const Vector y = random_vector(n, rng);
    const double alpha = 0.05 + 0.3 * (trial % 5);
    const auto a = ridge_fit(X, y, alpha);
    const auto b = ridge_fit_feature_form(X, y, alpha);
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(std::abs(a.intercept - b.intercept) <= 1e-8);
  }
}

TEST_CASE("lasso critical penalty zeroes every coefficient") {
  std::mt19937_64 rng(59);
  const Matrix X = random_matrix(30, 6, rng);
  const Vector y = random_vector(30, rng);
  const double critical = lasso_critical_penalty(X, y);
  const auto at = elastic_net_fit(X, y, critical * 1.0001, 1.0);
  CHECK(at.coefficients.cwiseAbs().maxCoeff() == 0.0);
  const auto below = elastic_net_fit(X, y, critical * 0.5, 1.0);
  CHECK(below.coefficients.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("elastic net at penalty 0 matches OLS") {
  std::mt19937_64 rng(61);
  const Matrix X = random_matrix(40, 5, rng);
  const Vector y = random_vector(40, rng);
  const auto en = elastic_net_fit(X, y, 0.0, 0.5, 1e-10, 100000);
  const auto ols = ridge_fit(X, y, 0.0);
  CHECK((en.coefficients - ols.coefficients).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(std::abs(en.intercept - ols.intercept) <= 1e-6);
}

TEST_CASE("univariate elastic net equals the soft-threshold closed form") {
  std::mt19937_64 rng(67);
  const Index n = 200;
  Vector x = random_vector(n, rng);
  // standardize: zero mean, unit (population) variance
  x.array() -= x.mean();
  x /= std::sqrt(x.squaredNorm() / static_cast<double>(n));
  Vector y = 0.8 * x + 0.3 * random_vector(n, rng);
  const double cov = x.dot(Vector(y.array() - y.mean())) / static_cast<double>(n);

  for (double penalty : {0.01, 0.1, 0.4}) {
    for (double l1_ratio : {0.0, 0.3, 1.0}) {
      const auto model = elastic_net_fit(x, y, penalty, l1_ratio, 1e-12, 100000);
      const double l1 = penalty * l1_ratio;
      const double l2 = penalty * (1 - l1_ratio);
      const double expected =
          (std::abs(cov) > l1 ? (cov > 0 ? cov - l1 : cov + l1) : 0.0) / (1.0 + l2);
      CHECK(model.coefficients[0] == doctest::Approx(expected).epsilon(1e-6));
    }
  }
}

TEST_CASE("elastic net satisfies coordinate subgradient optimality") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 50, p = 8;
    const Matrix X = random_matrix(n, p, rng);
    Vector beta_true = Vector::Zero(p);
    beta_true[0] = 1.5;
    beta_true[3] = -0.7;
    const Vector y = X * beta_true + 0.1 * random_vector(n, rng);
    const double penalty = 0.05 + 0.1 * trial;
    const double l1_ratio = trial % 2 == 0 ? 1.0 : 0.35;
    const auto model = elastic_net_fit(X, y, penalty, l1_ratio, 1e-10, 200000);
    REQUIRE(model.converged);

    const Vector xc_mean = X.colwise().mean();
    const Matrix Xc = X.rowwise() - xc_mean.transpose();
    const Vector yc = y.array() - y.mean();
    const Vector residual = yc - Xc * model.coefficients;
    const double l1 = penalty * l1_ratio;
    const double l2 = penalty * (1 - l1_ratio);
    for (Index k = 0; k < p; ++k) {
      const double g = -Xc.col(k).dot(residual) / static_cast<double>(n) +
                       l2 * model.coefficients[k];
      if (model.coefficients[k] > 0) {
        CHECK(std::abs(g + l1) <= 1e-6);
      } else if (model.coefficients[k] < 0) {
        CHECK(std::abs(g - l1) <= 1e-6);
      } else {
        CHECK(std::abs(g) <= l1 + 1e-6);
      }
    }
  }
}

TEST_CASE("elastic net support shrinks as l1_ratio rises at matched penalty") {
  // Mirrors the sparsity trend across the L1-ratio sweep: lasso keeps far
  // fewer features than a nearly-ridge mix.
  std::mt19937_64 rng(73);
  const Index n = 80, p = 40;
  const Matrix X = random_matrix(n, p, rng);
  Vector beta_true = Vector::Zero(p);
  for (Index k = 0; k < 10; ++k) beta_true[k] = random_vector(1, rng)[0];
  const Vector y = X * beta_true + 0.2 * random_vector(n, rng);

  const double penalty = 0.1;
  const auto lasso = elastic_net_fit(X, y, penalty, 1.0);
  const auto nearly_ridge = elastic_net_fit(X, y, penalty, 0.05);
  CHECK(lasso.support().size() <= nearly_ridge.support().size());
}

TEST_CASE("elastic net flags non-convergence at a tiny iteration cap") {
  std::mt19937_64 rng(79);
  const Matrix X = random_matrix(60, 20, rng);
  const Vector y = random_vector(60, rng);
  const auto model = elastic_net_fit(X, y, 1e-6, 0.5, 1e-14, 2);
  CHECK_FALSE(model.converged);
  CHECK(model.iterations == 2);
}

TEST_CASE("fcn budget solver lands within 10 percent") {
  for (Index p : {20, 100, 1600}) {
    for (Index target : {500, 3000, 13000}) {
      if (target < p) continue;  // narrower than one unit per feature
      const SubnetSpec spec = fcn_spec_for_budget(p, target, 1);
      FcnModel model(p, spec, 0);
      const double rel = std::abs(static_cast<double>(model.parameter_count() - target)) /
                         static_cast<double>(target);
      CHECK(rel <= 0.10);
    }
  }
  const SubnetSpec two = fcn_spec_for_budget(50, 5000, 2);
  FcnModel deep(50, two, 0);
  CHECK(std::abs(static_cast<double>(deep.parameter_count()) - 5000.0) / 5000.0 <= 0.10);
}

TEST_CASE("fcn gradients match finite differences") {
  std::mt19937_64 rng(83);
  SubnetSpec spec;
  spec.hidden_widths = {5};
  spec.activation = Activation::kSigmoid;
  FcnModel model(7, spec, 17);
  const Matrix X = random_matrix(12, 7, rng);
  const Vector y = random_vector(12, rng);
  LossConfig cfg{LossMode::kMse, 0.0};
  Vector analytic;
  model.loss_and_gradient(X, y, nullptr, cfg, analytic);
  const Vector fd = finite_difference_gradient(model, X, y, nullptr, cfg);
  CHECK(max_relative_error(analytic, fd) <= 1e-4);
}
