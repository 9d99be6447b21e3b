#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "termnet/baselines.hpp"

using namespace termnet;

namespace {

RowMatrix random_x(Eigen::Index n, Eigen::Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  RowMatrix x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = g(rng);
  return x;
}

Eigen::VectorXd noisy_linear(const RowMatrix& x, std::mt19937_64& rng, double noise = 0.5) {
  std::normal_distribution<double> g;
  Eigen::VectorXd beta(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) beta[j] = (j % 3 == 0) ? 0.0 : g(rng);
  Eigen::VectorXd y = x * beta;
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += 0.3 + noise * g(rng);
  return y;
}

}  // namespace

TEST_CASE("naive forecasts") {
  CHECK(naive_forecast(Quantity::RETURN) == 1.0);
  CHECK(naive_forecast(Quantity::VOLATILITY, -9.2) == -9.2);
  CHECK(naive_forecast(Quantity::VOLUME) == 0.0);
}

TEST_CASE("OLS") {
  std::mt19937_64 rng(1);
  const RowMatrix x = random_x(50, 4, rng);
  Eigen::VectorXd exact = x * Eigen::Vector4d(1, -2, 0.5, 3);
  exact.array() += 7.0;
  const auto m = ols_fit(x, exact);
  CHECK((m.predict(x) - exact).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(m.intercept == doctest::Approx(7.0));

  const RowMatrix x1 = random_x(40, 1, rng);
  const Eigen::VectorXd y1 = noisy_linear(x1, rng) + 0.8 * x1.col(0);
  const double mx = x1.col(0).mean(), my = y1.mean();
  const double cov = ((x1.col(0).array() - mx) * (y1.array() - my)).sum();
  const double var = (x1.col(0).array() - mx).square().sum();
  CHECK(ols_fit(x1, y1).coef[0] == doctest::Approx(cov / var).epsilon(1e-12));

  for (int trial = 0; trial < 5; ++trial) {
    const RowMatrix xr = random_x(80, 6, rng);
    const Eigen::VectorXd yr = noisy_linear(xr, rng);
    const auto fit = ols_fit(xr, yr);
    const Eigen::VectorXd b = oracle::normal_equations(xr, yr);
    Eigen::VectorXd pred = xr * b.tail(6);
    pred.array() += b[0];
    CHECK((fit.predict(xr) - pred).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK_FALSE(fit.ridge_fallback);
  }

  RowMatrix dup = random_x(30, 3, rng);
  dup.col(2) = dup.col(0);
  CHECK(ols_fit(dup, noisy_linear(dup, rng)).ridge_fallback);
}

TEST_CASE("LASSO edge cases and optimality") {
  std::mt19937_64 rng(2);
  const RowMatrix x = random_x(100, 8, rng);
  const Eigen::VectorXd y = noisy_linear(x, rng);
  const double lmax = lasso_lambda_max(x, y);
  CHECK(lasso_fit_lambda(x, y, lmax).coef.cwiseAbs().maxCoeff() == 0.0);
  CHECK(lasso_fit_lambda(x, y, 2 * lmax).coef.cwiseAbs().maxCoeff() == 0.0);
  CHECK(lasso_fit_lambda(x, y, 0.999 * lmax).coef.cwiseAbs().maxCoeff() > 0.0);

  const auto zero = lasso_fit_lambda(x, y, 0.0);
  CHECK((zero.coef - ols_fit(x, y).coef).cwiseAbs().maxCoeff() < 1e-8);

  for (double frac : {0.5, 0.1, 0.01}) {
    const auto m = lasso_fit_lambda(x, y, frac * lmax);
    CHECK(m.converged);
    CHECK(oracle::lasso_kkt_violation(x, y, m.coef, m.intercept, frac * lmax) <= 1e-6);
  }
}

TEST_CASE("LASSO on an orthonormal design is soft-thresholded OLS") {
  std::mt19937_64 rng(3);
  const RowMatrix x = oracle::orthonormal_design(60, 5, rng);
  const Eigen::VectorXd y = noisy_linear(x, rng, 0.2);
  const Eigen::VectorXd z = x.transpose() * (y.array() - y.mean()).matrix() / 60.0;
  for (double lambda : {0.05, 0.3, 1.0}) {
    const auto m = lasso_fit_lambda(x, y, lambda);
    for (Eigen::Index j = 0; j < 5; ++j) {
      const double st = z[j] > lambda ? z[j] - lambda : (z[j] < -lambda ? z[j] + lambda : 0.0);
      CHECK(std::abs(m.coef[j] - st) <= 1e-8);
    }
  }
}

TEST_CASE("cross-validated LASSO") {
  std::mt19937_64 rng(4);
  const RowMatrix x = random_x(200, 6, rng);
  const Eigen::VectorXd y = noisy_linear(x, rng);
  const auto m = lasso_fit(x, y);
  REQUIRE(m.lambda_grid.size() == 50);
  CHECK(m.lambda_grid.front() == doctest::Approx(lasso_lambda_max(x, y)));
  CHECK(m.lambda_grid.back() == doctest::Approx(1e-4 * lasso_lambda_max(x, y)));
  for (std::size_t g = 1; g < m.lambda_grid.size(); ++g) CHECK(m.lambda_grid[g] < m.lambda_grid[g - 1]);
  const auto best = std::min_element(m.cv_error.begin(), m.cv_error.end()) - m.cv_error.begin();
  CHECK(m.lambda == m.lambda_grid[std::size_t(best)]);
  CHECK(oracle::lasso_kkt_violation(x, y, m.coef, m.intercept, m.lambda) <= 1e-6);
  CHECK_THROWS_AS(lasso_fit(x.topRows(5), y.head(5)), InvalidArgument);
}

TEST_CASE("PCR component count") {
  std::mt19937_64 rng(5);
  const RowMatrix q = oracle::orthonormal_design(100, 4, rng);
  RowMatrix dominant = q;
  dominant.col(0) *= std::sqrt(0.95);
  for (int j = 1; j < 4; ++j) dominant.col(j) *= std::sqrt(0.05 / 3);
  const Eigen::VectorXd yd = noisy_linear(dominant, rng);
  CHECK(pcr_fit(dominant, yd).n_components == 1);

  for (int p : {7, 10}) {
    const RowMatrix iso = oracle::orthonormal_design(120, p, rng);
    CHECK(pcr_fit(iso, noisy_linear(iso, rng)).n_components == int(std::ceil(0.9 * p)));
  }

  const RowMatrix x = random_x(90, 6, rng);
  const Eigen::VectorXd y = noisy_linear(x, rng);
  const auto full = pcr_fit(x, y, 1.0);
  CHECK(full.n_components == 6);
  CHECK((full.predict(x) - ols_fit(x, y).predict(x)).cwiseAbs().maxCoeff() < 1e-9);

  for (int trial = 0; trial < 10; ++trial) {
    RowMatrix xr = random_x(60, 8, rng);
    for (int j = 0; j < 8; ++j) xr.col(j) *= 1.0 + j;
    const auto m = pcr_fit(xr, noisy_linear(xr, rng));
    const auto share = oracle::explained_shares(xr);
    double before = 0.0;
    for (int j = 0; j < m.n_components - 1; ++j) before += share[j];
    const double at = before + share[m.n_components - 1];
    CHECK(at >= 0.9 - 1e-10);
    CHECK(before < 0.9);
  }
}

TEST_CASE("feature importance") {
  std::vector<LinearModel> ms(3);
  const double coefs[3][4] = {{0, 3, -1, 0}, {2, 0, 0, 0}, {1, -2, 5, 0}};
  for (int k = 0; k < 3; ++k) {
    ms[k].feature_names = {"x0", "x1", "x2", "x3"};
    ms[k].coef = Eigen::Map<const Eigen::Vector4d>(coefs[k]);
  }
  const auto fi = feature_importance(ms);
  REQUIRE(fi.size() == 4);
  CHECK(fi[0].feature == "x1");
  CHECK(fi[0].median_rank == 3);
  CHECK(fi[1].feature == "x2");
  CHECK(fi[1].median_rank == 3);
  CHECK(fi[2].feature == "x0");
  CHECK(fi[2].median_rank == 2);
  CHECK(fi[3].feature == "x3");
  CHECK(fi[3].median_rank == 1);
  CHECK(fi[3].nonzero_count == 0);
  CHECK(fi[0].nonzero_count == 2);

  const auto single = feature_importance(std::span(ms).first(1));
  CHECK(single[0].feature == "x1");
  CHECK(single[0].median_rank == 4);
  CHECK(single[1].median_rank == 3);
}
