#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "termnet/common.hpp"
#include "termnet/features.hpp"

namespace termnet {

/// Always-long (+1) for returns, the previous period's log-RV for volatility, 0 for volume.
double naive_forecast(Quantity task, double previous_log_rv = kMissing);

struct LinearModel {
  std::string method;  // OLS, LASSO, PCR
  std::vector<std::string> feature_names;
  Eigen::VectorXd coef;
  double intercept = 0.0;
  // Fit metadata.
  bool ridge_fallback = false;
  double lambda = 0.0;
  bool converged = true;
  int sweeps = 0;
  int n_components = 0;
  std::vector<double> explained_ratio;  // cumulative, PCR only
  std::vector<double> lambda_grid;      // LASSO only, descending
  std::vector<double> cv_error;         // mean held-out MSE per grid point

  Eigen::VectorXd predict(const RowMatrix& x) const;
};

/// Least squares with intercept; falls back to ridge 1e-8 when X is rank deficient.
LinearModel ols_fit(const RowMatrix& x, const Eigen::VectorXd& y);

struct LassoConfig {
  int folds = 10;
  int n_lambdas = 50;
  double lambda_min_ratio = 1e-4;
  int max_sweeps = 10000;
  double tolerance = 1e-12;
  bool contiguous_folds = true;
  std::uint64_t fold_seed = 0;
};

/// max_j |x_j' (y - mean y)| / n over centered columns.
double lasso_lambda_max(const RowMatrix& x, const Eigen::VectorXd& y);
/// Coordinate descent for (1/2n)||y - b0 - X b||^2 + lambda ||b||_1 with an unpenalised intercept.
LinearModel lasso_fit_lambda(const RowMatrix& x, const Eigen::VectorXd& y, double lambda,
                             const LassoConfig& cfg = {}, const Eigen::VectorXd* warm_start = nullptr);
/// Cross-validated LASSO over a log-spaced grid on [ratio * lambda_max, lambda_max], refit on all rows.
LinearModel lasso_fit(const RowMatrix& x, const Eigen::VectorXd& y, const LassoConfig& cfg = {});

/// Regression on the fewest leading principal components whose cumulative explained variance reaches the target.
LinearModel pcr_fit(const RowMatrix& x, const Eigen::VectorXd& y, double variance_target = 0.90);

struct FeatureImportance {
  std::string feature;
  double median_rank = 0.0;
  int nonzero_count = 0;
};

/// Ranks |coef| ascending within each model (ties share the lowest rank), then takes the median across
/// models. Higher rank = more important. Sorted by median rank descending, then name.
std::vector<FeatureImportance> feature_importance(std::span<const LinearModel> models);

std::string linear_model_to_json(const LinearModel& m);
void write_feature_importance_csv(std::span<const FeatureImportance> rows, const std::filesystem::path& path);

}  // namespace termnet
