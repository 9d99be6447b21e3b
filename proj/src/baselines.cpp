#include "termnet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

namespace termnet {

double naive_forecast(Quantity task, double previous_log_rv) {
  switch (task) {
    case Quantity::RETURN: return 1.0;
    case Quantity::VOLATILITY: return previous_log_rv;
    case Quantity::VOLUME: return 0.0;
  }
  return kMissing;
}

Eigen::VectorXd LinearModel::predict(const RowMatrix& x) const {
  if (x.cols() != coef.size()) throw InvalidArgument("LinearModel::predict: feature count mismatch");
  Eigen::VectorXd out = x * coef;
  out.array() += intercept;
  return out;
}

namespace {

void check_xy(const RowMatrix& x, const Eigen::VectorXd& y, const char* what) {
  if (x.rows() != y.size()) throw InvalidArgument(std::string(what) + ": X and y row counts differ");
  if (x.rows() < 2 || x.cols() < 1) throw InvalidArgument(std::string(what) + ": too few rows or no columns");
  if (!x.allFinite() || !y.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite input");
}

struct Centered {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::RowVectorXd x_mean;
  double y_mean;
};

Centered center(const RowMatrix& x, const Eigen::VectorXd& y) {
  Centered c;
  c.x_mean = x.colwise().mean();
  c.y_mean = y.mean();
  c.x = x.rowwise() - c.x_mean;
  c.y = y.array() - c.y_mean;
  return c;
}

double soft_threshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

LinearModel lasso_centered(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda, const LassoConfig& cfg,
                           const Eigen::VectorXd* warm) {
  const auto n = static_cast<double>(x.rows());
  const auto p = x.cols();
  LinearModel m;
  m.method = "LASSO";
  m.lambda = lambda;
  m.coef = warm ? *warm : Eigen::VectorXd::Zero(p);
  Eigen::VectorXd col_sq = x.colwise().squaredNorm().transpose() / n;
  Eigen::VectorXd r = y - x * m.coef;
  m.converged = false;
  for (m.sweeps = 1; m.sweeps <= cfg.max_sweeps; ++m.sweeps) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (col_sq[j] <= 0.0) {
        m.coef[j] = 0.0;
        continue;
      }
      const double old = m.coef[j];
      const double rho = x.col(j).dot(r) / n + col_sq[j] * old;
      const double nw = soft_threshold(rho, lambda) / col_sq[j];
      if (nw != old) {
        r -= (nw - old) * x.col(j);
        m.coef[j] = nw;
        max_change = std::max(max_change, std::fabs(nw - old) * std::sqrt(col_sq[j]));
      }
    }
    if (max_change < cfg.tolerance) {
      m.converged = true;
      break;
    }
  }
  m.sweeps = std::min(m.sweeps, cfg.max_sweeps);
  return m;
}

std::vector<double> lambda_grid(double lambda_max, const LassoConfig& cfg) {
  std::vector<double> grid;
  if (cfg.n_lambdas < 1) throw InvalidArgument("LassoConfig: n_lambdas must be positive");
  if (lambda_max <= 0.0) return {0.0};
  const double lo = std::log(lambda_max * cfg.lambda_min_ratio), hi = std::log(lambda_max);
  for (int i = 0; i < cfg.n_lambdas; ++i) {
    const double t = cfg.n_lambdas == 1 ? 0.0 : static_cast<double>(i) / (cfg.n_lambdas - 1);
    grid.push_back(i == 0 ? lambda_max : std::exp(hi + t * (lo - hi)));
  }
  return grid;
}

}  // namespace

LinearModel ols_fit(const RowMatrix& x, const Eigen::VectorXd& y) {
  check_xy(x, y, "ols_fit");
  const Centered c = center(x, y);
  LinearModel m;
  m.method = "OLS";
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(c.x);
  if (qr.rank() == c.x.cols() && c.x.rows() >= c.x.cols()) {
    m.coef = qr.solve(c.y);
  } else {
    m.ridge_fallback = true;
    Eigen::MatrixXd g = c.x.transpose() * c.x;
    g.diagonal().array() += 1e-8;
    m.coef = g.ldlt().solve(c.x.transpose() * c.y);
  }
  m.intercept = c.y_mean - c.x_mean.dot(m.coef);
  return m;
}

double lasso_lambda_max(const RowMatrix& x, const Eigen::VectorXd& y) {
  check_xy(x, y, "lasso_lambda_max");
  const Centered c = center(x, y);
  return (c.x.transpose() * c.y).cwiseAbs().maxCoeff() / static_cast<double>(x.rows());
}

LinearModel lasso_fit_lambda(const RowMatrix& x, const Eigen::VectorXd& y, double lambda, const LassoConfig& cfg,
                             const Eigen::VectorXd* warm_start) {
  check_xy(x, y, "lasso_fit_lambda");
  if (!(lambda >= 0)) throw InvalidArgument("lasso_fit_lambda: lambda must be non-negative");
  const Centered c = center(x, y);
  LinearModel m = lasso_centered(c.x, c.y, lambda, cfg, warm_start);
  m.intercept = c.y_mean - c.x_mean.dot(m.coef);
  return m;
}

LinearModel lasso_fit(const RowMatrix& x, const Eigen::VectorXd& y, const LassoConfig& cfg) {
  check_xy(x, y, "lasso_fit");
  const auto n = x.rows();
  if (cfg.folds < 2 || cfg.folds > n) throw InvalidArgument("lasso_fit: fold count must be in [2, rows]");
  const std::vector<double> grid = lambda_grid(lasso_lambda_max(x, y), cfg);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (!cfg.contiguous_folds) {
    std::mt19937_64 rng(cfg.fold_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) fold_of[order[i]] = static_cast<int>(i * cfg.folds / n);

  std::vector<double> cv(grid.size(), 0.0);
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (Eigen::Index i = 0; i < n; ++i) (fold_of[i] == f ? te : tr).push_back(i);
    RowMatrix xtr = x(tr, Eigen::all), xte = x(te, Eigen::all);
    Eigen::VectorXd ytr = y(tr), yte = y(te);
    const Centered c = center(xtr, ytr);
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(x.cols());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      LinearModel m = lasso_centered(c.x, c.y, grid[g], cfg, &warm);
      warm = m.coef;
      m.intercept = c.y_mean - c.x_mean.dot(m.coef);
      cv[g] += (yte - m.predict(xte)).squaredNorm() / static_cast<double>(te.size());
    }
  }
  for (double& e : cv) e /= cfg.folds;
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (cv[g] < cv[best]) best = g;

  // Refit along the path to the chosen lambda for a good warm start.
  const Centered c = center(x, y);
  Eigen::VectorXd warm = Eigen::VectorXd::Zero(x.cols());
  LinearModel m;
  for (std::size_t g = 0; g <= best; ++g) {
    m = lasso_centered(c.x, c.y, grid[g], cfg, &warm);
    warm = m.coef;
  }
  m.intercept = c.y_mean - c.x_mean.dot(m.coef);
  m.lambda_grid = grid;
  m.cv_error = cv;
  return m;
}

LinearModel pcr_fit(const RowMatrix& x, const Eigen::VectorXd& y, double variance_target) {
  check_xy(x, y, "pcr_fit");
  if (!(variance_target > 0 && variance_target <= 1)) throw InvalidArgument("pcr_fit: variance target in (0,1]");
  const Centered c = center(x, y);
  const Eigen::MatrixXd cov = c.x.transpose() * c.x / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  // Eigen sorts ascending; walk from the largest.
  const Eigen::VectorXd ev = es.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd vecs = es.eigenvectors().rowwise().reverse();
  const double total = ev.sum();
  LinearModel m;
  m.method = "PCR";
  if (total <= 0.0) {
    m.coef = Eigen::VectorXd::Zero(x.cols());
    m.intercept = c.y_mean;
    return m;
  }
  const double tol = 1e-12 * ev[0];
  int rank = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] > tol) ++rank;
  double cum = 0.0;
  int k = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    cum += ev[i];
    m.explained_ratio.push_back(cum / total);
    if (k == 0 && cum / total >= variance_target - 1e-10) k = static_cast<int>(i) + 1;
  }
  k = std::clamp(k, 1, std::max(rank, 1));
  m.n_components = k;
  const Eigen::MatrixXd v = vecs.leftCols(k);
  const Eigen::MatrixXd z = c.x * v;
  Eigen::VectorXd gamma(k);
  for (int j = 0; j < k; ++j) {
    const double zz = z.col(j).squaredNorm();
    gamma[j] = zz > 0 ? z.col(j).dot(c.y) / zz : 0.0;
  }
  m.coef = v * gamma;
  m.intercept = c.y_mean - c.x_mean.dot(m.coef);
  return m;
}

std::vector<FeatureImportance> feature_importance(std::span<const LinearModel> models) {
  if (models.empty()) throw InvalidArgument("feature_importance: no models");
  const auto& names = models[0].feature_names;
  const std::size_t p = static_cast<std::size_t>(models[0].coef.size());
  if (!names.empty() && names.size() != p) throw InvalidArgument("feature_importance: names do not match coefficients");
  std::vector<std::vector<double>> ranks(p);
  std::vector<int> nonzero(p, 0);
  for (const auto& m : models) {
    if (static_cast<std::size_t>(m.coef.size()) != p || m.feature_names != names)
      throw InvalidArgument("feature_importance: models use different feature sets");
    std::vector<std::size_t> idx(p);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return std::fabs(m.coef[a]) < std::fabs(m.coef[b]); });
    for (std::size_t pos = 0; pos < p;) {
      std::size_t end = pos;
      while (end < p && std::fabs(m.coef[idx[end]]) == std::fabs(m.coef[idx[pos]])) ++end;
      for (std::size_t q = pos; q < end; ++q) ranks[idx[q]].push_back(static_cast<double>(pos + 1));
      pos = end;
    }
    for (std::size_t j = 0; j < p; ++j)
      if (m.coef[j] != 0.0) ++nonzero[j];
  }
  std::vector<FeatureImportance> out;
  for (std::size_t j = 0; j < p; ++j)
    out.push_back({names.empty() ? "x" + std::to_string(j) : names[j], quantile(ranks[j], 0.5), nonzero[j]});
  std::stable_sort(out.begin(), out.end(), [](const FeatureImportance& a, const FeatureImportance& b) {
    if (a.median_rank != b.median_rank) return a.median_rank > b.median_rank;
    return a.feature < b.feature;
  });
  return out;
}

std::string linear_model_to_json(const LinearModel& m) {
  nlohmann::json coefs = nlohmann::json::object();
  for (Eigen::Index j = 0; j < m.coef.size(); ++j) {
    const std::string name = static_cast<std::size_t>(j) < m.feature_names.size()
                                 ? m.feature_names[static_cast<std::size_t>(j)]
                                 : "x" + std::to_string(j);
    coefs[name] = m.coef[j];
  }
  nlohmann::json j = {{"method", m.method}, {"intercept", m.intercept}, {"coefficients", coefs}};
  if (m.method == "OLS") j["ridge_fallback"] = m.ridge_fallback;
  if (m.method == "LASSO") {
    j["lambda"] = m.lambda;
    j["converged"] = m.converged;
    j["lambda_grid"] = m.lambda_grid;
    j["cv_error"] = m.cv_error;
  }
  if (m.method == "PCR") {
    j["n_components"] = m.n_components;
    j["cumulative_explained"] = m.explained_ratio;
  }
  return j.dump(2);
}

void write_feature_importance_csv(std::span<const FeatureImportance> rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "feature,median_rank,nonzero_count\n";
  for (const auto& r : rows) out << r.feature << ',' << format_double(r.median_rank) << ',' << r.nonzero_count << '\n';
}

}  // namespace termnet
