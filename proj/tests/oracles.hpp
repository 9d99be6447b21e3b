#pragma once

// Independent reference computations shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "termnet/autodiff.hpp"
#include "termnet/graphbuild.hpp"

namespace oracle {

/// Rank of x_i = 1 + #{x_j < x_i} + (#{x_j == x_i} - 1) / 2, by direct counting.
inline std::vector<double> count_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double below = 0, equal = 0;
    for (double v : x) {
      below += v < x[i];
      equal += v == x[i];
    }
    r[i] = 1.0 + below + (equal - 1.0) / 2.0;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = double(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(count_ranks(x), count_ranks(y));
}

/// Random symmetric matrix with unit diagonal, off-diagonal entries in [-1, 1] (some exactly 0).
inline termnet::CorrelationMatrix random_correlation(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution zero(0.1);
  termnet::CorrelationMatrix c;
  const auto en = static_cast<Eigen::Index>(n);
  c.values = termnet::RowMatrix::Identity(en, en);
  c.defined.setOnes(en, en);
  for (Eigen::Index i = 0; i < en; ++i)
    for (Eigen::Index j = i + 1; j < en; ++j) c.values(i, j) = c.values(j, i) = zero(rng) ? 0.0 : u(rng);
  return c;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Central differences of `loss` against the tape gradient for every scalar of every parameter.
/// Relative error is |fd - an| / max(|fd|, |an|, floor); the floor keeps near-zero gradients from dividing by noise.
inline GradCheck check_gradients(termnet::ad::ParameterSet& params,
                                 const std::function<termnet::ad::Var(termnet::ad::Tape&)>& loss, double h = 1e-5,
                                 double floor = 1e-6) {
  params.zero_grad();
  {
    termnet::ad::Tape tape;
    tape.backward(loss(tape));
  }
  GradCheck out;
  auto eval = [&] {
    termnet::ad::Tape tape;
    return loss(tape).value().item();
  };
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& par = params[p];
    for (std::size_t i = 0; i < par.value.size(); ++i) {
      const double keep = par.value[i];
      par.value[i] = keep + h;
      const double up = eval();
      par.value[i] = keep - h;
      const double dn = eval();
      par.value[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double an = par.grad[i];
      const double rel = std::abs(fd - an) / std::max({floor, std::abs(fd), std::abs(an)});
      out.max_rel_error = std::max(out.max_rel_error, rel);
      ++out.checked;
    }
  }
  return out;
}

inline void fill_uniform(termnet::ad::Tensor& t, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) v = u(rng);
}

}  // namespace oracle

namespace oracle {

/// Least squares with intercept by the normal equations on [1 X].
inline Eigen::VectorXd normal_equations(const termnet::RowMatrix& x, const Eigen::VectorXd& y) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(x.cols()) = x;
  const Eigen::MatrixXd ata = a.transpose() * a;
  return ata.ldlt().solve(a.transpose() * y);  // [intercept, coef...]
}

/// Largest violation of the LASSO optimality conditions for (1/2n)||y - b0 - Xb||^2 + lambda ||b||_1.
inline double lasso_kkt_violation(const termnet::RowMatrix& x, const Eigen::VectorXd& y, const Eigen::VectorXd& coef,
                                  double intercept, double lambda) {
  const double n = double(x.rows());
  const Eigen::VectorXd r = y - x * coef - Eigen::VectorXd::Constant(x.rows(), intercept);
  double worst = std::abs(r.sum() / n);  // intercept stationarity
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double g = x.col(j).dot(r) / n;
    if (coef[j] != 0.0)
      worst = std::max(worst, std::abs(g - lambda * (coef[j] > 0 ? 1.0 : -1.0)));
    else
      worst = std::max(worst, std::max(0.0, std::abs(g) - lambda));
  }
  return worst;
}

/// Centered design with X'X / n = I.
inline termnet::RowMatrix orthonormal_design(Eigen::Index n, Eigen::Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) a(i, j) = g(rng);
  a = a.rowwise() - a.colwise().mean();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  return std::sqrt(double(n)) * q;
}

/// Explained-variance shares of the centered design from its singular values, largest first.
inline std::vector<double> explained_shares(const termnet::RowMatrix& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
  const Eigen::VectorXd s2 = svd.singularValues().array().square();
  std::vector<double> out;
  for (Eigen::Index i = 0; i < s2.size(); ++i) out.push_back(s2[i] / s2.sum());
  return out;
}

}  // namespace oracle
