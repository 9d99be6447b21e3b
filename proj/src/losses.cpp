#include "termnet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace termnet {

std::string loss_name(LossKind k) {
  switch (k) {
    case LossKind::MSE: return "MSE";
    case LossKind::MAE: return "MAE";
    case LossKind::SR: return "SR";
    case LossKind::MIXED: return "MIXED";
    case LossKind::QLIKE: return "QLIKE";
    case LossKind::HMSE: return "HMSE";
  }
  return "MSE";
}

LossKind parse_loss(std::string_view s) {
  for (auto k : {LossKind::MSE, LossKind::MAE, LossKind::SR, LossKind::MIXED, LossKind::QLIKE, LossKind::HMSE})
    if (loss_name(k) == s) return k;
  throw InvalidArgument("unknown loss: " + std::string(s));
}

LossKind default_loss(Quantity task) {
  switch (task) {
    case Quantity::RETURN: return LossKind::MIXED;
    case Quantity::VOLATILITY: return LossKind::QLIKE;
    case Quantity::VOLUME: return LossKind::MAE;
  }
  return LossKind::MSE;
}

bool loss_compatible(LossKind k, Quantity task) {
  if (k == LossKind::SR || k == LossKind::MIXED) return task == Quantity::RETURN;
  if (k == LossKind::QLIKE || k == LossKind::HMSE) return task == Quantity::VOLATILITY;
  return true;
}

void LossConfig::validate() const {
  if (!(epsilon > 0)) throw InvalidArgument("LossConfig: epsilon must be positive");
  if (!(alpha >= 0)) throw InvalidArgument("LossConfig: alpha must be non-negative");
}

namespace {

void check_pair(std::span<const double> y, std::span<const double> yhat, std::size_t min_len, const char* what) {
  if (y.size() != yhat.size()) throw InvalidArgument(std::string(what) + ": length mismatch");
  if (y.size() < min_len)
    throw InvalidArgument(std::string(what) + ": needs at least " + std::to_string(min_len) + " values");
}

}  // namespace

double mse(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat, 1, "mse");
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

double mae(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat, 1, "mae");
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::fabs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

double sr_loss(std::span<const double> y, std::span<const double> yhat, double epsilon) {
  check_pair(y, yhat, 1, "sr_loss");
  if (!(epsilon > 0)) throw InvalidArgument("sr_loss: epsilon must be positive");
  const auto n = static_cast<double>(y.size());
  std::vector<double> r(y.size());
  double m = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    r[i] = y[i] * std::tanh(yhat[i] / epsilon);
    m += r[i];
  }
  m /= n;
  double v = 0;
  for (double x : r) v += (x - m) * (x - m);
  return -m / (std::sqrt(v / n) + epsilon);
}

double mixed_loss(std::span<const double> y, std::span<const double> yhat, const LossConfig& cfg) {
  cfg.validate();
  return mse(y, yhat) + cfg.alpha * sr_loss(y, yhat, cfg.epsilon);
}

double qlike(std::span<const double> y, std::span<const double> yhat, std::size_t* clamped) {
  check_pair(y, yhat, 1, "qlike");
  std::size_t nclamp = 0;
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double d = y[i] - yhat[i];
    if (std::fabs(d) > kExpClamp) {
      d = std::clamp(d, -kExpClamp, kExpClamp);
      ++nclamp;
    }
    s += std::exp(d) - d - 1.0;
  }
  if (clamped) *clamped = nclamp;
  return s / static_cast<double>(y.size());
}

double hmse(std::span<const double> y, std::span<const double> yhat, std::size_t* clamped) {
  check_pair(y, yhat, 1, "hmse");
  std::size_t nclamp = 0;
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double d = yhat[i] - y[i];
    if (std::fabs(d) > kExpClamp) {
      d = std::clamp(d, -kExpClamp, kExpClamp);
      ++nclamp;
    }
    const double e = 1.0 - std::exp(d);
    s += e * e;
  }
  if (clamped) *clamped = nclamp;
  return s / static_cast<double>(y.size());
}

ad::Var mse(ad::Var y, ad::Var yhat) {
  ad::Var d = sub(y, yhat);
  return mean(hadamard(d, d));
}

ad::Var mae(ad::Var y, ad::Var yhat) { return mean(abs(sub(y, yhat))); }

ad::Var sr_loss(ad::Var y, ad::Var yhat, double epsilon) {
  if (!(epsilon > 0)) throw InvalidArgument("sr_loss: epsilon must be positive");
  ad::Var r = hadamard(y, tanh(scale(yhat, 1.0 / epsilon)));
  return scale(div(mean(r), add_scalar(sd(r), epsilon)), -1.0);
}

ad::Var mixed_loss(ad::Var y, ad::Var yhat, const LossConfig& cfg) {
  cfg.validate();
  ad::Var m = mse(y, yhat);
  if (cfg.alpha == 0.0) return m;
  return add(m, scale(sr_loss(y, yhat, cfg.epsilon), cfg.alpha));
}

ad::Var qlike(ad::Var y, ad::Var yhat) {
  ad::Var d = clamp(sub(y, yhat), -kExpClamp, kExpClamp);
  return mean(add_scalar(sub(exp(d), d), -1.0));
}

ad::Var masked_loss(ad::Var pred, const ad::Tensor& target, std::span<const std::uint8_t> mask, LossKind kind,
                    const LossConfig& cfg) {
  if (!pred.value().same_shape(target)) throw InvalidArgument("masked_loss: forecast and target shapes differ");
  if (mask.size() != target.size()) throw InvalidArgument("masked_loss: mask size mismatch");
  ad::Tape& tape = *pred.tape;
  const std::size_t rows = target.rows(), n = target.cols();

  auto gathered = [&](std::span<const std::size_t> idx) {
    ad::Tensor y(idx.size(), 1);
    for (std::size_t i = 0; i < idx.size(); ++i) y[i] = target[idx[i]];
    return std::pair{tape.constant(std::move(y)), gather(pred, idx)};
  };

  std::vector<std::size_t> all;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) all.push_back(i);
  if (all.empty()) throw InvalidArgument("masked_loss: no valid entries");

  auto sr_part = [&]() {
    std::vector<ad::Var> terms;
    for (std::size_t v = 0; v < n; ++v) {
      std::vector<std::size_t> idx;
      for (std::size_t r = 0; r < rows; ++r)
        if (mask[r * n + v]) idx.push_back(r * n + v);
      if (idx.size() < 2) continue;
      auto [y, yhat] = gathered(idx);
      terms.push_back(sr_loss(y, yhat, cfg.epsilon));
    }
    if (terms.empty()) return tape.constant(ad::Tensor::scalar(0.0));
    return scale(sum(concat(terms, 0)), 1.0 / static_cast<double>(terms.size()));
  };

  auto [y, yhat] = gathered(all);
  switch (kind) {
    case LossKind::MSE: return mse(y, yhat);
    case LossKind::MAE: return mae(y, yhat);
    case LossKind::QLIKE: return qlike(y, yhat);
    case LossKind::SR: return sr_part();
    case LossKind::MIXED: {
      ad::Var m = mse(y, yhat);
      if (cfg.alpha == 0.0) return m;
      return add(m, scale(sr_part(), cfg.alpha));
    }
    case LossKind::HMSE: break;
  }
  throw InvalidArgument("masked_loss: " + loss_name(kind) + " is an evaluation metric only");
}

DailyPnl daily_pnl(std::span<const std::int64_t> day_of_period, std::span<const double> returns,
                   std::span<const double> forecasts, std::span<const std::uint8_t> tradable) {
  if (day_of_period.size() != returns.size() || returns.size() != forecasts.size())
    throw InvalidArgument("daily_pnl: inputs must be aligned");
  if (!tradable.empty() && tradable.size() != returns.size())
    throw InvalidArgument("daily_pnl: tradable mask must be aligned");
  DailyPnl out;
  std::unordered_map<std::int64_t, std::size_t> slot;
  for (std::size_t t = 0; t < returns.size(); ++t) {
    auto [it, inserted] = slot.try_emplace(day_of_period[t], out.day.size());
    if (inserted) {
      out.day.push_back(day_of_period[t]);
      out.pnl.push_back(0.0);
      out.no_tradable.push_back(1);
      out.periods.push_back(0);
    }
    if (!tradable.empty() && !tradable[t]) continue;
    const std::size_t d = it->second;
    const double f = forecasts[t];
    const double sign = f > 0 ? 1.0 : (f < 0 ? -1.0 : 0.0);
    out.pnl[d] += returns[t] * sign;
    out.no_tradable[d] = 0;
    ++out.periods[d];
  }
  return out;
}

double sharpe(std::span<const double> daily) {
  if (daily.size() < 2) return kMissing;
  const auto n = static_cast<double>(daily.size());
  double m = 0;
  for (double x : daily) m += x;
  m /= n;
  double v = 0;
  for (double x : daily) v += (x - m) * (x - m);
  const double sd = std::sqrt(v / (n - 1));
  if (!(sd > 0)) return kMissing;
  return m * std::sqrt(252.0) / sd;
}

double ppd(std::span<const double> daily) {
  if (daily.empty()) return kMissing;
  double m = 0;
  for (double x : daily) m += x;
  return m / static_cast<double>(daily.size());
}

std::string metric_rows_csv(std::span<const MetricRow> rows) {
  std::ostringstream out;
  out << "product,metric,value,n_periods\n";
  for (const auto& r : rows)
    out << r.product << ',' << r.metric << ',' << format_double(r.value) << ',' << r.n_periods << '\n';
  return out.str();
}

void write_metric_rows(std::span<const MetricRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << metric_rows_csv(rows);
}

}  // namespace termnet
