#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "termnet/autodiff.hpp"
#include "termnet/features.hpp"

namespace termnet {

enum class LossKind : std::uint8_t { MSE, MAE, SR, MIXED, QLIKE, HMSE };

std::string loss_name(LossKind k);
LossKind parse_loss(std::string_view s);
/// MIXED for returns, QLIKE for volatility, MAE for volume.
LossKind default_loss(Quantity task);
/// SR-based losses only make sense for returns.
bool loss_compatible(LossKind k, Quantity task);

struct LossConfig {
  double epsilon = 1e-6;
  double alpha = 1.0;
  Quantity task = Quantity::RETURN;

  void validate() const;
};

/// Exponent arguments in QLIKE and HMSE are clamped to this magnitude.
inline constexpr double kExpClamp = 50.0;

// Scalar evaluation versions.
double mse(std::span<const double> y, std::span<const double> yhat);
double mae(std::span<const double> y, std::span<const double> yhat);
/// -mean(R) / (sd(R) + eps), R_t = y_t tanh(yhat_t / eps), population sd.
double sr_loss(std::span<const double> y, std::span<const double> yhat, double epsilon = 1e-6);
double mixed_loss(std::span<const double> y, std::span<const double> yhat, const LossConfig& cfg);
/// mean(exp(d) - d - 1), d = y - yhat clamped; `clamped` receives the number of clamped terms.
double qlike(std::span<const double> y, std::span<const double> yhat, std::size_t* clamped = nullptr);
/// mean((1 - exp(yhat - y))^2) with the exponent clamped.
double hmse(std::span<const double> y, std::span<const double> yhat, std::size_t* clamped = nullptr);

// Tape versions over n x 1 (or any equal-shape) operands.
ad::Var mse(ad::Var y, ad::Var yhat);
ad::Var mae(ad::Var y, ad::Var yhat);
ad::Var sr_loss(ad::Var y, ad::Var yhat, double epsilon);
ad::Var mixed_loss(ad::Var y, ad::Var yhat, const LossConfig& cfg);
ad::Var qlike(ad::Var y, ad::Var yhat);

/// Training loss over a batch x N forecast. Entries with mask 0 are ignored. Pointwise losses
/// average over all valid entries; SR-based terms are computed per node and averaged over nodes.
ad::Var masked_loss(ad::Var pred, const ad::Tensor& target, std::span<const std::uint8_t> mask, LossKind kind,
                    const LossConfig& cfg);

struct DailyPnl {
  std::vector<std::int64_t> day;
  std::vector<double> pnl;
  std::vector<std::uint8_t> no_tradable;  // 1 when the day had no tradable periods (P&L recorded as 0)
  std::vector<int> periods;
};

/// sum_t R_t sign(yhat_t) per day, sign(0) = 0. Periods with tradable = 0 are skipped;
/// an empty `tradable` treats every period as tradable. Days are emitted in first-seen order.
DailyPnl daily_pnl(std::span<const std::int64_t> day_of_period, std::span<const double> returns,
                   std::span<const double> forecasts, std::span<const std::uint8_t> tradable = {});

/// mean * sqrt(252) / sample sd; NaN with fewer than 2 days or zero sd.
double sharpe(std::span<const double> daily);
/// Mean daily P&L; NaN when empty.
double ppd(std::span<const double> daily);

struct MetricRow {
  std::string product;
  std::string metric;
  double value = kMissing;
  std::size_t n_periods = 0;
};

/// `product,metric,value,n_periods`.
void write_metric_rows(std::span<const MetricRow> rows, const std::filesystem::path& path);
std::string metric_rows_csv(std::span<const MetricRow> rows);

}  // namespace termnet
