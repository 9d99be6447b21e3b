#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "termnet/common.hpp"
#include "termnet/marketdata.hpp"

namespace termnet {

/// The three forecast quantities. VOLATILITY means log realized variance.
enum class Quantity : std::uint8_t { RETURN, VOLATILITY, VOLUME };

std::string quantity_name(Quantity q);
Quantity parse_quantity(std::string_view s);

enum class SemiSide : std::uint8_t { POS, NEG };

struct FeatureConfig {
  std::vector<int> return_windows{5, 10, 30, 60, 90, 180, 240, 360, 1440};
  std::vector<int> rv_windows{5, 10, 30, 60, 90, 180, 390};
  std::vector<int> semivol_windows{5, 10, 30, 60, 90, 180, 391};
  std::vector<double> ew_weights{0.75, 0.9, 0.975, 0.99, 0.999, 1.0};
  int ew_span = 1440;
  std::vector<int> ofi_windows{5, 10, 30, 60, 90, 120, 180, 270, 360, 1440};
  std::vector<int> volume_windows{5, 10, 30, 60, 90, 180, 240, 360, 1440};
  bool calendar_dummies = true;
  /// Exchange-local clock used for calendar dummies and day boundaries.
  int local_offset_hours = -6;

  void validate() const;
};

// Minute-level feature primitives. `t` is a minute index into the panel; nullopt marks a missing value.

std::optional<double> k_minute_return(const PanelSeries& panel, std::size_t inst, std::size_t t, std::size_t k);
std::optional<double> realized_variance(const PanelSeries& panel, std::size_t inst, std::size_t t, std::size_t k);
std::optional<double> semivariance(const PanelSeries& panel, std::size_t inst, std::size_t t, std::size_t k,
                                   SemiSide side);
/// (1-w) * sum_{j=0}^{span} w^j r_{t-j}; the raw sum when w == 1.
std::optional<double> ew_return(const PanelSeries& panel, std::size_t inst, std::size_t t, double w,
                                std::size_t span = 1440);
/// As ew_return over squared one-minute returns.
std::optional<double> ew_rv(const PanelSeries& panel, std::size_t inst, std::size_t t, double w,
                            std::size_t span = 1440);
/// Order-flow imbalance over events in minutes (t-k, t], evaluated directly on the stream.
double ofi(std::span<const TickEvent> stream, const PanelSeries& panel, std::size_t inst, std::size_t t,
           std::size_t k);
/// Contribution of one event given its predecessor.
double ofi_contribution(const TickEvent& prev, const TickEvent& cur);
/// log(V_t / V_{t-k}) with V the trade count over k minutes.
std::optional<double> delta_volume(const PanelSeries& panel, std::size_t inst, std::size_t t, std::size_t k);

inline constexpr std::size_t kCalendarDummies = 29;
/// Monday..Saturday then Hour_00..Hour_22 for the exchange-local time of `ts_ns`.
std::array<std::uint8_t, kCalendarDummies> calendar_dummies(std::int64_t ts_ns, int local_offset_hours = -6);
const std::vector<std::string>& calendar_dummy_names();

/// Per-minute OFI sums with prefix totals, for windowed queries in O(1).
class OfiIndex {
 public:
  OfiIndex(std::span<const TickEvent> stream, const PanelSeries& panel);
  double window(std::size_t inst, std::size_t t, std::size_t k) const;

 private:
  std::vector<std::vector<std::int64_t>> prefix_;  // prefix_[i][m] = sum of minutes < m
};

/// Rows sit at minute closes aligned to `step_minutes` on the exchange-local clock.
struct RowGrid {
  int step_minutes = 60;
  int horizon_minutes = 60;
};

struct InstrumentFeatures {
  std::vector<std::string> columns;
  RowMatrix values;                // rows x columns
  std::vector<std::uint8_t> mask;  // row validity
};

struct FeatureMatrix {
  std::vector<InstrumentId> universe;
  std::vector<std::int64_t> row_ts;       // close time (UTC ns) of each row
  std::vector<std::size_t> row_minute;    // last minute index included in each row
  std::vector<InstrumentFeatures> instruments;

  std::size_t n_rows() const { return row_ts.size(); }
};

/// One-step-ahead targets for each row.
struct TargetSet {
  int horizon_minutes = 60;
  std::vector<std::vector<double>> ret, log_rv, dvol;  // [instrument][row], NaN when missing

  const std::vector<double>& series(std::size_t inst, Quantity q) const;
};

struct AssembledData {
  FeatureMatrix features;
  TargetSet targets;
};

std::vector<std::string> feature_columns(const FeatureConfig& cfg, bool with_volume);

AssembledData assemble(const PanelSeries& panel, std::span<const TickEvent> stream, const FeatureConfig& cfg,
                       const RowGrid& grid = {});

/// Training-window column statistics. Calendar dummies are exempt from scaling.
struct FeatureScaler {
  struct Column {
    double mean = 0.0;
    double sd = 1.0;
    bool exempt = false;
  };
  std::vector<std::vector<Column>> instruments;
};

FeatureScaler fit_scaler(const FeatureMatrix& m, std::span<const std::size_t> training_rows);
FeatureMatrix standardize(const FeatureMatrix& m, const FeatureScaler& scaler);

/// One CSV per instrument, `row_ts,<columns...>,mask`.
void export_features(const FeatureMatrix& m, const std::filesystem::path& dir);

}  // namespace termnet
