#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "termnet/baselines.hpp"
#include "termnet/features.hpp"
#include "termnet/graphbuild.hpp"
#include "termnet/losses.hpp"
#include "termnet/marketdata.hpp"
#include "termnet/model.hpp"

namespace termnet {

enum class Horizon : std::uint8_t { H1, H3, H4, H6, D1 };

int horizon_minutes(Horizon h);
std::string horizon_name(Horizon h);
/// "1h", "3h", "4h", "6h", "1d".
Horizon parse_horizon(std::string_view s);

struct TradabilityConfig {
  double es_spread_bp = 15.0;
  double vx_spread_bp = 25.0;
  /// Both quote sizes must be at least this ("more than 1").
  int min_size = 2;
};

struct RunConfig {
  std::string profile = "paper";
  Quantity task = Quantity::RETURN;
  Horizon horizon = Horizon::H1;
  std::size_t lookback = 20000;
  std::size_t roll = 1500;
  int epochs_initial = 120;
  int epochs_roll = 25;
  std::uint64_t seed = 0;
  std::optional<LossKind> loss;  // unset: the task's default loss
  double loss_epsilon = 1e-6;
  double loss_alpha = 1.0;
  ChannelSubset channels = ChannelSubset::ALL;
  int knn_k = 3;
  Normalization normalization = Normalization::ROW;
  TradabilityConfig tradability;
  std::size_t batch_size = 64;
  double learning_rate = 5e-4;
  double l1_lambda = 1e-5;
  /// Graphs, feature scaling and target offsets come from the first training window only.
  bool freeze_inputs = true;
  ModelConfig model;
  FeatureConfig features;

  void validate() const;
  LossKind effective_loss() const { return loss.value_or(default_loss(task)); }
  LossConfig loss_config() const { return {loss_epsilon, loss_alpha, task}; }
};

/// Full-size schedule and architecture.
RunConfig paper_profile();
/// Reduced window, schedule, architecture and feature set that runs in minutes on one core.
RunConfig desk_profile();
RunConfig profile_by_name(std::string_view name);

std::string run_config_to_json(const RunConfig& c);
/// Fields absent from the JSON keep the values of `base`.
RunConfig run_config_from_json(const std::string& text, const RunConfig& base);

/// Synthetic-tradability check for one quote: spread strictly below the class threshold and both sizes >= min_size.
/// Indices are never tradable.
bool quote_tradable(const InstrumentId& id, double spread_bp, std::int32_t min_size, const TradabilityConfig& cfg);

struct TradabilityMask {
  std::vector<std::uint8_t> train;              // [row]: ES_1 or VX_1 tradable
  std::vector<std::vector<std::uint8_t>> eval;  // [instrument][row]: the instrument itself tradable
};

TradabilityMask tradability_mask(const PanelSeries& panel, std::span<const std::size_t> row_minutes,
                                 const TradabilityConfig& cfg);

struct Dataset {
  std::vector<TickEvent> stream;  // zero-liquidity events removed
  PanelSeries panel;
  AssembledData data;
  TradabilityMask masks;
  std::string data_hash;
};

Dataset build_dataset(std::span<const TickEvent> raw, const RunConfig& run);

/// Rows whose feature windows are complete for every node (and, for returns, pass the training mask).
std::vector<std::size_t> usable_rows(const Dataset& ds, const RunConfig& run);

struct Block {
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> eval_rows;
};

/// Block b trains on usable[b*roll, b*roll+lookback) and evaluates the following `roll` rows (the last block may be partial).
std::vector<Block> rolling_blocks(std::span<const std::size_t> usable, std::size_t lookback, std::size_t roll);

/// Standardized, column-aligned model inputs and per-node targets.
class ModelInputs {
 public:
  ModelInputs(const Dataset& ds, const RunConfig& run, std::span<const std::size_t> fit_rows);

  ModelBatch batch(std::span<const std::size_t> rows) const;
  ad::Tensor targets(std::span<const std::size_t> rows) const;
  std::vector<std::uint8_t> target_mask(std::span<const std::size_t> rows) const;
  /// Per-node constant added to the network output (training-window mean for non-return tasks).
  const std::vector<double>& offsets() const { return offsets_; }
  /// Node features of a single row (own columns only), for the linear baselines.
  const RowMatrix& node_features(std::size_t node) const { return own_[node]; }
  std::size_t input_dim() const { return columns_.size(); }
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
  std::vector<RowMatrix> x_;    // [node] rows x input_dim, standardized and zero-padded
  std::vector<RowMatrix> own_;  // [node] rows x own columns, standardized
  std::vector<std::vector<double>> y_;
  std::vector<double> offsets_;
  std::size_t seq_len_;
};

std::vector<SignedGraph> build_run_graphs(const Dataset& ds, const RunConfig& run, std::span<const std::size_t> rows);

struct RollingResult {
  std::vector<std::size_t> rows;  // evaluated rows in time order
  RowMatrix forecasts;            // rows x N
  std::vector<int> block_of_row;
  std::vector<std::vector<double>> epoch_loss;  // [block][epoch]
  std::vector<ad::ParameterSet> block_params;   // filled when keep_params is set
  std::vector<SignedGraph> graphs;              // graphs of the first block
};

RollingResult rolling_train(const RunConfig& run, const Dataset& ds, bool keep_params = false);

struct TrainedModel {
  GcnLstm model;
  std::vector<double> epoch_loss;
};

/// Fits the model on the first training window only (epochs_initial epochs).
TrainedModel train_initial_model(const RunConfig& run, const Dataset& ds);

/// Rolling naive forecasts over the same evaluation rows.
RowMatrix naive_forecasts(const Dataset& ds, Quantity task, std::span<const std::size_t> rows);

/// Rolling linear baselines ("OLS", "LASSO", "PCR") on each node's own last-row features.
struct LinearBaselineResult {
  RowMatrix forecasts;
  std::vector<LinearModel> first_block_models;  // one per node
};
LinearBaselineResult linear_baseline_forecasts(const RunConfig& run, const Dataset& ds, const std::string& method);

struct MethodResult {
  std::string method;
  std::vector<MetricRow> rows;
  RowMatrix forecasts;
  /// Daily P&L per product (returns task only).
  std::map<std::string, DailyPnl> pnl;
};

MethodResult evaluate_forecasts(const std::string& method, const RunConfig& run, const Dataset& ds,
                                std::span<const std::size_t> rows, const RowMatrix& forecasts);

struct BacktestReport {
  RunConfig run;
  std::string fingerprint;
  std::vector<std::size_t> rows;
  std::vector<std::int64_t> row_ts;
  std::vector<InstrumentId> universe;
  std::vector<MethodResult> methods;
  std::vector<GraphStats> graph_stats;
  std::vector<FeatureImportance> importance;
  bool low_power = false;
};

/// Trains the configured model and evaluates it next to the listed baselines
/// ("NAIVE", "LSTM", "ANN", "OLS", "LASSO", "PCR") on identical rows.
BacktestReport run_backtest(const RunConfig& run, std::span<const TickEvent> raw,
                            std::span<const std::string> baselines = {});
/// Backtest with targets and rows at the run's horizon; flags fewer than 100 evaluation rows.
BacktestReport run_horizon(const RunConfig& run, std::span<const TickEvent> raw);

std::string fingerprint(const RunConfig& run, const Dataset& ds, std::span<const SignedGraph> graphs,
                        std::span<const std::string> methods);

/// Writes metrics, metric rows, P&L, forecasts, config and graph statistics; returns the files written.
std::vector<std::filesystem::path> emit_report(const BacktestReport& report, const std::filesystem::path& dir);

struct AblationRow {
  std::string config;
  std::vector<std::optional<double>> values;  // aligned with AblationTable::columns; nullopt = NA
};

struct AblationTable {
  std::vector<std::string> columns;  // e.g. RETURN:ES_1:SR
  std::vector<AblationRow> rows;
};

/// The nine configurations: four graph subsets, three loss swaps, shared node weights and the full model.
std::vector<std::string> ablation_config_names();
/// Applies a named configuration to `base`; nullopt when it is not applicable to the task.
std::optional<RunConfig> ablation_config(const RunConfig& base, const std::string& name);

AblationTable run_ablation(const RunConfig& base, std::span<const TickEvent> raw, std::span<const Quantity> tasks,
                           std::span<const std::string> products = {});
std::string ablation_csv(const AblationTable& t);

}  // namespace termnet
