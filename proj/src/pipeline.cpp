#include "termnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace termnet {

using nlohmann::json;

// ---------------------------------------------------------------- horizons and configs

int horizon_minutes(Horizon h) {
  switch (h) {
    case Horizon::H1: return 60;
    case Horizon::H3: return 180;
    case Horizon::H4: return 240;
    case Horizon::H6: return 360;
    case Horizon::D1: return 1440;
  }
  return 60;
}

std::string horizon_name(Horizon h) {
  switch (h) {
    case Horizon::H1: return "1h";
    case Horizon::H3: return "3h";
    case Horizon::H4: return "4h";
    case Horizon::H6: return "6h";
    case Horizon::D1: return "1d";
  }
  return "1h";
}

Horizon parse_horizon(std::string_view s) {
  for (auto h : {Horizon::H1, Horizon::H3, Horizon::H4, Horizon::H6, Horizon::D1})
    if (horizon_name(h) == s) return h;
  throw InvalidArgument("unknown horizon: " + std::string(s) + " (expected 1h, 3h, 4h, 6h or 1d)");
}

void RunConfig::validate() const {
  if (!(lookback > roll && roll > 0)) throw InvalidArgument("RunConfig: need lookback > roll > 0");
  if (epochs_initial < 0 || epochs_roll < 0) throw InvalidArgument("RunConfig: negative epoch count");
  if (batch_size == 0) throw InvalidArgument("RunConfig: batch_size must be positive");
  if (!(learning_rate > 0) || l1_lambda < 0) throw InvalidArgument("RunConfig: invalid optimizer settings");
  if (!(tradability.es_spread_bp > 0 && tradability.vx_spread_bp > 0 && tradability.min_size > 0))
    throw InvalidArgument("RunConfig: tradability thresholds must be positive");
  if (!loss_compatible(effective_loss(), task))
    throw InvalidArgument("RunConfig: loss " + loss_name(effective_loss()) + " does not apply to " + quantity_name(task));
  if (effective_loss() == LossKind::HMSE) throw InvalidArgument("RunConfig: HMSE is an evaluation metric only");
  loss_config().validate();
  model.validate();
  features.validate();
  if (model.uses_gcn()) {
    const auto n = channel_configs(task, channels, knn_k, normalization).size();
    if (static_cast<std::size_t>(model.n_channels) != n)
      throw InvalidArgument("RunConfig: model.n_channels = " + std::to_string(model.n_channels) + " but channel set " +
                            channel_subset_name(channels) + " has " + std::to_string(n) + " graphs");
  }
}

RunConfig paper_profile() { return RunConfig{}; }

RunConfig desk_profile() {
  RunConfig c;
  c.profile = "desk";
  c.lookback = 2000;
  c.roll = 250;
  c.epochs_initial = 20;
  c.epochs_roll = 3;
  c.batch_size = 64;
  c.learning_rate = 2e-3;
  c.model.lstm_units = 16;
  c.model.dense1_units = 16;
  c.model.dense2_units = 8;
  c.model.gcn_out_units = 8;
  c.features.return_windows = {5, 30, 60, 240, 1440};
  c.features.rv_windows = {5, 30, 60, 390};
  c.features.semivol_windows = {30, 60};
  c.features.ew_weights = {0.9, 0.99};
  c.features.ofi_windows = {5, 60};
  c.features.volume_windows = {60, 240};
  c.features.calendar_dummies = false;
  return c;
}

RunConfig profile_by_name(std::string_view name) {
  if (name == "paper") return paper_profile();
  if (name == "desk") return desk_profile();
  throw InvalidArgument("unknown profile: " + std::string(name) + " (expected paper or desk)");
}

namespace {

std::string normalization_name(Normalization n) { return n == Normalization::ROW ? "ROW" : "COLUMN"; }

Normalization parse_normalization(std::string_view s) {
  if (s == "ROW" || s == "row") return Normalization::ROW;
  if (s == "COLUMN" || s == "column") return Normalization::COLUMN;
  throw InvalidArgument("unknown normalization: " + std::string(s));
}

json feature_config_json(const FeatureConfig& f) {
  return {{"return_windows", f.return_windows},     {"rv_windows", f.rv_windows},
          {"semivol_windows", f.semivol_windows},   {"ew_weights", f.ew_weights},
          {"ew_span", f.ew_span},                   {"ofi_windows", f.ofi_windows},
          {"volume_windows", f.volume_windows},     {"calendar_dummies", f.calendar_dummies},
          {"local_offset_hours", f.local_offset_hours}};
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["profile"] = c.profile;
  j["task"] = quantity_name(c.task);
  j["horizon"] = horizon_name(c.horizon);
  j["lookback"] = c.lookback;
  j["roll"] = c.roll;
  j["epochs_initial"] = c.epochs_initial;
  j["epochs_roll"] = c.epochs_roll;
  j["seed"] = c.seed;
  j["loss"] = loss_name(c.effective_loss());
  j["loss_epsilon"] = c.loss_epsilon;
  j["loss_alpha"] = c.loss_alpha;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["l1_lambda"] = c.l1_lambda;
  j["freeze_inputs"] = c.freeze_inputs;
  j["tradability"] = {{"es_spread_bp", c.tradability.es_spread_bp},
                      {"vx_spread_bp", c.tradability.vx_spread_bp},
                      {"min_size", c.tradability.min_size}};
  j["graph"] = {{"knn_k", c.knn_k},
                {"normalization", normalization_name(c.normalization)},
                {"channels", channel_subset_name(c.channels)}};
  j["model"] = json::parse(model_config_to_json(c.model));
  j["features"] = feature_config_json(c.features);
  return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text, const RunConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("config: ") + e.what());
  }
  RunConfig c = base;
  try {
    take(j, "profile", c.profile);
    if (j.contains("task")) c.task = parse_quantity(j["task"].get<std::string>());
    if (j.contains("horizon")) c.horizon = parse_horizon(j["horizon"].get<std::string>());
    take(j, "lookback", c.lookback);
    take(j, "roll", c.roll);
    take(j, "epochs_initial", c.epochs_initial);
    take(j, "epochs_roll", c.epochs_roll);
    take(j, "seed", c.seed);
    if (j.contains("loss")) c.loss = parse_loss(j["loss"].get<std::string>());
    take(j, "loss_epsilon", c.loss_epsilon);
    take(j, "loss_alpha", c.loss_alpha);
    take(j, "batch_size", c.batch_size);
    take(j, "learning_rate", c.learning_rate);
    take(j, "l1_lambda", c.l1_lambda);
    take(j, "freeze_inputs", c.freeze_inputs);
    if (j.contains("tradability")) {
      const auto& t = j["tradability"];
      take(t, "es_spread_bp", c.tradability.es_spread_bp);
      take(t, "vx_spread_bp", c.tradability.vx_spread_bp);
      take(t, "min_size", c.tradability.min_size);
    }
    if (j.contains("graph")) {
      const auto& g = j["graph"];
      take(g, "knn_k", c.knn_k);
      if (g.contains("normalization")) c.normalization = parse_normalization(g["normalization"].get<std::string>());
      if (g.contains("channels")) c.channels = parse_channel_subset(g["channels"].get<std::string>());
    }
    if (j.contains("model")) {
      json merged = json::parse(model_config_to_json(c.model));
      merged.merge_patch(j["model"]);
      c.model = model_config_from_json(merged.dump());
    }
    if (j.contains("features")) {
      const auto& f = j["features"];
      take(f, "return_windows", c.features.return_windows);
      take(f, "rv_windows", c.features.rv_windows);
      take(f, "semivol_windows", c.features.semivol_windows);
      take(f, "ew_weights", c.features.ew_weights);
      take(f, "ew_span", c.features.ew_span);
      take(f, "ofi_windows", c.features.ofi_windows);
      take(f, "volume_windows", c.features.volume_windows);
      take(f, "calendar_dummies", c.features.calendar_dummies);
      take(f, "local_offset_hours", c.features.local_offset_hours);
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------- masks and data

bool quote_tradable(const InstrumentId& id, double spread, std::int32_t min_size, const TradabilityConfig& cfg) {
  if (!std::isfinite(spread) || min_size < cfg.min_size) return false;
  switch (id.cls) {
    case InstrumentClass::ES: return spread < cfg.es_spread_bp;
    case InstrumentClass::VX: return spread < cfg.vx_spread_bp;
    default: return false;
  }
}

TradabilityMask tradability_mask(const PanelSeries& panel, std::span<const std::size_t> row_minutes,
                                 const TradabilityConfig& cfg) {
  TradabilityMask m;
  const std::size_t n = panel.universe.size();
  m.eval.assign(n, std::vector<std::uint8_t>(row_minutes.size(), 0));
  m.train.assign(row_minutes.size(), 0);
  const InstrumentId es1{InstrumentClass::ES, 1}, vx1{InstrumentClass::VX, 1};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = panel.series[i];
    const bool anchor = panel.universe[i] == es1 || panel.universe[i] == vx1;
    for (std::size_t r = 0; r < row_minutes.size(); ++r) {
      const std::size_t t = row_minutes[r];
      const bool ok = s.valid[t] && quote_tradable(panel.universe[i], s.spread_bp[t], s.min_size[t], cfg);
      m.eval[i][r] = ok ? 1 : 0;
      if (ok && anchor) m.train[r] = 1;
    }
  }
  return m;
}

Dataset build_dataset(std::span<const TickEvent> raw, const RunConfig& run) {
  Dataset ds;
  Fnv1a h;
  for (const auto& e : raw) {
    h.update(e.ts_ns);
    h.update(e.bid_px);
    h.update(e.ask_px);
    h.update(static_cast<std::int64_t>(e.bid_sz));
    h.update(static_cast<std::int64_t>(e.ask_sz));
    h.update(static_cast<std::int64_t>(e.instrument) * 8 + static_cast<std::int64_t>(e.kind));
  }
  ds.data_hash = h.hex();
  ds.stream = filter_zero_liquidity(raw);
  const auto universe = canonical_universe();
  ds.panel = build_panel(ds.stream, universe);
  const int hm = horizon_minutes(run.horizon);
  ds.data = assemble(ds.panel, ds.stream, run.features, RowGrid{hm, hm});
  ds.masks = tradability_mask(ds.panel, ds.data.features.row_minute, run.tradability);
  return ds;
}

std::vector<std::size_t> usable_rows(const Dataset& ds, const RunConfig& run) {
  const auto& fm = ds.data.features;
  const std::size_t seq = static_cast<std::size_t>(run.model.seq_len);
  const std::size_t rows = fm.n_rows();
  std::vector<std::uint8_t> all_valid(rows, 1);
  for (const auto& inst : fm.instruments)
    for (std::size_t r = 0; r < rows; ++r) all_valid[r] = all_valid[r] && inst.mask[r];
  std::vector<std::size_t> out;
  std::size_t run_len = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    run_len = all_valid[r] ? run_len + 1 : 0;
    if (run_len < seq) continue;
    if (run.task == Quantity::RETURN && !ds.masks.train[r]) continue;
    out.push_back(r);
  }
  return out;
}

std::vector<Block> rolling_blocks(std::span<const std::size_t> usable, std::size_t lookback, std::size_t roll) {
  if (roll == 0 || lookback == 0) throw InvalidArgument("rolling_blocks: lookback and roll must be positive");
  if (usable.size() < lookback + roll)
    throw InvalidArgument("rolling_blocks: " + std::to_string(usable.size()) + " usable samples, need at least " +
                          std::to_string(lookback + roll) + " (short by " +
                          std::to_string(lookback + roll - usable.size()) + ")");
  std::vector<Block> blocks;
  for (std::size_t start = 0; start + lookback < usable.size(); start += roll) {
    Block b;
    b.train_rows.assign(usable.begin() + static_cast<std::ptrdiff_t>(start),
                        usable.begin() + static_cast<std::ptrdiff_t>(start + lookback));
    const std::size_t end = std::min(usable.size(), start + lookback + roll);
    b.eval_rows.assign(usable.begin() + static_cast<std::ptrdiff_t>(start + lookback),
                       usable.begin() + static_cast<std::ptrdiff_t>(end));
    blocks.push_back(std::move(b));
  }
  return blocks;
}

// ---------------------------------------------------------------- model inputs

ModelInputs::ModelInputs(const Dataset& ds, const RunConfig& run, std::span<const std::size_t> fit_rows)
    : seq_len_(static_cast<std::size_t>(run.model.seq_len)) {
  const auto& fm = ds.data.features;
  const FeatureMatrix std_fm = standardize(fm, fit_scaler(fm, fit_rows));
  std::size_t widest = 0;
  for (std::size_t i = 1; i < fm.instruments.size(); ++i)
    if (fm.instruments[i].columns.size() > fm.instruments[widest].columns.size()) widest = i;
  columns_ = fm.instruments.at(widest).columns;
  std::unordered_map<std::string, Eigen::Index> position;
  for (std::size_t j = 0; j < columns_.size(); ++j) position[columns_[j]] = static_cast<Eigen::Index>(j);

  const auto rows = static_cast<Eigen::Index>(fm.n_rows());
  for (std::size_t i = 0; i < std_fm.instruments.size(); ++i) {
    const auto& inf = std_fm.instruments[i];
    RowMatrix own = inf.values;
    for (Eigen::Index r = 0; r < own.rows(); ++r)
      for (Eigen::Index c = 0; c < own.cols(); ++c)
        if (!std::isfinite(own(r, c))) own(r, c) = 0.0;
    RowMatrix x = RowMatrix::Zero(rows, static_cast<Eigen::Index>(columns_.size()));
    for (std::size_t c = 0; c < inf.columns.size(); ++c) x.col(position.at(inf.columns[c])) = own.col(static_cast<Eigen::Index>(c));
    x_.push_back(std::move(x));
    own_.push_back(std::move(own));
    y_.push_back(ds.data.targets.series(i, run.task));
    double off = 0.0;
    if (run.task != Quantity::RETURN) {
      double s = 0.0;
      std::size_t n = 0;
      for (auto r : fit_rows)
        if (std::isfinite(y_.back()[r])) {
          s += y_.back()[r];
          ++n;
        }
      if (n > 0) off = s / static_cast<double>(n);
    }
    offsets_.push_back(off);
  }
}

ModelBatch ModelInputs::batch(std::span<const std::size_t> rows) const {
  ModelBatch b;
  const std::size_t d = columns_.size();
  b.x.resize(x_.size());
  for (std::size_t v = 0; v < x_.size(); ++v) {
    b.x[v].reserve(seq_len_);
    for (std::size_t s = 0; s < seq_len_; ++s) {
      ad::Tensor t(rows.size(), d);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k] + 1 < seq_len_) throw InvalidArgument("ModelInputs::batch: row lacks a full history");
        const auto src = static_cast<Eigen::Index>(rows[k] + 1 + s - seq_len_);
        t.map().row(static_cast<Eigen::Index>(k)) = x_[v].row(src);
      }
      b.x[v].push_back(std::move(t));
    }
  }
  return b;
}

ad::Tensor ModelInputs::targets(std::span<const std::size_t> rows) const {
  ad::Tensor t(rows.size(), y_.size());
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (std::size_t v = 0; v < y_.size(); ++v) {
      const double y = y_[v][rows[k]];
      t(k, v) = std::isfinite(y) ? y - offsets_[v] : 0.0;
    }
  return t;
}

std::vector<std::uint8_t> ModelInputs::target_mask(std::span<const std::size_t> rows) const {
  std::vector<std::uint8_t> m(rows.size() * y_.size());
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (std::size_t v = 0; v < y_.size(); ++v) m[k * y_.size() + v] = std::isfinite(y_[v][rows[k]]) ? 1 : 0;
  return m;
}

std::vector<SignedGraph> build_run_graphs(const Dataset& ds, const RunConfig& run, std::span<const std::size_t> rows) {
  std::vector<SignedGraph> out;
  const auto& nodes = ds.data.features.universe;
  for (const auto& cfg : channel_configs(run.task, run.channels, run.knn_k, run.normalization))
    out.push_back(build_graph(ds.data.targets, nodes, cfg, rows));
  return out;
}

// ---------------------------------------------------------------- training

namespace {

std::vector<double> train_epochs(GcnLstm& model, ad::AdamState& adam, const ModelInputs& inputs,
                                 const RunConfig& run, std::span<const std::size_t> rows, int epochs,
                                 std::mt19937_64& rng) {
  std::vector<double> history;
  std::vector<std::size_t> order(rows.begin(), rows.end());
  const LossKind kind = run.effective_loss();
  const LossConfig lcfg = run.loss_config();
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += run.batch_size) {
      const std::size_t end = std::min(order.size(), start + run.batch_size);
      std::span<const std::size_t> chunk(order.data() + start, end - start);
      auto mask = inputs.target_mask(chunk);
      if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) continue;
      ad::Tape tape;
      ad::Var pred = model.forward(tape, inputs.batch(chunk));
      ad::Var loss = masked_loss(pred, inputs.targets(chunk), mask, kind, lcfg);
      total += loss.value().item();
      if (run.l1_lambda > 0) loss = add(loss, ad::l1_penalty(tape, model.params(), run.l1_lambda));
      model.params().zero_grad();
      tape.backward(loss);
      ad::adam_step(adam, model.params());
      ++batches;
    }
    history.push_back(batches ? total / static_cast<double>(batches) : kMissing);
  }
  return history;
}

RowMatrix forecast_rows(GcnLstm& model, const ModelInputs& inputs, std::span<const std::size_t> rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(model.n_nodes()));
  constexpr std::size_t kChunk = 512;
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const std::size_t end = std::min(rows.size(), start + kChunk);
    std::span<const std::size_t> chunk(rows.data() + start, end - start);
    RowMatrix p = model.predict(inputs.batch(chunk));
    for (Eigen::Index v = 0; v < p.cols(); ++v) p.col(v).array() += inputs.offsets()[static_cast<std::size_t>(v)];
    out.middleRows(static_cast<Eigen::Index>(start), p.rows()) = p;
  }
  return out;
}

}  // namespace

RollingResult rolling_train(const RunConfig& run, const Dataset& ds, bool keep_params) {
  run.validate();
  const auto usable = usable_rows(ds, run);
  const auto blocks = rolling_blocks(usable, run.lookback, run.roll);
  const auto& nodes = ds.data.features.universe;

  std::optional<ModelInputs> inputs;
  inputs.emplace(ds, run, blocks[0].train_rows);
  RollingResult res;
  res.graphs = run.model.uses_gcn() ? build_run_graphs(ds, run, blocks[0].train_rows) : std::vector<SignedGraph>{};

  GcnLstm model(run.model, nodes, inputs->input_dim());
  model.init_params(run.seed);
  model.set_graphs(res.graphs);
  ad::AdamState adam;
  adam.config.step_size = run.learning_rate;
  std::mt19937_64 rng(run.seed ^ 0x5DEECE66DULL);

  std::size_t total = 0;
  for (const auto& b : blocks) total += b.eval_rows.size();
  res.forecasts.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(nodes.size()));
  std::size_t at = 0;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& b = blocks[bi];
    if (bi > 0 && !run.freeze_inputs) {
      inputs.emplace(ds, run, b.train_rows);
      if (run.model.uses_gcn()) model.set_graphs(build_run_graphs(ds, run, b.train_rows));
    }
    const int epochs = bi == 0 ? run.epochs_initial : run.epochs_roll;
    res.epoch_loss.push_back(train_epochs(model, adam, *inputs, run, b.train_rows, epochs, rng));
    if (keep_params) res.block_params.push_back(model.params());
    const RowMatrix f = forecast_rows(model, *inputs, b.eval_rows);
    res.forecasts.middleRows(static_cast<Eigen::Index>(at), f.rows()) = f;
    at += b.eval_rows.size();
    res.rows.insert(res.rows.end(), b.eval_rows.begin(), b.eval_rows.end());
    res.block_of_row.insert(res.block_of_row.end(), b.eval_rows.size(), static_cast<int>(bi));
  }
  return res;
}

TrainedModel train_initial_model(const RunConfig& run, const Dataset& ds) {
  run.validate();
  const auto usable = usable_rows(ds, run);
  const auto blocks = rolling_blocks(usable, run.lookback, run.roll);
  const ModelInputs inputs(ds, run, blocks[0].train_rows);
  TrainedModel out{GcnLstm(run.model, ds.data.features.universe, inputs.input_dim()), {}};
  out.model.init_params(run.seed);
  if (run.model.uses_gcn()) out.model.set_graphs(build_run_graphs(ds, run, blocks[0].train_rows));
  ad::AdamState adam;
  adam.config.step_size = run.learning_rate;
  std::mt19937_64 rng(run.seed ^ 0x5DEECE66DULL);
  out.epoch_loss = train_epochs(out.model, adam, inputs, run, blocks[0].train_rows, run.epochs_initial, rng);
  return out;
}

RowMatrix naive_forecasts(const Dataset& ds, Quantity task, std::span<const std::size_t> rows) {
  const std::size_t n = ds.data.features.universe.size();
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (std::size_t v = 0; v < n; ++v) {
      double prev = kMissing;
      if (task == Quantity::VOLATILITY && rows[k] > 0) prev = ds.data.targets.log_rv[v][rows[k] - 1];
      out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v)) = naive_forecast(task, prev);
    }
  return out;
}

LinearBaselineResult linear_baseline_forecasts(const RunConfig& run, const Dataset& ds, const std::string& method) {
  if (method != "OLS" && method != "LASSO" && method != "PCR")
    throw InvalidArgument("unknown linear baseline: " + method);
  run.validate();
  const auto usable = usable_rows(ds, run);
  const auto blocks = rolling_blocks(usable, run.lookback, run.roll);
  const std::size_t n = ds.data.features.universe.size();
  LinearBaselineResult res;
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.eval_rows.size();
  res.forecasts = RowMatrix::Constant(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(n), kMissing);
  std::optional<ModelInputs> inputs;
  std::size_t at = 0;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& b = blocks[bi];
    if (bi == 0 || !run.freeze_inputs) inputs.emplace(ds, run, b.train_rows);
    for (std::size_t v = 0; v < n; ++v) {
      const auto& y_all = ds.data.targets.series(v, run.task);
      const RowMatrix& xv = inputs->node_features(v);
      std::vector<Eigen::Index> rows;
      for (auto r : b.train_rows)
        if (std::isfinite(y_all[r])) rows.push_back(static_cast<Eigen::Index>(r));
      if (rows.size() < 20) {
        if (bi == 0) res.first_block_models.emplace_back();
        continue;
      }
      RowMatrix x = xv(rows, Eigen::all);
      Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t k = 0; k < rows.size(); ++k) y[static_cast<Eigen::Index>(k)] = y_all[static_cast<std::size_t>(rows[k])];
      LinearModel m = method == "OLS" ? ols_fit(x, y) : method == "LASSO" ? lasso_fit(x, y) : pcr_fit(x, y);
      m.feature_names = ds.data.features.instruments[v].columns;
      std::vector<Eigen::Index> er(b.eval_rows.begin(), b.eval_rows.end());
      const Eigen::VectorXd p = m.predict(xv(er, Eigen::all));
      res.forecasts.block(static_cast<Eigen::Index>(at), static_cast<Eigen::Index>(v), p.size(), 1) = p;
      if (bi == 0) res.first_block_models.push_back(std::move(m));
    }
    at += b.eval_rows.size();
  }
  return res;
}

// ---------------------------------------------------------------- evaluation

namespace {

std::int64_t local_day(std::int64_t ts_ns, int offset_hours) {
  constexpr std::int64_t kDay = 86'400'000'000'000LL;
  const std::int64_t local = ts_ns + offset_hours * 3'600'000'000'000LL;
  return local >= 0 ? local / kDay : -((-local + kDay - 1) / kDay);
}

}  // namespace

MethodResult evaluate_forecasts(const std::string& method, const RunConfig& run, const Dataset& ds,
                                std::span<const std::size_t> rows, const RowMatrix& forecasts) {
  const auto& universe = ds.data.features.universe;
  if (forecasts.rows() != static_cast<Eigen::Index>(rows.size()) ||
      forecasts.cols() != static_cast<Eigen::Index>(universe.size()))
    throw InvalidArgument("evaluate_forecasts: forecast shape does not match rows x products");
  MethodResult res;
  res.method = method;
  res.forecasts = forecasts;
  for (std::size_t v = 0; v < universe.size(); ++v) {
    const std::string product = universe[v].code();
    const auto& y_all = ds.data.targets.series(v, run.task);
    std::vector<double> y, f;
    std::vector<std::int64_t> day;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::size_t r = rows[k];
      const double fk = forecasts(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v));
      if (!ds.masks.eval[v][r] || !std::isfinite(y_all[r]) || !std::isfinite(fk)) continue;
      y.push_back(y_all[r]);
      f.push_back(fk);
      day.push_back(local_day(ds.data.features.row_ts[r], run.features.local_offset_hours));
    }
    switch (run.task) {
      case Quantity::RETURN: {
        DailyPnl pnl = daily_pnl(day, y, f);
        res.rows.push_back({product, "SR", sharpe(pnl.pnl), y.size()});
        const double p = ppd(pnl.pnl);
        res.rows.push_back({product, "PPD", std::isfinite(p) ? p * 1e4 : kMissing, y.size()});
        res.pnl.emplace(product, std::move(pnl));
        break;
      }
      case Quantity::VOLATILITY:
        res.rows.push_back({product, "QLIKE", y.empty() ? kMissing : qlike(y, f), y.size()});
        res.rows.push_back({product, "HMSE", y.empty() ? kMissing : hmse(y, f), y.size()});
        break;
      case Quantity::VOLUME:
        res.rows.push_back({product, "MSE", y.empty() ? kMissing : mse(y, f), y.size()});
        res.rows.push_back({product, "MAE", y.empty() ? kMissing : mae(y, f), y.size()});
        break;
    }
  }
  return res;
}

std::string fingerprint(const RunConfig& run, const Dataset& ds, std::span<const SignedGraph> graphs,
                        std::span<const std::string> methods) {
  Fnv1a h;
  h.update(run_config_to_json(run));
  h.update(ds.data_hash);
  for (const auto& g : graphs) h.update(graph_hash(g));
  for (const auto& m : methods) h.update(m);
  return h.hex();
}

BacktestReport run_backtest(const RunConfig& run, std::span<const TickEvent> raw, std::span<const std::string> baselines) {
  run.validate();
  const Dataset ds = build_dataset(raw, run);
  BacktestReport rep;
  rep.run = run;
  rep.universe = ds.data.features.universe;
  RollingResult main = rolling_train(run, ds);
  rep.rows = main.rows;
  for (auto r : rep.rows) rep.row_ts.push_back(ds.data.features.row_ts[r]);
  std::vector<std::string> methods{model_variant_name(run.model.variant)};
  rep.methods.push_back(evaluate_forecasts(methods[0], run, ds, main.rows, main.forecasts));
  for (const auto& g : main.graphs) rep.graph_stats.push_back(graph_stats(g));

  for (const auto& b : baselines) {
    if (std::find(methods.begin(), methods.end(), b) != methods.end()) continue;
    methods.push_back(b);
    if (b == "NAIVE") {
      rep.methods.push_back(evaluate_forecasts(b, run, ds, main.rows, naive_forecasts(ds, run.task, main.rows)));
    } else if (b == "LSTM" || b == "ANN" || b == "GCN_LSTM") {
      RunConfig alt = run;
      alt.model.variant = parse_model_variant(b);
      RollingResult r = rolling_train(alt, ds);
      if (r.rows != main.rows) throw Error("baseline " + b + " evaluated different rows");
      rep.methods.push_back(evaluate_forecasts(b, run, ds, r.rows, r.forecasts));
    } else {
      LinearBaselineResult r = linear_baseline_forecasts(run, ds, b);
      rep.methods.push_back(evaluate_forecasts(b, run, ds, main.rows, r.forecasts));
      if (b == "LASSO") {
        std::vector<LinearModel> futures;
        for (std::size_t v = 0; v < rep.universe.size(); ++v)
          if (rep.universe[v].has_volume() && r.first_block_models[v].coef.size() > 0)
            futures.push_back(r.first_block_models[v]);
        if (!futures.empty()) rep.importance = feature_importance(futures);
      }
    }
  }
  rep.fingerprint = fingerprint(run, ds, main.graphs, methods);
  rep.low_power = rep.rows.size() < 100;
  return rep;
}

BacktestReport run_horizon(const RunConfig& run, std::span<const TickEvent> raw) {
  const std::string naive[] = {"NAIVE"};
  return run_backtest(run, raw, naive);
}

// ---------------------------------------------------------------- report files

namespace {

void write_text(const std::filesystem::path& p, const std::string& s, std::vector<std::filesystem::path>& written) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << s;
  written.push_back(p);
}

std::pair<std::string, std::string> task_metrics(Quantity q) {
  switch (q) {
    case Quantity::RETURN: return {"SR", "PPD"};
    case Quantity::VOLATILITY: return {"QLIKE", "HMSE"};
    case Quantity::VOLUME: return {"MSE", "MAE"};
  }
  return {"", ""};
}

}  // namespace

std::vector<std::filesystem::path> emit_report(const BacktestReport& rep, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  const std::string fp = rep.fingerprint;
  const std::string task = quantity_name(rep.run.task);
  const auto [m1, m2] = task_metrics(rep.run.task);

  for (const auto& m : rep.methods) {
    std::ostringstream csv;
    csv << "product," << m1 << ',' << m2 << (rep.run.task == Quantity::RETURN ? ",n_tradable" : "") << '\n';
    for (std::size_t i = 0; i + 1 < m.rows.size(); i += 2) {
      csv << m.rows[i].product << ',' << format_double(m.rows[i].value) << ',' << format_double(m.rows[i + 1].value);
      if (rep.run.task == Quantity::RETURN) csv << ',' << m.rows[i].n_periods;
      csv << '\n';
    }
    write_text(dir / ("metrics_" + task + "_" + m.method + "_" + fp + ".csv"), csv.str(), written);
    write_text(dir / ("metric_rows_" + task + "_" + m.method + "_" + fp + ".csv"), metric_rows_csv(m.rows), written);

    std::ostringstream fc;
    fc << "row_ts";
    for (const auto& id : rep.universe) fc << ',' << id.code();
    fc << '\n';
    for (Eigen::Index k = 0; k < m.forecasts.rows(); ++k) {
      fc << rep.row_ts[static_cast<std::size_t>(k)];
      for (Eigen::Index v = 0; v < m.forecasts.cols(); ++v) fc << ',' << format_double(m.forecasts(k, v));
      fc << '\n';
    }
    write_text(dir / ("forecasts_" + task + "_" + m.method + "_" + fp + ".csv"), fc.str(), written);

    for (const auto& [product, pnl] : m.pnl) {
      if (pnl.day.empty()) continue;
      std::ostringstream pc;
      pc << "day,pnl,cumulative,periods\n";
      double cum = 0.0;
      for (std::size_t d = 0; d < pnl.day.size(); ++d) {
        cum += pnl.pnl[d];
        pc << pnl.day[d] << ',' << format_double(pnl.pnl[d]) << ',' << format_double(cum) << ',' << pnl.periods[d]
           << '\n';
      }
      write_text(dir / ("pnl_" + product + "_" + m.method + "_" + fp + ".csv"), pc.str(), written);
    }
  }
  json cfg = json::parse(run_config_to_json(rep.run));
  cfg["fingerprint"] = fp;
  cfg["evaluated_rows"] = rep.rows.size();
  cfg["low_power"] = rep.low_power;
  write_text(dir / ("config_" + fp + ".json"), cfg.dump(2) + "\n", written);

  std::ostringstream gs;
  gs << "graph,positive_edges,negative_edges,max_positive_out,max_positive_node,max_negative_out,max_negative_node,"
        "spx_to_spx,spx_to_vix,vix_to_spx,vix_to_vix,q0,q25,q50,q75,q100\n";
  for (const auto& s : rep.graph_stats) {
    gs << s.name << ',' << s.positive_edges << ',' << s.negative_edges << ',' << s.max_positive_out << ','
       << s.max_positive_node << ',' << s.max_negative_out << ',' << s.max_negative_node << ',' << s.spx_to_spx << ','
       << s.spx_to_vix << ',' << s.vix_to_spx << ',' << s.vix_to_vix;
    for (double q : s.quantiles) gs << ',' << format_double(q);
    gs << '\n';
  }
  write_text(dir / ("graph_stats_" + fp + ".csv"), gs.str(), written);

  if (!rep.importance.empty()) {
    const auto p = dir / ("feature_importance_" + fp + ".csv");
    write_feature_importance_csv(rep.importance, p);
    written.push_back(p);
  }
  return written;
}

// ---------------------------------------------------------------- ablation

std::vector<std::string> ablation_config_names() {
  return {"Contemporaneous Weighted", "Contemporaneous Unweighted", "Lagged Weighted", "Lagged Unweighted",
          "Loss Function: MSE",       "Loss Function: MAE",         "Loss Function: SR", "Non-parallel modules",
          "Used model"};
}

std::optional<RunConfig> ablation_config(const RunConfig& base, const std::string& name) {
  RunConfig c = base;
  auto subset = [&](ChannelSubset s) {
    c.channels = s;
    c.model.n_channels = static_cast<int>(channel_configs(c.task, s, c.knn_k, c.normalization).size());
    return c;
  };
  if (name == "Contemporaneous Weighted") return subset(ChannelSubset::CONTEMPORANEOUS_WEIGHTED);
  if (name == "Contemporaneous Unweighted") return subset(ChannelSubset::CONTEMPORANEOUS_UNWEIGHTED);
  if (name == "Lagged Weighted") return subset(ChannelSubset::LAGGED_WEIGHTED);
  if (name == "Lagged Unweighted") return subset(ChannelSubset::LAGGED_UNWEIGHTED);
  auto with_loss = [&](LossKind k) -> std::optional<RunConfig> {
    if (!loss_compatible(k, c.task) || k == default_loss(c.task)) return std::nullopt;
    c.loss = k;
    return c;
  };
  if (name == "Loss Function: MSE") return with_loss(LossKind::MSE);
  if (name == "Loss Function: MAE") return with_loss(LossKind::MAE);
  if (name == "Loss Function: SR") return with_loss(LossKind::SR);
  if (name == "Non-parallel modules") {
    c.model.share_node_weights = true;
    return c;
  }
  if (name == "Used model") return c;
  throw InvalidArgument("unknown ablation configuration: " + name);
}

AblationTable run_ablation(const RunConfig& base, std::span<const TickEvent> raw, std::span<const Quantity> tasks,
                           std::span<const std::string> products) {
  std::vector<std::string> prods(products.begin(), products.end());
  if (prods.empty()) prods = {"ES_1", "VX_1"};
  AblationTable t;
  for (auto q : tasks) {
    const auto [m1, m2] = task_metrics(q);
    for (const auto& p : prods) {
      t.columns.push_back(quantity_name(q) + ":" + p + ":" + m1);
      t.columns.push_back(quantity_name(q) + ":" + p + ":" + m2);
    }
  }
  for (const auto& name : ablation_config_names()) t.rows.push_back({name, {}});

  // Rows and targets depend on the horizon only, so the dataset is shared across tasks.
  const Dataset ds = build_dataset(raw, base);
  for (auto q : tasks) {
    RunConfig task_base = base;
    task_base.task = q;
    task_base.loss.reset();
    if (task_base.model.uses_gcn())
      task_base.model.n_channels = static_cast<int>(
          channel_configs(q, task_base.channels, task_base.knn_k, task_base.normalization).size());
    const auto [m1, m2] = task_metrics(q);
    for (auto& row : t.rows) {
      const auto cfg = ablation_config(task_base, row.config);
      std::vector<std::optional<double>> vals(prods.size() * 2);
      if (cfg) {
        const RollingResult r = rolling_train(*cfg, ds);
        const MethodResult m = evaluate_forecasts(row.config, *cfg, ds, r.rows, r.forecasts);
        for (std::size_t p = 0; p < prods.size(); ++p)
          for (const auto& mr : m.rows)
            if (mr.product == prods[p]) (mr.metric == m1 ? vals[2 * p] : vals[2 * p + 1]) = mr.value;
      }
      row.values.insert(row.values.end(), vals.begin(), vals.end());
    }
  }
  return t;
}

std::string ablation_csv(const AblationTable& t) {
  std::ostringstream out;
  out << "config";
  for (const auto& c : t.columns) out << ',' << c;
  out << '\n';
  for (const auto& r : t.rows) {
    out << r.config;
    for (const auto& v : r.values) out << ',' << (v ? format_double(*v) : "NA");
    out << '\n';
  }
  return out.str();
}

}  // namespace termnet
