#include "termnet/features.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace termnet {

std::string quantity_name(Quantity q) {
  switch (q) {
    case Quantity::RETURN: return "RETURN";
    case Quantity::VOLATILITY: return "VOLATILITY";
    case Quantity::VOLUME: return "VOLUME";
  }
  return "?";
}

Quantity parse_quantity(std::string_view s) {
  if (s == "RETURN" || s == "return" || s == "returns" || s == "RET") return Quantity::RETURN;
  if (s == "VOLATILITY" || s == "volatility" || s == "VOL") return Quantity::VOLATILITY;
  if (s == "VOLUME" || s == "volume" || s == "VLM") return Quantity::VOLUME;
  throw InvalidArgument("unknown quantity '" + std::string(s) + "'");
}

void FeatureConfig::validate() const {
  auto positive = [](const std::vector<int>& v) {
    return std::all_of(v.begin(), v.end(), [](int k) { return k > 0; });
  };
  if (!positive(return_windows) || !positive(rv_windows) || !positive(semivol_windows) || !positive(ofi_windows) ||
      !positive(volume_windows) || ew_span <= 0)
    throw InvalidArgument("FeatureConfig: windows must be positive");
  for (double w : ew_weights)
    if (!(w > 0.0 && w <= 1.0)) throw InvalidArgument("FeatureConfig: ew weights must lie in (0,1]");
}

namespace {

std::vector<double> one_minute_returns(const InstrumentSeries& s) {
  const std::size_t n = s.mid.size();
  std::vector<double> r(n, kMissing);
  for (std::size_t m = 1; m < n; ++m)
    if (s.valid[m] && s.valid[m - 1]) r[m] = (s.mid[m] - s.mid[m - 1]) / s.mid[m - 1];
  return r;
}

std::optional<double> kret(const InstrumentSeries& s, std::size_t t, std::size_t k) {
  if (t >= s.mid.size() || t < k || !s.valid[t] || !s.valid[t - k]) return std::nullopt;
  return (s.mid[t] - s.mid[t - k]) / s.mid[t - k];
}

// Sum over j = 0..k-1 of f(r_{t-j}); nullopt when any return in the window is missing.
template <typename F>
std::optional<double> window_sum(std::span<const double> r, std::size_t t, std::size_t k, F&& f) {
  if (t >= r.size() || k == 0 || t + 1 < k) return std::nullopt;
  double acc = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double x = r[t - j];
    if (is_missing(x)) return std::nullopt;
    acc += f(x);
  }
  return acc;
}

std::optional<double> rv_window(std::span<const double> r, std::size_t t, std::size_t k) {
  return window_sum(r, t, k, [](double x) { return x * x; });
}

std::optional<double> semi_window(std::span<const double> r, std::size_t t, std::size_t k, SemiSide side) {
  if (side == SemiSide::POS) return window_sum(r, t, k, [](double x) { return x >= 0.0 ? x * x : 0.0; });
  return window_sum(r, t, k, [](double x) { return x <= 0.0 ? x * x : 0.0; });
}

template <typename F>
std::optional<double> ew_window(std::span<const double> r, std::size_t t, double w, std::size_t span, F&& f) {
  if (t >= r.size() || t < span) return std::nullopt;
  double acc = 0.0, weight = 1.0;
  for (std::size_t j = 0; j <= span; ++j) {
    const double x = r[t - j];
    if (is_missing(x)) return std::nullopt;
    acc += weight * f(x);
    weight *= w;
  }
  return w == 1.0 ? acc : (1.0 - w) * acc;
}

std::optional<double> dvol_window(const InstrumentSeries& s, std::size_t t, std::size_t k) {
  if (k == 0 || t >= s.trade_count.size() || t + 1 < 2 * k) return std::nullopt;
  std::int64_t now = 0, before = 0;
  for (std::size_t j = 0; j < k; ++j) {
    now += s.trade_count[t - j];
    before += s.trade_count[t - k - j];
  }
  if (now <= 0 || before <= 0) return std::nullopt;
  return std::log(static_cast<double>(now) / static_cast<double>(before));
}

std::int64_t ofi_term(const TickEvent& prev, const TickEvent& cur) {
  std::int64_t e = 0;
  if (cur.bid_px >= prev.bid_px) e += cur.bid_sz;
  if (cur.bid_px <= prev.bid_px) e -= prev.bid_sz;
  if (cur.ask_px <= prev.ask_px) e -= cur.ask_sz;
  if (cur.ask_px >= prev.ask_px) e += prev.ask_sz;
  return e;
}

std::string weight_label(double w) {
  auto s = format_double(w);
  if (s.find('.') == std::string::npos) s += ".0";
  return s;
}

std::int64_t floor_mod(std::int64_t a, std::int64_t b) {
  const auto r = a % b;
  return r < 0 ? r + b : r;
}

}  // namespace

std::optional<double> k_minute_return(const PanelSeries& panel, std::size_t inst, std::size_t t, std::size_t k) {
  return kret(panel.series.at(inst), t, k);
}

std::optional<double> realized_variance(const PanelSeries& panel, std::size_t inst, std::size_t t, std::size_t k) {
  const auto r = one_minute_returns(panel.series.at(inst));
  return rv_window(r, t, k);
}

std::optional<double> semivariance(const PanelSeries& panel, std::size_t inst, std::size_t t, std::size_t k,
                                   SemiSide side) {
  const auto r = one_minute_returns(panel.series.at(inst));
  return semi_window(r, t, k, side);
}

std::optional<double> ew_return(const PanelSeries& panel, std::size_t inst, std::size_t t, double w,
                                std::size_t span) {
  const auto r = one_minute_returns(panel.series.at(inst));
  return ew_window(r, t, w, span, [](double x) { return x; });
}

std::optional<double> ew_rv(const PanelSeries& panel, std::size_t inst, std::size_t t, double w, std::size_t span) {
  const auto r = one_minute_returns(panel.series.at(inst));
  return ew_window(r, t, w, span, [](double x) { return x * x; });
}

double ofi_contribution(const TickEvent& prev, const TickEvent& cur) {
  return static_cast<double>(ofi_term(prev, cur));
}

double ofi(std::span<const TickEvent> stream, const PanelSeries& panel, std::size_t inst, std::size_t t,
           std::size_t k) {
  const auto lo = static_cast<std::int64_t>(t) - static_cast<std::int64_t>(k) + 1;
  const auto hi = static_cast<std::int64_t>(t);
  const TickEvent* prev = nullptr;
  std::int64_t total = 0;
  for (const auto& ev : stream) {
    if (ev.instrument != inst) continue;
    const auto m = panel.minute_of(ev.ts_ns);
    if (prev != nullptr && m >= lo && m <= hi) total += ofi_term(*prev, ev);
    prev = &ev;
  }
  return static_cast<double>(total);
}

std::optional<double> delta_volume(const PanelSeries& panel, std::size_t inst, std::size_t t, std::size_t k) {
  return dvol_window(panel.series.at(inst), t, k);
}

std::array<std::uint8_t, kCalendarDummies> calendar_dummies(std::int64_t ts_ns, int local_offset_hours) {
  constexpr std::int64_t kHour = 3600LL * 1'000'000'000LL;
  constexpr std::int64_t kDay = 24 * kHour;
  const std::int64_t local = ts_ns + local_offset_hours * kHour;
  const std::int64_t days = (local - floor_mod(local, kDay)) / kDay;
  const auto weekday = floor_mod(days + 4, 7);  // 1970-01-01 was a Thursday; 0 = Sunday
  const auto hour = floor_mod(local, kDay) / kHour;
  std::array<std::uint8_t, kCalendarDummies> out{};
  if (weekday >= 1 && weekday <= 6) out[static_cast<std::size_t>(weekday - 1)] = 1;
  if (hour <= 22) out[6 + static_cast<std::size_t>(hour)] = 1;
  return out;
}

const std::vector<std::string>& calendar_dummy_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v{"Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday"};
    for (int h = 0; h <= 22; ++h) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "Hour_%02d", h);
      v.emplace_back(buf);
    }
    return v;
  }();
  return names;
}

OfiIndex::OfiIndex(std::span<const TickEvent> stream, const PanelSeries& panel) {
  const std::size_t n = panel.n_minutes();
  std::vector<std::vector<std::int64_t>> per_minute(panel.universe.size(), std::vector<std::int64_t>(n, 0));
  std::vector<const TickEvent*> prev(panel.universe.size(), nullptr);
  for (const auto& ev : stream) {
    if (ev.instrument >= per_minute.size()) continue;
    auto& p = prev[ev.instrument];
    const auto m = panel.minute_of(ev.ts_ns);
    if (p != nullptr && m >= 0 && m < static_cast<std::int64_t>(n))
      per_minute[ev.instrument][static_cast<std::size_t>(m)] += ofi_term(*p, ev);
    p = &ev;
  }
  prefix_.resize(per_minute.size());
  for (std::size_t i = 0; i < per_minute.size(); ++i) {
    prefix_[i].assign(n + 1, 0);
    for (std::size_t m = 0; m < n; ++m) prefix_[i][m + 1] = prefix_[i][m] + per_minute[i][m];
  }
}

double OfiIndex::window(std::size_t inst, std::size_t t, std::size_t k) const {
  const auto& p = prefix_.at(inst);
  if (t + 1 >= p.size() || t + 1 < k) return kMissing;
  return static_cast<double>(p[t + 1] - p[t + 1 - k]);
}

const std::vector<double>& TargetSet::series(std::size_t inst, Quantity q) const {
  switch (q) {
    case Quantity::RETURN: return ret.at(inst);
    case Quantity::VOLATILITY: return log_rv.at(inst);
    case Quantity::VOLUME: return dvol.at(inst);
  }
  throw InvalidArgument("unknown quantity");
}

std::vector<std::string> feature_columns(const FeatureConfig& cfg, bool with_volume) {
  std::vector<std::string> cols;
  auto add = [&](const std::string& prefix, const std::vector<int>& windows) {
    for (int k : windows) cols.push_back(prefix + std::to_string(k));
  };
  add("ret_", cfg.return_windows);
  add("rv_", cfg.rv_windows);
  add("rv_pos", cfg.semivol_windows);
  add("rv_neg", cfg.semivol_windows);
  for (double w : cfg.ew_weights) cols.push_back("weigh_rets_" + weight_label(w));
  for (double w : cfg.ew_weights) cols.push_back("weigh_rv_" + weight_label(w));
  add("ofi_", cfg.ofi_windows);
  if (with_volume) add("num_trades_", cfg.volume_windows);
  if (cfg.calendar_dummies)
    for (const auto& name : calendar_dummy_names()) cols.push_back(name);
  return cols;
}

AssembledData assemble(const PanelSeries& panel, std::span<const TickEvent> stream, const FeatureConfig& cfg,
                       const RowGrid& grid) {
  cfg.validate();
  if (grid.step_minutes <= 0 || grid.horizon_minutes <= 0) throw InvalidArgument("RowGrid: non-positive step");
  AssembledData out;
  auto& fm = out.features;
  fm.universe = panel.universe;
  const std::size_t n = panel.n_minutes();
  const std::int64_t first_close = panel.start_ns / kNanosPerMinute + 1 + cfg.local_offset_hours * 60LL;
  for (std::size_t t = 0; t < n; ++t) {
    if (floor_mod(first_close + static_cast<std::int64_t>(t), grid.step_minutes) == 0) {
      fm.row_minute.push_back(t);
      fm.row_ts.push_back(panel.minute_ts[t] + kNanosPerMinute);
    }
  }
  const std::size_t rows = fm.row_minute.size();
  const OfiIndex ofi_index(stream, panel);
  const auto h = static_cast<std::size_t>(grid.horizon_minutes);
  auto& tg = out.targets;
  tg.horizon_minutes = grid.horizon_minutes;

  for (std::size_t i = 0; i < panel.universe.size(); ++i) {
    const auto& s = panel.series[i];
    const bool with_volume = panel.universe[i].has_volume();
    const auto r = one_minute_returns(s);
    InstrumentFeatures inf;
    inf.columns = feature_columns(cfg, with_volume);
    inf.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(inf.columns.size()));
    inf.mask.assign(rows, 0);
    std::vector<double> ret(rows, kMissing), log_rv(rows, kMissing), dvol(rows, kMissing);

    for (std::size_t row = 0; row < rows; ++row) {
      const std::size_t t = fm.row_minute[row];
      std::size_t c = 0;
      auto put = [&](std::optional<double> v) { inf.values(row, c++) = v.value_or(kMissing); };
      for (int k : cfg.return_windows) put(kret(s, t, static_cast<std::size_t>(k)));
      for (int k : cfg.rv_windows) put(rv_window(r, t, static_cast<std::size_t>(k)));
      for (int k : cfg.semivol_windows) put(semi_window(r, t, static_cast<std::size_t>(k), SemiSide::POS));
      for (int k : cfg.semivol_windows) put(semi_window(r, t, static_cast<std::size_t>(k), SemiSide::NEG));
      const auto span = static_cast<std::size_t>(cfg.ew_span);
      for (double w : cfg.ew_weights) put(ew_window(r, t, w, span, [](double x) { return x; }));
      for (double w : cfg.ew_weights) put(ew_window(r, t, w, span, [](double x) { return x * x; }));
      for (int k : cfg.ofi_windows) inf.values(row, c++) = ofi_index.window(i, t, static_cast<std::size_t>(k));
      if (with_volume)
        for (int k : cfg.volume_windows) put(dvol_window(s, t, static_cast<std::size_t>(k)));
      if (cfg.calendar_dummies) {
        const auto d = calendar_dummies(fm.row_ts[row], cfg.local_offset_hours);
        for (auto bit : d) inf.values(row, c++) = bit;
      }
      bool ok = true;
      for (Eigen::Index j = 0; j < inf.values.cols(); ++j) ok = ok && std::isfinite(inf.values(row, j));
      inf.mask[row] = ok ? 1 : 0;

      if (t + h < n) {
        ret[row] = kret(s, t + h, h).value_or(kMissing);
        if (auto rv = rv_window(r, t + h, h); rv && *rv > 0.0) log_rv[row] = std::log(*rv);
        dvol[row] = dvol_window(s, t + h, h).value_or(kMissing);
      }
    }
    fm.instruments.push_back(std::move(inf));
    tg.ret.push_back(std::move(ret));
    tg.log_rv.push_back(std::move(log_rv));
    tg.dvol.push_back(std::move(dvol));
  }
  return out;
}

FeatureScaler fit_scaler(const FeatureMatrix& m, std::span<const std::size_t> training_rows) {
  const auto& dummies = calendar_dummy_names();
  const std::set<std::string> exempt(dummies.begin(), dummies.end());
  FeatureScaler scaler;
  for (const auto& inf : m.instruments) {
    std::vector<FeatureScaler::Column> cols(inf.columns.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
      auto& col = cols[j];
      col.exempt = exempt.count(inf.columns[j]) > 0;
      if (col.exempt) continue;
      double sum = 0.0;
      std::size_t count = 0;
      for (auto row : training_rows) {
        if (!inf.mask.at(row)) continue;
        sum += inf.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j));
        ++count;
      }
      if (count == 0) continue;
      col.mean = sum / static_cast<double>(count);
      double ss = 0.0;
      for (auto row : training_rows) {
        if (!inf.mask.at(row)) continue;
        const double d = inf.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) - col.mean;
        ss += d * d;
      }
      col.sd = std::sqrt(ss / static_cast<double>(count));
    }
    scaler.instruments.push_back(std::move(cols));
  }
  return scaler;
}

FeatureMatrix standardize(const FeatureMatrix& m, const FeatureScaler& scaler) {
  if (scaler.instruments.size() != m.instruments.size())
    throw InvalidArgument("standardize: scaler does not match feature matrix");
  FeatureMatrix out = m;
  for (std::size_t i = 0; i < out.instruments.size(); ++i) {
    auto& v = out.instruments[i].values;
    const auto& cols = scaler.instruments[i];
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      const auto& c = cols.at(static_cast<std::size_t>(j));
      if (c.exempt) continue;
      if (c.sd < 1e-12)
        v.col(j).array() -= c.mean;
      else
        v.col(j) = ((v.col(j).array() - c.mean) / c.sd).matrix();
    }
  }
  return out;
}

void export_features(const FeatureMatrix& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < m.universe.size(); ++i) {
    const auto path = dir / ("features_" + m.universe[i].code() + ".csv");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    const auto& inf = m.instruments[i];
    out << "row_ts";
    for (const auto& c : inf.columns) out << ',' << c;
    out << ",mask\n";
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
      out << m.row_ts[r];
      for (Eigen::Index j = 0; j < inf.values.cols(); ++j)
        out << ',' << format_double(inf.values(static_cast<Eigen::Index>(r), j));
      out << ',' << int(inf.mask[r]) << '\n';
    }
  }
}

}  // namespace termnet
