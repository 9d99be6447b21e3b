#include "termnet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace termnet {

namespace {

constexpr std::int64_t kNanosPerSecond = 1'000'000'000LL;

double trigamma(double x) {
  double acc = 0.0;
  while (x < 6.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double x2 = 1.0 / (x * x);
  return acc + 1.0 / x + x2 / 2.0 +
         (1.0 / x) * x2 * (1.0 / 6.0 - x2 * (1.0 / 30.0 - x2 * (1.0 / 42.0 - x2 / 30.0)));
}

double threshold_bp(const InstrumentId& id) {
  switch (id.cls) {
    case InstrumentClass::ES: return 15.0;
    case InstrumentClass::VX: return 25.0;
    default: return 0.0;
  }
}

struct Book {
  double mid = 0.0;
  double bid = 0.0, ask = 0.0;
  std::int32_t bid_sz = 0, ask_sz = 0;
};

}  // namespace

InstrumentLoading default_loading(const InstrumentId& id) {
  InstrumentLoading l;
  switch (id.cls) {
    case InstrumentClass::ES:
      l.minute_sd = 0.0004;
      l.market = 1.0;
      l.vol = 0.0;
      l.idio = 0.15 + 0.02 * (id.tenor_rank - 1);
      l.start_price = 4000.0 + 10.0 * (id.tenor_rank - 1);
      l.trade_intensity = 4.0 / std::sqrt(static_cast<double>(id.tenor_rank));
      break;
    case InstrumentClass::VX:
      l.minute_sd = 0.002 * std::pow(0.9, id.tenor_rank - 1);
      l.market = 0.0;
      l.vol = 1.0;
      l.idio = 0.2 + 0.03 * (id.tenor_rank - 1);
      l.start_price = 20.0 + 0.5 * (id.tenor_rank - 1);
      l.trade_intensity = 3.0 / std::sqrt(static_cast<double>(id.tenor_rank));
      break;
    case InstrumentClass::INDEX_SPX:
      l.minute_sd = 0.0004;
      l.market = 1.0;
      l.vol = 0.0;
      l.idio = 0.05;
      l.start_price = 3990.0;
      l.trade_intensity = 0.0;
      break;
    case InstrumentClass::INDEX_VIX:
      l.minute_sd = 0.003;
      l.market = 0.0;
      l.vol = 1.0;
      l.idio = 0.3;
      l.start_price = 19.0;
      l.trade_intensity = 0.0;
      break;
  }
  return l;
}

void SynthConfig::validate() const {
  if (n_days <= 0) throw InvalidArgument("SynthConfig: n_days must be positive");
  if (universe.empty() || universe.size() > 255) throw InvalidArgument("SynthConfig: universe size out of range");
  if (!loadings.empty() && loadings.size() != universe.size())
    throw InvalidArgument("SynthConfig: one loading per instrument required");
  if (!(vol_persistence > 0.0 && vol_persistence < 1.0))
    throw InvalidArgument("SynthConfig: vol_persistence must lie in (0,1)");
  if (!(std::fabs(factor_correlation) <= 1.0)) throw InvalidArgument("SynthConfig: |factor_correlation| > 1");
  if (vol_state_sd < 0 || return_scale < 0) throw InvalidArgument("SynthConfig: negative scale");
  if (!(common_vol_share >= 0.0 && common_vol_share <= 1.0))
    throw InvalidArgument("SynthConfig: common_vol_share must lie in [0,1]");
  for (const auto& l : resolved_loadings())
    if (l.trade_intensity < 0 || l.minute_sd < 0 || !(l.start_price > 0))
      throw InvalidArgument("SynthConfig: invalid loading");
  for (const auto& c : couplings) {
    if (c.source >= universe.size() || c.target >= universe.size() || c.source == c.target)
      throw InvalidArgument("SynthConfig: coupling endpoints invalid");
    if (c.quantity == Quantity::VOLUME) throw InvalidArgument("SynthConfig: volume couplings are not supported");
  }
}

std::vector<InstrumentLoading> SynthConfig::resolved_loadings() const {
  if (!loadings.empty()) return loadings;
  std::vector<InstrumentLoading> out;
  for (const auto& id : universe) out.push_back(default_loading(id));
  return out;
}

double implied_correlation(const SynthConfig& cfg, std::size_t a, std::size_t b) {
  const auto l = cfg.resolved_loadings();
  const auto& x = l.at(a);
  const auto& y = l.at(b);
  const double rho = cfg.factor_correlation;
  auto var = [&](const InstrumentLoading& z) {
    return z.market * z.market + z.vol * z.vol + 2 * rho * z.market * z.vol + z.idio * z.idio;
  };
  double cov = x.market * y.market + x.vol * y.vol + rho * (x.market * y.vol + x.vol * y.market);
  if (a == b) cov += x.idio * x.idio;
  return cov / std::sqrt(var(x) * var(y));
}

double irreducible_log_rv_mse(const SynthConfig& cfg, const PlantedCoupling& c, int minutes_per_hour) {
  const double s2 = cfg.vol_state_sd * cfg.vol_state_sd;
  const double phi = cfg.vol_persistence;
  return (1.0 - phi * phi) * s2 + c.noise_sd * c.noise_sd + trigamma(minutes_per_hour / 2.0);
}

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.universe.size();
  const auto loads = cfg.resolved_loadings();
  const std::size_t n_hours = static_cast<std::size_t>(cfg.n_days) * 24;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SynthResult out;
  out.hourly_state.resize(n_hours);
  out.hourly_z.assign(n, std::vector<double>(n_hours, 0.0));

  std::vector<double> norm(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = loads[i];
    const double v = l.market * l.market + l.vol * l.vol + 2 * cfg.factor_correlation * l.market * l.vol +
                     l.idio * l.idio;
    norm[i] = v > 0 ? std::sqrt(v) : 1.0;
  }

  std::vector<Book> book(n);
  auto draw_spread = [&](std::size_t i) {
    const double th = threshold_bp(cfg.universe[i]);
    if (th == 0.0) return 0.0;
    return th * (unif(rng) < cfg.wide_probability ? cfg.wide_factor : cfg.narrow_factor);
  };
  auto draw_size = [&]() {
    if (unif(rng) < cfg.size_one_probability) return std::int32_t{1};
    return static_cast<std::int32_t>(2 + static_cast<int>(unif(rng) * 39.0));
  };
  auto set_quote = [&](std::size_t i, double mid) {
    Book& b = book[i];
    b.mid = mid;
    if (cfg.universe[i].is_index()) {
      b.bid = b.ask = mid;
      b.bid_sz = b.ask_sz = 1;
      return;
    }
    const double half = mid * draw_spread(i) / 2e4;
    b.bid = mid - half;
    b.ask = mid + half;
    b.bid_sz = draw_size();
    b.ask_sz = draw_size();
  };
  for (std::size_t i = 0; i < n; ++i) set_quote(i, loads[i].start_price);

  const double rho = cfg.factor_correlation;
  const double rho_c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  const double innov = cfg.vol_state_sd * std::sqrt(1.0 - cfg.vol_persistence * cfg.vol_persistence);
  double state = cfg.vol_state_sd * normal(rng);
  // Per-instrument states mix the common state with independent AR(1) paths of the same law.
  const double w_common = std::sqrt(cfg.common_vol_share), w_own = std::sqrt(1.0 - cfg.common_vol_share);
  std::vector<double> own_state(n, 0.0), inst_state(n, 0.0);
  if (w_own > 0)
    for (auto& s : own_state) s = cfg.vol_state_sd * normal(rng);

  std::vector<double> log_var_shift(n), drift(n), shock_sum(n);
  std::vector<TickEvent> minute_events;
  out.events.reserve(n_hours * 60 * n * 3);

  for (std::size_t h = 0; h < n_hours; ++h) {
    if (h > 0) state = cfg.vol_persistence * state + innov * normal(rng);
    out.hourly_state[h] = state;
    for (std::size_t i = 0; i < n; ++i) {
      if (w_own > 0 && h > 0) own_state[i] = cfg.vol_persistence * own_state[i] + innov * normal(rng);
      inst_state[i] = w_common * state + w_own * own_state[i];
    }
    std::fill(log_var_shift.begin(), log_var_shift.end(), 0.0);
    std::fill(drift.begin(), drift.end(), 0.0);
    for (const auto& c : cfg.couplings) {
      const double z = h > 0 ? out.hourly_z[c.source][h - 1] : 0.0;
      if (c.quantity == Quantity::VOLATILITY)
        log_var_shift[c.target] += c.beta * z + c.noise_sd * normal(rng);
      else
        drift[c.target] += c.beta * z / std::sqrt(60.0);  // in units of the target's minute sd
    }
    std::fill(shock_sum.begin(), shock_sum.end(), 0.0);

    for (std::size_t m = 0; m < 60; ++m) {
      const std::int64_t minute_start =
          cfg.start_ns + static_cast<std::int64_t>(h * 60 + m) * kNanosPerMinute;
      const double fm = normal(rng);
      const double fv = rho * fm + rho_c * normal(rng);
      minute_events.clear();
      for (std::size_t i = 0; i < n; ++i) {
        const auto& l = loads[i];
        const double e = (l.market * fm + l.vol * fv + l.idio * normal(rng)) / norm[i];
        shock_sum[i] += e;
        const double sd = cfg.return_scale * l.minute_sd * std::exp(0.5 * (inst_state[i] + log_var_shift[i]));
        const double r = sd * (e + drift[i]);
        const std::uint8_t inst = static_cast<std::uint8_t>(i);

        if (!cfg.universe[i].is_index()) {
          Book& b = book[i];
          const double lam = l.trade_intensity * std::exp(cfg.volume_elasticity * inst_state[i]);
          std::poisson_distribution<int> pois(lam);
          const int trades = lam > 0 ? pois(rng) : 0;
          std::vector<std::int64_t> offsets;
          for (int k = 0; k < trades; ++k)
            offsets.push_back(static_cast<std::int64_t>(unif(rng) * 59.0 * kNanosPerSecond));
          std::sort(offsets.begin(), offsets.end());
          const double p_buy = 0.5 + 0.4 * std::tanh(e);
          for (auto off : offsets) {
            const bool buy = unif(rng) < p_buy;
            auto& side = buy ? b.ask_sz : b.bid_sz;
            side = std::max<std::int32_t>(1, side - (1 + static_cast<std::int32_t>(unif(rng) * 5.0)));
            minute_events.push_back({minute_start + off, b.bid, b.ask, b.bid_sz, b.ask_sz, inst, TickKind::TRADE});
          }
          if (unif(rng) < cfg.cancel_probability) {
            auto& side = unif(rng) < 0.5 ? b.bid_sz : b.ask_sz;
            side = std::max<std::int32_t>(1, side - 1 - static_cast<std::int32_t>(unif(rng) * 3.0));
            const auto off = static_cast<std::int64_t>(unif(rng) * 59.0 * kNanosPerSecond);
            minute_events.push_back({minute_start + off, b.bid, b.ask, b.bid_sz, b.ask_sz, inst, TickKind::CANCEL});
          }
          if (unif(rng) < cfg.zero_size_probability) {
            const auto off = static_cast<std::int64_t>(unif(rng) * 59.0 * kNanosPerSecond);
            minute_events.push_back({minute_start + off, b.bid, b.ask, 0, b.ask_sz, inst, TickKind::QUOTE});
          }
        }
        set_quote(i, book[i].mid * std::exp(r));
        const Book& b = book[i];
        minute_events.push_back({minute_start + 59 * kNanosPerSecond + static_cast<std::int64_t>(i) * 1000, b.bid,
                                 b.ask, b.bid_sz, b.ask_sz, inst, TickKind::QUOTE});
      }
      std::stable_sort(minute_events.begin(), minute_events.end(),
                       [](const TickEvent& a, const TickEvent& b) { return a.ts_ns < b.ts_ns; });
      out.events.insert(out.events.end(), minute_events.begin(), minute_events.end());
    }
    for (std::size_t i = 0; i < n; ++i) out.hourly_z[i][h] = shock_sum[i] / std::sqrt(60.0);
  }
  return out;
}

SynthConfig plant_predictability(SynthConfig cfg, const InstrumentId& source, const InstrumentId& target,
                                 double beta, Quantity quantity, double noise_sd) {
  auto find = [&](const InstrumentId& id) {
    auto it = std::find(cfg.universe.begin(), cfg.universe.end(), id);
    if (it == cfg.universe.end()) throw InvalidArgument("plant_predictability: " + id.code() + " not in universe");
    return static_cast<std::size_t>(it - cfg.universe.begin());
  };
  cfg.couplings.push_back({find(source), find(target), quantity, beta, noise_sd});
  cfg.validate();
  return cfg;
}

std::string ground_truth_json(const SynthConfig& cfg) {
  using nlohmann::json;
  const auto loads = cfg.resolved_loadings();
  json j;
  j["seed"] = cfg.seed;
  j["n_days"] = cfg.n_days;
  j["start_ns"] = cfg.start_ns;
  j["factor_correlation"] = cfg.factor_correlation;
  j["vol_persistence"] = cfg.vol_persistence;
  j["vol_state_sd"] = cfg.vol_state_sd;
  j["common_vol_share"] = cfg.common_vol_share;
  j["volume_elasticity"] = cfg.volume_elasticity;
  j["return_scale"] = cfg.return_scale;
  auto inst = json::array();
  for (std::size_t i = 0; i < cfg.universe.size(); ++i) {
    const auto& l = loads[i];
    inst.push_back({{"code", cfg.universe[i].code()},
                    {"minute_sd", l.minute_sd},
                    {"market", l.market},
                    {"vol", l.vol},
                    {"idio", l.idio},
                    {"start_price", l.start_price},
                    {"trade_intensity", l.trade_intensity}});
  }
  j["instruments"] = inst;
  auto cp = json::array();
  for (const auto& c : cfg.couplings) {
    json e = {{"source", cfg.universe[c.source].code()},
              {"target", cfg.universe[c.target].code()},
              {"quantity", quantity_name(c.quantity)},
              {"beta", c.beta},
              {"noise_sd", c.noise_sd}};
    if (c.quantity == Quantity::VOLATILITY) e["irreducible_log_rv_mse"] = irreducible_log_rv_mse(cfg, c);
    cp.push_back(e);
  }
  j["couplings"] = cp;
  auto es = std::find(cfg.universe.begin(), cfg.universe.end(), InstrumentId{InstrumentClass::ES, 1});
  auto vx = std::find(cfg.universe.begin(), cfg.universe.end(), InstrumentId{InstrumentClass::VX, 1});
  if (es != cfg.universe.end() && vx != cfg.universe.end())
    j["implied_correlation_ES_1_VX_1"] = implied_correlation(
        cfg, static_cast<std::size_t>(es - cfg.universe.begin()), static_cast<std::size_t>(vx - cfg.universe.begin()));
  return j.dump(2);
}

void write_synthetic(const SynthConfig& cfg, const SynthResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_ticks(dir / "ticks.csv", r.events, cfg.universe);
  std::ofstream out(dir / "ground_truth.json");
  if (!out) throw IoError("cannot write " + (dir / "ground_truth.json").string());
  out << ground_truth_json(cfg) << '\n';
}

}  // namespace termnet
