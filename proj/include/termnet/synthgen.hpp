#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "termnet/features.hpp"
#include "termnet/marketdata.hpp"

namespace termnet {

/// Minute return of an instrument: sd * exp(state/2) * (market*m + vol*v + idio*e) / norm,
/// with m, v standard normal factors of correlation `factor_correlation`.
struct InstrumentLoading {
  double minute_sd = 0.0004;
  double market = 1.0;
  double vol = 0.0;
  double idio = 0.15;
  double start_price = 4000.0;
  /// Poisson trades per minute at zero volatility state; 0 for indices.
  double trade_intensity = 2.0;
};

/// Node `target`'s next-hour quantity depends on node `source`'s standardized return of the current hour.
struct PlantedCoupling {
  std::size_t source = 0;
  std::size_t target = 0;
  Quantity quantity = Quantity::VOLATILITY;
  double beta = 0.0;
  /// Extra hourly log-variance noise on the target (VOLATILITY coupling only).
  double noise_sd = 0.0;
};

struct SynthConfig {
  int n_days = 10;
  std::uint64_t seed = 1;
  std::int64_t start_ns = 1'609'718'400'000'000'000LL;  // 2021-01-04 00:00 UTC
  std::vector<InstrumentId> universe = canonical_universe();
  std::vector<InstrumentLoading> loadings;  // empty: defaults by instrument class
  double factor_correlation = -0.7;
  /// Hourly AR(1) log-variance state: persistence and stationary sd.
  double vol_persistence = 0.9;
  double vol_state_sd = 0.5;
  /// Fraction of each instrument's log-variance state that is common to all instruments; the rest
  /// follows an independent AR(1) path with the same persistence and sd.
  double common_vol_share = 1.0;
  double volume_elasticity = 0.8;
  /// Multiplies every minute sd; 0 freezes all prices.
  double return_scale = 1.0;
  /// Spreads sit at `narrow_factor` or `wide_factor` times the tradability threshold.
  double narrow_factor = 0.3;
  double wide_factor = 1.5;
  double wide_probability = 0.2;
  double size_one_probability = 0.05;
  double cancel_probability = 0.1;
  double zero_size_probability = 0.02;
  std::vector<PlantedCoupling> couplings;

  void validate() const;
  /// Loadings with class defaults filled in.
  std::vector<InstrumentLoading> resolved_loadings() const;
};

/// Class defaults: ES tracks the market factor, VX the volatility factor, indices their complex.
InstrumentLoading default_loading(const InstrumentId& id);

struct SynthResult {
  std::vector<TickEvent> events;  // sorted by timestamp
  std::vector<double> hourly_state;
  /// Standardized hourly return of every instrument, [instrument][hour].
  std::vector<std::vector<double>> hourly_z;
};

SynthResult generate(const SynthConfig& cfg);

/// Adds a coupling `source -> target` and returns the new configuration.
SynthConfig plant_predictability(SynthConfig cfg, const InstrumentId& source, const InstrumentId& target,
                                 double beta, Quantity quantity = Quantity::VOLATILITY, double noise_sd = 0.0);

/// Pearson correlation of two instruments' minute returns implied by the loadings.
double implied_correlation(const SynthConfig& cfg, std::size_t a, std::size_t b);

/// Lower bound on the next-hour log-RV forecast MSE of a coupled target that knows the state process,
/// the coupling and the source return: AR(1) innovation + coupling noise + log chi-square sampling noise.
double irreducible_log_rv_mse(const SynthConfig& cfg, const PlantedCoupling& c, int minutes_per_hour = 60);

std::string ground_truth_json(const SynthConfig& cfg);
/// Writes `ticks.csv` and `ground_truth.json` into `dir`.
void write_synthetic(const SynthConfig& cfg, const SynthResult& r, const std::filesystem::path& dir);

}  // namespace termnet
