#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "termnet/common.hpp"

namespace termnet {

enum class InstrumentClass : std::uint8_t { ES, VX, INDEX_SPX, INDEX_VIX };

/// A product identified by class and tenor rank (ES_1 is the nearest E-mini contract).
struct InstrumentId {
  InstrumentClass cls = InstrumentClass::ES;
  int tenor_rank = 1;

  static InstrumentId parse(std::string_view code);
  std::string code() const;
  bool is_index() const { return cls == InstrumentClass::INDEX_SPX || cls == InstrumentClass::INDEX_VIX; }
  /// Indices carry no trades and therefore no volume series.
  bool has_volume() const { return !is_index(); }
  /// ES and SPX form one cluster, VX and VIX the other.
  bool in_spx_cluster() const { return cls == InstrumentClass::ES || cls == InstrumentClass::INDEX_SPX; }

  auto operator<=>(const InstrumentId&) const = default;
};

/// ES_1..ES_4, VX_1..VX_8, SPX, VIX.
std::vector<InstrumentId> canonical_universe();

enum class TickKind : std::uint8_t { TRADE, QUOTE, CANCEL };

/// One top-of-book update. `instrument` indexes into the universe the stream was loaded against.
struct TickEvent {
  std::int64_t ts_ns = 0;
  double bid_px = 0.0;
  double ask_px = 0.0;
  std::int32_t bid_sz = 0;
  std::int32_t ask_sz = 0;
  std::uint8_t instrument = 0;
  TickKind kind = TickKind::QUOTE;

  bool zero_liquidity() const { return bid_sz <= 0 || ask_sz <= 0; }
  bool operator==(const TickEvent&) const = default;
};

struct TickFormat {
  std::vector<InstrumentId> universe = canonical_universe();
  /// Out-of-order rows within this tolerance are re-sorted; larger regressions are errors.
  std::int64_t regression_tolerance_ns = 1'000'000'000;
};

struct TickLoadResult {
  std::vector<TickEvent> events;
  std::size_t malformed_rows = 0;
  std::size_t zero_liquidity_rows = 0;
};

TickLoadResult load_ticks(const std::filesystem::path& path, const TickFormat& format = {});
TickLoadResult parse_ticks(std::istream& in, const TickFormat& format = {});
void write_ticks(const std::filesystem::path& path, std::span<const TickEvent> events,
                 std::span<const InstrumentId> universe);

std::vector<TickEvent> filter_zero_liquidity(std::span<const TickEvent> stream);

double mid_price(double bid, double ask);
double spread_bp(double bid, double ask);

inline constexpr std::int64_t kNanosPerMinute = 60'000'000'000LL;

struct GridConfig {
  /// Grid start in UTC nanoseconds, aligned down to a minute. Derived from the stream when unset.
  std::int64_t start_ns = 0;
  std::size_t n_minutes = 0;
  bool derive_from_stream = true;
  int ffill_limit_minutes = 120;
  /// Known tenor-roll times (UTC ns); recorded as splice points, no price adjustment applied.
  std::vector<std::int64_t> roll_times_ns;
};

struct InstrumentSeries {
  std::vector<double> mid;              // last observed mid at or before minute close
  std::vector<std::int32_t> trade_count;
  std::vector<std::uint8_t> valid;
  std::vector<double> spread_bp;        // spread of the last quote
  std::vector<std::int32_t> min_size;   // min(bid_sz, ask_sz) of the last quote
  std::vector<std::size_t> splice_minutes;
};

/// Minute panel shared by every instrument. Minute i spans [start + i min, start + (i+1) min).
struct PanelSeries {
  std::int64_t start_ns = 0;
  std::vector<std::int64_t> minute_ts;
  std::vector<InstrumentId> universe;
  std::vector<InstrumentSeries> series;

  std::size_t n_minutes() const { return minute_ts.size(); }
  std::size_t index_of(const InstrumentId& id) const;
  /// Minute index containing `ts_ns`; may be out of range.
  std::int64_t minute_of(std::int64_t ts_ns) const;
};

PanelSeries build_panel(std::span<const TickEvent> stream, std::span<const InstrumentId> universe,
                        const GridConfig& grid = {});

/// Writes `minute_ts,mid,trade_count,valid` per instrument into `<dir>/panel_<code>.csv`.
void export_panel(const PanelSeries& panel, const std::filesystem::path& dir);

}  // namespace termnet
