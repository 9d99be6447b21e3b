#pragma once

#include <random>
#include <vector>

#include "termnet/marketdata.hpp"

namespace testing {

inline constexpr std::int64_t kStart = 1'609'718'400'000'000'000LL;  // a Monday 00:00 UTC

inline termnet::TickEvent quote(std::int64_t ts, double mid, std::uint8_t inst = 0, int size = 5,
                                termnet::TickKind kind = termnet::TickKind::QUOTE) {
  termnet::TickEvent ev;
  ev.ts_ns = ts;
  ev.bid_px = mid - 0.125;
  ev.ask_px = mid + 0.125;
  ev.bid_sz = size;
  ev.ask_sz = size;
  ev.instrument = inst;
  ev.kind = kind;
  return ev;
}

/// One quote per minute at the given mids (minute i at 30 s past the minute).
inline std::vector<termnet::TickEvent> mid_path(const std::vector<double>& mids, std::uint8_t inst = 0) {
  std::vector<termnet::TickEvent> out;
  for (std::size_t i = 0; i < mids.size(); ++i)
    out.push_back(quote(kStart + static_cast<std::int64_t>(i) * termnet::kNanosPerMinute + 30'000'000'000LL, mids[i],
                        inst));
  return out;
}

/// Prices whose one-minute returns are exactly representable ratios of the given returns.
inline std::vector<double> path_from_returns(double p0, const std::vector<double>& r) {
  std::vector<double> p{p0};
  for (double x : r) p.push_back(p.back() * (1.0 + x));
  return p;
}

inline termnet::PanelSeries single_panel(const std::vector<double>& mids) {
  const std::vector<termnet::InstrumentId> u{{termnet::InstrumentClass::ES, 1}};
  return termnet::build_panel(mid_path(mids), u);
}

}  // namespace testing
