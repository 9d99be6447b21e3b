#include "termnet/marketdata.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace termnet {

namespace {

template <typename T>
bool parse_number(std::string_view s, T& out) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

InstrumentId InstrumentId::parse(std::string_view code) {
  code = trim(code);
  if (code == "SPX") return {InstrumentClass::INDEX_SPX, 0};
  if (code == "VIX") return {InstrumentClass::INDEX_VIX, 0};
  auto fail = [&] { return InvalidArgument("unknown instrument code '" + std::string(code) + "'"); };
  if (code.size() < 4 || code[2] != '_') throw fail();
  int rank = 0;
  if (!parse_number(code.substr(3), rank)) throw fail();
  auto prefix = code.substr(0, 2);
  if (prefix == "ES" && rank >= 1 && rank <= 4) return {InstrumentClass::ES, rank};
  if (prefix == "VX" && rank >= 1 && rank <= 8) return {InstrumentClass::VX, rank};
  throw fail();
}

std::string InstrumentId::code() const {
  switch (cls) {
    case InstrumentClass::ES: return "ES_" + std::to_string(tenor_rank);
    case InstrumentClass::VX: return "VX_" + std::to_string(tenor_rank);
    case InstrumentClass::INDEX_SPX: return "SPX";
    case InstrumentClass::INDEX_VIX: return "VIX";
  }
  return "?";
}

std::vector<InstrumentId> canonical_universe() {
  std::vector<InstrumentId> u;
  for (int r = 1; r <= 4; ++r) u.push_back({InstrumentClass::ES, r});
  for (int r = 1; r <= 8; ++r) u.push_back({InstrumentClass::VX, r});
  u.push_back({InstrumentClass::INDEX_SPX, 0});
  u.push_back({InstrumentClass::INDEX_VIX, 0});
  return u;
}

TickLoadResult parse_ticks(std::istream& in, const TickFormat& format) {
  TickLoadResult result;
  std::map<InstrumentId, std::uint8_t> index;
  for (std::size_t i = 0; i < format.universe.size(); ++i)
    index[format.universe[i]] = static_cast<std::uint8_t>(i);

  std::string line;
  if (!std::getline(in, line)) return result;
  if (trim(line) != "ts_ns,instrument,bid_px,ask_px,bid_sz,ask_sz,kind")
    throw IoError("tick CSV: missing or malformed header");

  std::vector<std::int64_t> last_ts(format.universe.size(), std::numeric_limits<std::int64_t>::min());
  bool needs_sort = false;
  while (std::getline(in, line)) {
    auto row = trim(line);
    if (row.empty()) continue;
    auto f = split_csv(row);
    if (f.size() != 7) {
      ++result.malformed_rows;
      continue;
    }
    TickEvent ev;
    const auto inst = InstrumentId::parse(f[1]);
    auto it = index.find(inst);
    if (it == index.end()) throw InvalidArgument("instrument " + inst.code() + " not in universe");
    ev.instrument = it->second;
    const auto kind = trim(f[6]);
    if (!parse_number(f[0], ev.ts_ns) || !parse_number(f[2], ev.bid_px) || !parse_number(f[3], ev.ask_px) ||
        !parse_number(f[4], ev.bid_sz) || !parse_number(f[5], ev.ask_sz) || kind.size() != 1 ||
        ev.bid_sz < 0 || ev.ask_sz < 0 || !std::isfinite(ev.bid_px) || !std::isfinite(ev.ask_px)) {
      ++result.malformed_rows;
      continue;
    }
    switch (kind[0]) {
      case 'T': ev.kind = TickKind::TRADE; break;
      case 'Q': ev.kind = TickKind::QUOTE; break;
      case 'C': ev.kind = TickKind::CANCEL; break;
      default: ++result.malformed_rows; continue;
    }
    auto& last = last_ts[ev.instrument];
    if (ev.ts_ns < last) {
      if (last - ev.ts_ns > format.regression_tolerance_ns)
        throw IoError("tick CSV: timestamp regression of " + std::to_string(last - ev.ts_ns) + " ns for " +
                      inst.code());
      needs_sort = true;
    } else {
      last = ev.ts_ns;
    }
    if (ev.zero_liquidity()) ++result.zero_liquidity_rows;
    result.events.push_back(ev);
  }
  if (needs_sort) {
    std::stable_sort(result.events.begin(), result.events.end(),
                     [](const TickEvent& a, const TickEvent& b) { return a.ts_ns < b.ts_ns; });
  }
  return result;
}

TickLoadResult load_ticks(const std::filesystem::path& path, const TickFormat& format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read tick file " + path.string());
  return parse_ticks(in, format);
}

void write_ticks(const std::filesystem::path& path, std::span<const TickEvent> events,
                 std::span<const InstrumentId> universe) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write tick file " + path.string());
  std::vector<std::string> codes;
  for (const auto& id : universe) codes.push_back(id.code());
  out << "ts_ns,instrument,bid_px,ask_px,bid_sz,ask_sz,kind\n";
  for (const auto& ev : events) {
    const char kind = ev.kind == TickKind::TRADE ? 'T' : ev.kind == TickKind::QUOTE ? 'Q' : 'C';
    out << ev.ts_ns << ',' << codes.at(ev.instrument) << ',' << format_double(ev.bid_px) << ','
        << format_double(ev.ask_px) << ',' << ev.bid_sz << ',' << ev.ask_sz << ',' << kind << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<TickEvent> filter_zero_liquidity(std::span<const TickEvent> stream) {
  std::vector<TickEvent> out;
  out.reserve(stream.size());
  std::copy_if(stream.begin(), stream.end(), std::back_inserter(out),
               [](const TickEvent& ev) { return !ev.zero_liquidity(); });
  return out;
}

double mid_price(double bid, double ask) {
  if (!std::isfinite(bid) || !std::isfinite(ask)) throw InvalidArgument("mid_price: non-finite input");
  return (bid + ask) / 2.0;
}

double spread_bp(double bid, double ask) {
  const double mid = mid_price(bid, ask);
  if (mid <= 0.0) throw InvalidArgument("spread_bp: non-positive mid");
  return 10000.0 * (ask - bid) / mid;
}

std::size_t PanelSeries::index_of(const InstrumentId& id) const {
  auto it = std::find(universe.begin(), universe.end(), id);
  if (it == universe.end()) throw InvalidArgument("instrument " + id.code() + " not in panel");
  return static_cast<std::size_t>(it - universe.begin());
}

std::int64_t PanelSeries::minute_of(std::int64_t ts_ns) const {
  const std::int64_t d = ts_ns - start_ns;
  return d >= 0 ? d / kNanosPerMinute : -((-d + kNanosPerMinute - 1) / kNanosPerMinute);
}

PanelSeries build_panel(std::span<const TickEvent> stream, std::span<const InstrumentId> universe,
                        const GridConfig& grid) {
  if (universe.empty()) throw InvalidArgument("build_panel: empty universe");
  PanelSeries panel;
  panel.universe.assign(universe.begin(), universe.end());

  std::size_t n = grid.n_minutes;
  panel.start_ns = grid.start_ns;
  if (grid.derive_from_stream) {
    if (stream.empty()) {
      n = 0;
    } else {
      auto [lo, hi] = std::minmax_element(stream.begin(), stream.end(),
                                          [](const TickEvent& a, const TickEvent& b) { return a.ts_ns < b.ts_ns; });
      panel.start_ns = (lo->ts_ns / kNanosPerMinute) * kNanosPerMinute;
      n = static_cast<std::size_t>((hi->ts_ns - panel.start_ns) / kNanosPerMinute) + 1;
    }
  }
  panel.minute_ts.resize(n);
  for (std::size_t i = 0; i < n; ++i) panel.minute_ts[i] = panel.start_ns + static_cast<std::int64_t>(i) * kNanosPerMinute;

  const std::size_t n_inst = universe.size();
  panel.series.resize(n_inst);
  // Last quote per minute, filled densely afterwards.
  std::vector<std::vector<std::int64_t>> last_event(n_inst, std::vector<std::int64_t>(n, -1));
  for (auto& s : panel.series) {
    s.mid.assign(n, kMissing);
    s.trade_count.assign(n, 0);
    s.valid.assign(n, 0);
    s.spread_bp.assign(n, kMissing);
    s.min_size.assign(n, 0);
  }
  for (std::size_t e = 0; e < stream.size(); ++e) {
    const auto& ev = stream[e];
    if (ev.instrument >= n_inst) throw InvalidArgument("build_panel: event instrument outside universe");
    const auto m = panel.minute_of(ev.ts_ns);
    if (m < 0 || m >= static_cast<std::int64_t>(n)) continue;
    auto& s = panel.series[ev.instrument];
    if (ev.kind == TickKind::TRADE) ++s.trade_count[static_cast<std::size_t>(m)];
    auto& slot = last_event[ev.instrument][static_cast<std::size_t>(m)];
    if (slot < 0 || stream[static_cast<std::size_t>(slot)].ts_ns <= ev.ts_ns) slot = static_cast<std::int64_t>(e);
  }
  for (std::size_t i = 0; i < n_inst; ++i) {
    auto& s = panel.series[i];
    std::int64_t last_minute = -1;
    double mid = kMissing, spread = kMissing;
    std::int32_t size = 0;
    for (std::size_t m = 0; m < n; ++m) {
      if (const auto e = last_event[i][m]; e >= 0) {
        const auto& ev = stream[static_cast<std::size_t>(e)];
        mid = mid_price(ev.bid_px, ev.ask_px);
        spread = mid > 0.0 ? spread_bp(ev.bid_px, ev.ask_px) : kMissing;
        size = std::min(ev.bid_sz, ev.ask_sz);
        last_minute = static_cast<std::int64_t>(m);
      }
      if (last_minute < 0 || static_cast<std::int64_t>(m) - last_minute > grid.ffill_limit_minutes) continue;
      s.mid[m] = mid;
      s.spread_bp[m] = spread;
      s.min_size[m] = size;
      s.valid[m] = std::isfinite(mid) && mid > 0.0 ? 1 : 0;
      if (!s.valid[m]) s.mid[m] = kMissing;
    }
    for (auto t : grid.roll_times_ns) {
      const auto m = panel.minute_of(t);
      if (m >= 0 && m < static_cast<std::int64_t>(n)) s.splice_minutes.push_back(static_cast<std::size_t>(m));
    }
  }
  return panel;
}

void export_panel(const PanelSeries& panel, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < panel.universe.size(); ++i) {
    const auto path = dir / ("panel_" + panel.universe[i].code() + ".csv");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    const auto& s = panel.series[i];
    out << "minute_ts,mid,trade_count,valid\n";
    for (std::size_t m = 0; m < panel.n_minutes(); ++m)
      out << panel.minute_ts[m] << ',' << format_double(s.mid[m]) << ',' << s.trade_count[m] << ','
          << int(s.valid[m]) << '\n';
  }
}

}  // namespace termnet
