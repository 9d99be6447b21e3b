#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "helpers.hpp"
#include "termnet/marketdata.hpp"

using namespace termnet;

namespace {
const char* kHeader = "ts_ns,instrument,bid_px,ask_px,bid_sz,ask_sz,kind\n";
}

TEST_CASE("instrument codes round-trip") {
  for (const auto& id : canonical_universe()) CHECK(InstrumentId::parse(id.code()) == id);
  CHECK(canonical_universe().size() == 14);
  CHECK(InstrumentId::parse("VX_8").tenor_rank == 8);
  CHECK_FALSE(InstrumentId::parse("SPX").has_volume());
  CHECK_THROWS_AS(InstrumentId::parse("NQ_1"), InvalidArgument);
}

TEST_CASE("parse_ticks reads a quote row") {
  std::istringstream in(std::string(kHeader) + "1000,ES_1,4000.25,4000.50,10,12,Q\n");
  const auto r = parse_ticks(in);
  REQUIRE(r.events.size() == 1);
  const auto& ev = r.events[0];
  CHECK(ev.ts_ns == 1000);
  CHECK(ev.kind == TickKind::QUOTE);
  CHECK(ev.bid_px == 4000.25);
  CHECK(ev.ask_px == 4000.50);
  CHECK(ev.bid_sz == 10);
  CHECK(ev.ask_sz == 12);
  CHECK(ev.instrument == 0);
  CHECK(r.malformed_rows == 0);
}

TEST_CASE("zero-size rows are kept and counted") {
  std::istringstream in(std::string(kHeader) + "1000,ES_1,4000.25,4000.50,0,12,Q\n2000,VX_1,20,20.05,3,3,T\n");
  const auto r = parse_ticks(in);
  REQUIRE(r.events.size() == 2);
  CHECK(r.zero_liquidity_rows == 1);
  CHECK(r.events[0].zero_liquidity());
  CHECK(r.events[1].kind == TickKind::TRADE);
}

TEST_CASE("empty input gives an empty stream") {
  std::istringstream in("");
  const auto r = parse_ticks(in);
  CHECK(r.events.empty());
  CHECK(r.malformed_rows == 0);
}

TEST_CASE("bad header and malformed rows") {
  std::istringstream bad("ts,inst\n1,ES_1\n");
  CHECK_THROWS_AS(parse_ticks(bad), IoError);
  std::istringstream in(std::string(kHeader) + "1000,ES_1,abc,1,1,1,Q\n1000,ES_1,1,2,1\n1000,ES_1,1,2,1,1,X\n" +
                        "1000,ES_1,1,2,-1,1,Q\n1000,ES_1,1,2,1,1,Q\n");
  const auto r = parse_ticks(in);
  CHECK(r.events.size() == 1);
  CHECK(r.malformed_rows == 4);
}

TEST_CASE("small timestamp regressions are re-sorted, large ones rejected") {
  std::istringstream small(std::string(kHeader) + "5000,ES_1,1,2,1,1,Q\n4000,ES_1,1,2,1,1,T\n");
  const auto r = parse_ticks(small);
  REQUIRE(r.events.size() == 2);
  CHECK(r.events[0].ts_ns == 4000);
  CHECK(r.events[1].ts_ns == 5000);
  std::istringstream big(std::string(kHeader) + "5000000000,ES_1,1,2,1,1,Q\n1000,ES_1,1,2,1,1,T\n");
  CHECK_THROWS_AS(parse_ticks(big), IoError);
}

TEST_CASE("write then load reproduces the stream") {
  const auto dir = std::filesystem::temp_directory_path() / "termnet_md_roundtrip";
  std::filesystem::create_directories(dir);
  std::vector<TickEvent> evs{testing::quote(testing::kStart, 4000.375, 0),
                             testing::quote(testing::kStart + 7, 20.1, 5, 3, TickKind::TRADE),
                             testing::quote(testing::kStart + 9, 3999.9, 13, 1, TickKind::CANCEL)};
  const auto u = canonical_universe();
  write_ticks(dir / "t.csv", evs, u);
  const auto back = load_ticks(dir / "t.csv");
  CHECK(back.events == evs);
  std::filesystem::remove_all(dir);
}

TEST_CASE("filter_zero_liquidity") {
  TickEvent a = testing::quote(1, 100.0);
  a.bid_sz = 0;
  a.ask_sz = 5;
  TickEvent b = testing::quote(2, 100.0);
  b.bid_sz = 3;
  b.ask_sz = 7;
  CHECK(filter_zero_liquidity(std::vector{a}).empty());
  CHECK(filter_zero_liquidity(std::vector{b}).size() == 1);

  std::vector<TickEvent> many;
  int expected = 0;
  for (int i = 0; i < 100; ++i) {
    TickEvent ev = testing::quote(i, 100.0);
    if (i % 5 < 2) {
      (i % 2 ? ev.bid_sz : ev.ask_sz) = 0;
    } else {
      ++expected;
    }
    many.push_back(ev);
  }
  CHECK(expected == 60);
  CHECK(filter_zero_liquidity(many).size() == 60);
}

TEST_CASE("mid and spread arithmetic") {
  CHECK(mid_price(100, 102) == 101);
  CHECK(mid_price(4000.25, 4000.50) == 4000.375);
  for (double x : {0.5, 17.25, 4000.0}) CHECK(mid_price(x, x) == x);
  CHECK(spread_bp(100, 100.15) == doctest::Approx(10000.0 * 0.15 / 100.075).epsilon(1e-12));
  CHECK(spread_bp(100, 100.15) == doctest::Approx(14.989).epsilon(1e-4));
  CHECK(spread_bp(100, 100) == 0.0);
  CHECK(spread_bp(50, 50.25) == doctest::Approx(49.875).epsilon(1e-4));
}

TEST_CASE("build_panel keeps the last observation of each minute") {
  const std::vector<InstrumentId> u{{InstrumentClass::ES, 1}};
  const auto m = kNanosPerMinute;
  std::vector<TickEvent> evs{testing::quote(testing::kStart + 10'000'000'000LL, 100.0),
                             testing::quote(testing::kStart + 30'000'000'000LL, 101.0),
                             testing::quote(testing::kStart + m + 5, 99.0, 0, 5, TickKind::TRADE),
                             testing::quote(testing::kStart + m + 6, 99.0, 0, 5, TickKind::TRADE),
                             testing::quote(testing::kStart + m + 7, 99.5, 0, 5, TickKind::TRADE)};
  const auto p = build_panel(evs, u);
  REQUIRE(p.n_minutes() == 2);
  CHECK(p.series[0].mid[0] == 101.0);
  CHECK(p.series[0].trade_count[0] == 0);
  CHECK(p.series[0].trade_count[1] == 3);
  CHECK(p.series[0].mid[1] == 99.5);
}

TEST_CASE("minutes before an instrument's first tick are invalid") {
  const std::vector<InstrumentId> u{{InstrumentClass::ES, 1}, {InstrumentClass::VX, 1}};
  const auto m = kNanosPerMinute;
  std::vector<TickEvent> evs;
  for (int i = 0; i < 120; ++i) evs.push_back(testing::quote(testing::kStart + i * m, 4000.0, 0));
  evs.push_back(testing::quote(testing::kStart + 60 * m, 20.0, 1));
  std::stable_sort(evs.begin(), evs.end(), [](auto& a, auto& b) { return a.ts_ns < b.ts_ns; });
  const auto p = build_panel(evs, u);
  for (int i = 0; i < 60; ++i) CHECK_FALSE(p.series[1].valid[i]);
  for (int i = 60; i < 120; ++i) CHECK(p.series[1].valid[i]);
}

TEST_CASE("forward fill stops after the limit") {
  const std::vector<InstrumentId> u{{InstrumentClass::ES, 1}, {InstrumentClass::VX, 1}};
  const auto m = kNanosPerMinute;
  std::vector<TickEvent> evs{testing::quote(testing::kStart, 20.0, 1)};
  for (int i = 0; i < 200; ++i) evs.push_back(testing::quote(testing::kStart + i * m + 1, 4000.0, 0));
  GridConfig g;
  g.ffill_limit_minutes = 120;
  const auto p = build_panel(evs, u, g);
  CHECK(p.series[1].valid[120]);
  CHECK(p.series[1].mid[120] == 20.0);
  CHECK_FALSE(p.series[1].valid[121]);
}

TEST_CASE("explicit grid and roll splices") {
  const std::vector<InstrumentId> u{{InstrumentClass::ES, 1}};
  GridConfig g;
  g.derive_from_stream = false;
  g.start_ns = testing::kStart;
  g.n_minutes = 10;
  g.roll_times_ns = {testing::kStart + 3 * kNanosPerMinute + 1};
  const auto p = build_panel(testing::mid_path({1, 2, 3}), u, g);
  CHECK(p.n_minutes() == 10);
  CHECK(p.series[0].splice_minutes == std::vector<std::size_t>{3});
  CHECK(p.minute_of(testing::kStart - 1) == -1);
}
