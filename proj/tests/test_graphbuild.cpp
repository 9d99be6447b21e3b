#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "termnet/graphbuild.hpp"

using namespace termnet;

namespace {

CorrelationMatrix from_rows(const std::vector<std::vector<double>>& rows) {
  CorrelationMatrix c;
  const auto n = static_cast<Eigen::Index>(rows.size());
  c.values.resize(n, n);
  c.defined.setOnes(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) c.values(i, j) = rows[i][j];
  return c;
}

std::vector<InstrumentId> first_nodes(std::size_t n) {
  auto u = canonical_universe();
  u.resize(n);
  return u;
}

int off_diagonal_edges(const RowMatrix& a) {
  int e = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) e += i != j && a(i, j) != 0.0;
  return e;
}

}  // namespace

TEST_CASE("spearman basics") {
  std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 8, 16, 32}, ny{-2, -4, -8, -16, -32};
  CHECK(spearman(x, y).value == 1.0);
  CHECK(spearman(x, ny).value == -1.0);
  std::vector<double> a{1, 2, 2, 4}, b{10, 20, 30, 40};
  CHECK(spearman(a, b).value == doctest::Approx(oracle::spearman(a, b)).epsilon(1e-12));
  CHECK(average_ranks(a) == std::vector<double>{1, 2.5, 2.5, 4});
  CHECK_FALSE(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}).defined);
  CHECK_FALSE(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}).defined);
  std::vector<double> m{1, kMissing, 3, 4}, n{5, 6, kMissing, 8};
  CHECK(spearman(m, n).n_pairs == 2);
}

TEST_CASE("spearman against the counting oracle") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(3, 50), val(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = len(rng);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) x[i] = val(rng), y[i] = val(rng);
    const auto s = spearman(x, y);
    if (!s.defined) continue;
    CHECK(std::abs(s.value - oracle::spearman(x, y)) <= 1e-12);
  }
}

TEST_CASE("weighted adjacency normalization") {
  const auto nodes = first_nodes(4);
  auto g = weighted_adjacency(from_rows({{1, 0.6, 0.2, 0.2}, {0.9, 1, 0.3, -0.4}, {0, 0, 1, 0}, {0.2, 0.2, 0.2, 1}}),
                              nodes);
  CHECK(g.adjacency(0, 1) == doctest::Approx(0.6));
  CHECK(g.adjacency(0, 2) == doctest::Approx(0.2));
  CHECK(g.adjacency(1, 0) == doctest::Approx(0.75));
  CHECK(g.adjacency(1, 2) == doctest::Approx(0.25));
  CHECK(g.adjacency(1, 3) == -1.0);
  CHECK(g.adjacency.row(2) == RowMatrix::Identity(4, 4).row(2));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(g.adjacency(i, i) == 1.0);

  // Column normalization is the row rule applied to the transpose.
  std::mt19937_64 rng(9);
  auto c = oracle::random_correlation(6, rng);
  c.values(1, 4) = -0.3;  // make it asymmetric
  const auto row = weighted_adjacency(c, first_nodes(6), Normalization::ROW);
  CorrelationMatrix ct = c;
  ct.values = c.values.transpose();
  const auto col = weighted_adjacency(ct, first_nodes(6), Normalization::COLUMN);
  CHECK((row.adjacency - col.adjacency.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("weighted rows carry unit positive and negative mass") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = oracle::random_correlation(14, rng);
    const auto g = weighted_adjacency(c, canonical_universe());
    for (Eigen::Index i = 0; i < 14; ++i) {
      double pos = 0, neg = 0;
      bool any_pos = false, any_neg = false;
      for (Eigen::Index j = 0; j < 14; ++j) {
        if (i == j) continue;
        const double a = g.adjacency(i, j);
        if (a > 0) pos += a, any_pos = true;
        if (a < 0) neg += a, any_neg = true;
        CHECK((a > 0) == (c.values(i, j) > 0));
        CHECK((a < 0) == (c.values(i, j) < 0));
      }
      if (any_pos) CHECK(std::abs(pos - 1.0) <= 1e-12);
      if (any_neg) CHECK(std::abs(neg + 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("unweighted adjacency picks K neighbours per column") {
  std::mt19937_64 rng(5);
  const auto c = oracle::random_correlation(14, rng);
  CorrelationMatrix dense = c;
  for (Eigen::Index i = 0; i < 14; ++i)
    for (Eigen::Index j = 0; j < 14; ++j)
      if (i != j && dense.values(i, j) == 0.0) dense.values(i, j) = 0.05;
  const auto g = unweighted_adjacency(dense, canonical_universe(), 3);
  CHECK(off_diagonal_edges(g.adjacency) == 42);
  for (Eigen::Index j = 0; j < 14; ++j) {
    std::vector<double> mags;
    for (Eigen::Index i = 0; i < 14; ++i)
      if (i != j) mags.push_back(std::abs(dense.values(i, j)));
    std::sort(mags.rbegin(), mags.rend());
    for (Eigen::Index i = 0; i < 14; ++i) {
      if (i == j || g.adjacency(i, j) == 0.0) continue;
      CHECK(std::abs(dense.values(i, j)) >= mags[2]);
      CHECK(g.adjacency(i, j) == (dense.values(i, j) > 0 ? 1.0 : -1.0));
    }
  }

  const auto full = unweighted_adjacency(dense, canonical_universe(), 13);
  CHECK(off_diagonal_edges(full.adjacency) == 14 * 13);

  // Volume pairs: the two indices have no series.
  CorrelationMatrix vol = dense;
  const auto u = canonical_universe();
  for (Eigen::Index i = 0; i < 14; ++i)
    for (Eigen::Index j = 0; j < 14; ++j)
      if (!u[i].has_volume() || !u[j].has_volume()) vol.defined(i, j) = 0, vol.values(i, j) = 0.0;
  CHECK(off_diagonal_edges(unweighted_adjacency(vol, u, 3).adjacency) == 36);
}

TEST_CASE("degree vector") {
  RowMatrix a = RowMatrix::Identity(5, 5);
  a(0, 1) = 1;
  a(0, 2) = -1;
  a(0, 4) = 0.3;
  const auto d = degree_vector(a);
  CHECK(d[0] == 4);
  CHECK(d[3] == 1);
  int total = 0;
  for (int x : d) total += x;
  CHECK(total == int((a.array() != 0.0).count()));
}

TEST_CASE("graph stats") {
  SignedGraph g;
  g.nodes = canonical_universe();
  g.adjacency = RowMatrix::Ones(14, 14);
  auto s = graph_stats(g);
  CHECK(s.positive_edges == 182);
  CHECK(s.negative_edges == 0);
  CHECK(s.spx_to_spx == 5 * 4);
  CHECK(s.vix_to_vix == 9 * 8);
  CHECK(s.spx_to_vix == 45);
  CHECK(s.vix_to_spx == 45);
  g.adjacency = RowMatrix::Identity(14, 14);
  s = graph_stats(g);
  CHECK(s.positive_edges + s.negative_edges + s.spx_to_spx + s.spx_to_vix + s.vix_to_spx + s.vix_to_vix == 0);
  CHECK(s.max_positive_node.empty());
}

TEST_CASE("pair correlation matrix") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  TargetSet t;
  const std::size_t n = 4, rows = 80;
  t.ret.assign(n, std::vector<double>(rows));
  t.log_rv.assign(n, std::vector<double>(rows));
  t.dvol.assign(n, std::vector<double>(rows));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < rows; ++r) t.ret[i][r] = z(rng), t.log_rv[i][r] = z(rng), t.dvol[i][r] = z(rng);
  std::vector<std::size_t> all(rows);
  std::iota(all.begin(), all.end(), 0);
  GraphConfig same;
  const auto c = pair_correlation_matrix(t, same, all);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(c.values(i, i) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK((c.values - c.values.transpose()).cwiseAbs().maxCoeff() == 0.0);
  GraphConfig rv_ret{3, 0, GraphVariant::WEIGHTED, Quantity::RETURN, Quantity::VOLATILITY};
  GraphConfig ret_rv{3, 0, GraphVariant::WEIGHTED, Quantity::VOLATILITY, Quantity::RETURN};
  const auto a = pair_correlation_matrix(t, rv_ret, all);
  const auto b = pair_correlation_matrix(t, ret_rv, all);
  CHECK((a.values - b.values.transpose()).cwiseAbs().maxCoeff() == 0.0);

  // Lag one: entry (i, j) pairs node i at r-1 with node j at r.
  GraphConfig lagged{3, 1};
  const auto l = pair_correlation_matrix(t, lagged, all);
  std::vector<double> x(t.ret[2].begin(), t.ret[2].end() - 1), y(t.ret[0].begin() + 1, t.ret[0].end());
  CHECK(l.values(2, 0) == doctest::Approx(oracle::spearman(x, y)).epsilon(1e-12));
}

TEST_CASE("channel sets") {
  const auto cfgs = channel_configs(Quantity::RETURN);
  REQUIRE(cfgs.size() == 12);
  const Quantity src[] = {Quantity::RETURN, Quantity::VOLATILITY, Quantity::VOLUME};
  for (std::size_t k = 0; k < 12; ++k) {
    CHECK(cfgs[k].source == src[k / 4]);
    CHECK(cfgs[k].destination == Quantity::RETURN);
    CHECK(cfgs[k].lag == int(k % 4 >= 2));
    CHECK(cfgs[k].variant == (k % 2 == 0 ? GraphVariant::WEIGHTED : GraphVariant::UNWEIGHTED));
  }
  const auto sub = channel_configs(Quantity::VOLUME, ChannelSubset::CONTEMPORANEOUS_WEIGHTED);
  CHECK(sub.size() == 3);
  for (const auto& c : sub) CHECK((c.lag == 0 && c.variant == GraphVariant::WEIGHTED));
  CHECK(parse_channel_subset(channel_subset_name(ChannelSubset::LAGGED_UNWEIGHTED)) == ChannelSubset::LAGGED_UNWEIGHTED);
}

TEST_CASE("graph export") {
  SignedGraph g;
  g.nodes = first_nodes(2);
  g.adjacency = RowMatrix::Identity(2, 2);
  g.adjacency(0, 1) = 1.0;
  g.degree = degree_vector(g.adjacency);
  const auto dot = graph_to_dot(g);
  CHECK(dot.find("\"ES_1\" -> \"ES_2\" [color=green") != std::string::npos);
  CHECK(std::count(dot.begin(), dot.end(), '>') == 1);

  std::mt19937_64 rng(4);
  const auto w = weighted_adjacency(oracle::random_correlation(14, rng), canonical_universe());
  const auto back = graph_from_json(graph_to_json(w));
  CHECK(back.adjacency == w.adjacency);
  CHECK(back.nodes == w.nodes);
  CHECK(graph_hash(back) == graph_hash(w));

  const auto dir = std::filesystem::temp_directory_path() / "termnet_graph_export";
  std::filesystem::create_directories(dir);
  export_graph(w, GraphFormat::CSV, dir / "g.csv");
  std::ifstream stats(dir / "g.csv.stats.csv");
  std::string header, line;
  std::getline(stats, header);
  std::getline(stats, line);
  CHECK(line.rfind(graph_stats(w).name + "," + std::to_string(graph_stats(w).positive_edges) + ",", 0) == 0);
  std::filesystem::remove_all(dir);
}
