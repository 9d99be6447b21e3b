#include "termnet/graphbuild.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace termnet {

using nlohmann::json;

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("spearman: length mismatch");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isfinite(x[i]) && std::isfinite(y[i])) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
  }
  SpearmanResult out;
  out.n_pairs = xs.size();
  if (xs.size() < 3) return out;
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx, dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return out;
  out.value = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  out.defined = true;
  return out;
}

void GraphConfig::validate() const {
  if (knn_k < 1) throw InvalidArgument("GraphConfig: knn_k must be >= 1");
  if (lag != 0 && lag != 1) throw InvalidArgument("GraphConfig: lag must be 0 or 1");
}

std::string GraphConfig::name() const {
  return quantity_name(source) + "-" + quantity_name(destination) + (lag == 0 ? "_contemporaneous" : "_lagged") +
         (variant == GraphVariant::WEIGHTED ? "_weighted" : "_unweighted");
}

CorrelationMatrix pair_correlation_matrix(const TargetSet& targets, const GraphConfig& cfg,
                                          std::span<const std::size_t> rows) {
  cfg.validate();
  const std::size_t n = targets.ret.size();
  CorrelationMatrix c;
  c.values = RowMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  c.defined.setZero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const auto lag = static_cast<std::size_t>(cfg.lag);
  std::vector<std::vector<double>> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& src = targets.series(i, cfg.source);
    const auto& dst = targets.series(i, cfg.destination);
    for (auto r : rows) {
      if (r < lag) continue;
      xs[i].push_back(src.at(r - lag));
      ys[i].push_back(dst.at(r));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto s = spearman(xs[i], ys[j]);
      c.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s.defined ? s.value : 0.0;
      c.defined(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s.defined ? 1 : 0;
    }
  }
  return c;
}

namespace {

std::array<double, 5> offdiag_quantiles(const CorrelationMatrix& c) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < c.values.rows(); ++i)
    for (Eigen::Index j = 0; j < c.values.cols(); ++j)
      if (i != j && c.defined(i, j)) v.push_back(c.values(i, j));
  std::array<double, 5> q{};
  for (std::size_t k = 0; k < 5; ++k) q[k] = quantile(v, 0.25 * static_cast<double>(k));
  return q;
}

void check_square(const CorrelationMatrix& c, std::size_t n_nodes) {
  if (c.values.rows() != c.values.cols() || static_cast<std::size_t>(c.values.rows()) != n_nodes ||
      c.defined.rows() != c.values.rows() || c.defined.cols() != c.values.cols())
    throw InvalidArgument("adjacency: correlation matrix does not match node list");
}

}  // namespace

std::vector<int> degree_vector(const RowMatrix& adjacency) {
  std::vector<int> d(static_cast<std::size_t>(adjacency.rows()), 0);
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i)
    for (Eigen::Index j = 0; j < adjacency.cols(); ++j)
      if (adjacency(i, j) != 0.0) ++d[static_cast<std::size_t>(i)];
  return d;
}

SignedGraph weighted_adjacency(const CorrelationMatrix& c, std::span<const InstrumentId> nodes,
                               Normalization normalization) {
  check_square(c, nodes.size());
  const Eigen::Index n = c.values.rows();
  SignedGraph g;
  g.nodes.assign(nodes.begin(), nodes.end());
  g.adjacency = RowMatrix::Identity(n, n);
  auto entry = [&](Eigen::Index i, Eigen::Index j) { return c.defined(i, j) ? c.values(i, j) : 0.0; };
  const bool by_row = normalization == Normalization::ROW;
  for (Eigen::Index a = 0; a < n; ++a) {
    double pos = 0.0, neg = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
      if (a == b) continue;
      const double v = by_row ? entry(a, b) : entry(b, a);
      if (v > 0.0) pos += v;
      if (v < 0.0) neg -= v;
    }
    for (Eigen::Index b = 0; b < n; ++b) {
      if (a == b) continue;
      const auto i = by_row ? a : b, j = by_row ? b : a;
      const double v = entry(i, j);
      if (v > 0.0) g.adjacency(i, j) = v / pos;
      if (v < 0.0) g.adjacency(i, j) = v / neg;
    }
  }
  g.degree = degree_vector(g.adjacency);
  g.config.variant = GraphVariant::WEIGHTED;
  g.config.normalization = normalization;
  g.correlation_quantiles = offdiag_quantiles(c);
  return g;
}

SignedGraph unweighted_adjacency(const CorrelationMatrix& c, std::span<const InstrumentId> nodes, int k) {
  check_square(c, nodes.size());
  if (k < 1) throw InvalidArgument("unweighted_adjacency: K must be >= 1");
  const Eigen::Index n = c.values.rows();
  SignedGraph g;
  g.nodes.assign(nodes.begin(), nodes.end());
  g.adjacency = RowMatrix::Identity(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    std::vector<Eigen::Index> cand;
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != j && c.defined(i, j) && c.values(i, j) != 0.0) cand.push_back(i);
    // Largest |C| first; equal magnitudes resolved by lower node index.
    std::stable_sort(cand.begin(), cand.end(), [&](Eigen::Index a, Eigen::Index b) {
      return std::abs(c.values(a, j)) > std::abs(c.values(b, j));
    });
    const auto take = std::min(cand.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < take; ++r) {
      const auto i = cand[r];
      g.adjacency(i, j) = c.values(i, j) > 0.0 ? 1.0 : -1.0;
    }
  }
  g.degree = degree_vector(g.adjacency);
  g.config.variant = GraphVariant::UNWEIGHTED;
  g.config.knn_k = k;
  g.correlation_quantiles = offdiag_quantiles(c);
  return g;
}

SignedGraph build_graph(const TargetSet& targets, std::span<const InstrumentId> nodes, const GraphConfig& cfg,
                        std::span<const std::size_t> rows) {
  const auto c = pair_correlation_matrix(targets, cfg, rows);
  SignedGraph g = cfg.variant == GraphVariant::WEIGHTED ? weighted_adjacency(c, nodes, cfg.normalization)
                                                        : unweighted_adjacency(c, nodes, cfg.knn_k);
  g.config = cfg;
  return g;
}

GraphStats graph_stats(const SignedGraph& g) {
  GraphStats s;
  s.name = g.config.name();
  s.quantiles = g.correlation_quantiles;
  const auto n = g.adjacency.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    int pos = 0, neg = 0;
    const bool from_spx = g.nodes[static_cast<std::size_t>(i)].in_spx_cluster();
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = g.adjacency(i, j);
      if (i == j || a == 0.0) continue;
      (a > 0.0 ? pos : neg) += 1;
      const bool to_spx = g.nodes[static_cast<std::size_t>(j)].in_spx_cluster();
      if (from_spx && to_spx) ++s.spx_to_spx;
      if (from_spx && !to_spx) ++s.spx_to_vix;
      if (!from_spx && to_spx) ++s.vix_to_spx;
      if (!from_spx && !to_spx) ++s.vix_to_vix;
    }
    s.positive_edges += pos;
    s.negative_edges += neg;
    if (pos > s.max_positive_out) {
      s.max_positive_out = pos;
      s.max_positive_node = g.nodes[static_cast<std::size_t>(i)].code();
    }
    if (neg > s.max_negative_out) {
      s.max_negative_out = neg;
      s.max_negative_node = g.nodes[static_cast<std::size_t>(i)].code();
    }
  }
  return s;
}

std::string channel_subset_name(ChannelSubset s) {
  switch (s) {
    case ChannelSubset::ALL: return "all";
    case ChannelSubset::CONTEMPORANEOUS_WEIGHTED: return "contemporaneous_weighted";
    case ChannelSubset::CONTEMPORANEOUS_UNWEIGHTED: return "contemporaneous_unweighted";
    case ChannelSubset::LAGGED_WEIGHTED: return "lagged_weighted";
    case ChannelSubset::LAGGED_UNWEIGHTED: return "lagged_unweighted";
  }
  return "?";
}

ChannelSubset parse_channel_subset(std::string_view s) {
  for (auto c : {ChannelSubset::ALL, ChannelSubset::CONTEMPORANEOUS_WEIGHTED, ChannelSubset::CONTEMPORANEOUS_UNWEIGHTED,
                 ChannelSubset::LAGGED_WEIGHTED, ChannelSubset::LAGGED_UNWEIGHTED})
    if (channel_subset_name(c) == s) return c;
  throw InvalidArgument("unknown channel subset '" + std::string(s) + "'");
}

std::vector<GraphConfig> channel_configs(Quantity task, ChannelSubset subset, int knn_k, Normalization normalization) {
  struct Variant {
    int lag;
    GraphVariant kind;
    ChannelSubset subset;
  };
  static constexpr Variant kVariants[] = {
      {0, GraphVariant::WEIGHTED, ChannelSubset::CONTEMPORANEOUS_WEIGHTED},
      {0, GraphVariant::UNWEIGHTED, ChannelSubset::CONTEMPORANEOUS_UNWEIGHTED},
      {1, GraphVariant::WEIGHTED, ChannelSubset::LAGGED_WEIGHTED},
      {1, GraphVariant::UNWEIGHTED, ChannelSubset::LAGGED_UNWEIGHTED},
  };
  std::vector<GraphConfig> out;
  for (auto src : {Quantity::RETURN, Quantity::VOLATILITY, Quantity::VOLUME}) {
    for (const auto& v : kVariants) {
      if (subset != ChannelSubset::ALL && subset != v.subset) continue;
      GraphConfig cfg;
      cfg.knn_k = knn_k;
      cfg.lag = v.lag;
      cfg.variant = v.kind;
      cfg.source = src;
      cfg.destination = task;
      cfg.normalization = normalization;
      out.push_back(cfg);
    }
  }
  return out;
}

std::vector<SignedGraph> build_channel_set(const TargetSet& targets, std::span<const InstrumentId> nodes,
                                           Quantity task, std::span<const std::size_t> rows, ChannelSubset subset,
                                           int knn_k) {
  std::vector<SignedGraph> out;
  for (const auto& cfg : channel_configs(task, subset, knn_k)) out.push_back(build_graph(targets, nodes, cfg, rows));
  return out;
}

std::string graph_to_dot(const SignedGraph& g) {
  std::ostringstream out;
  out << "digraph \"" << g.config.name() << "\" {\n";
  for (const auto& node : g.nodes) out << "  \"" << node.code() << "\";\n";
  for (Eigen::Index i = 0; i < g.adjacency.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.adjacency.cols(); ++j) {
      const double a = g.adjacency(i, j);
      if (i == j || a == 0.0) continue;
      out << "  \"" << g.nodes[static_cast<std::size_t>(i)].code() << "\" -> \""
          << g.nodes[static_cast<std::size_t>(j)].code() << "\" [color=" << (a > 0.0 ? "green" : "red")
          << ", label=\"" << format_double(a) << "\"];\n";
    }
  }
  out << "}\n";
  return out.str();
}

namespace {

json config_json(const GraphConfig& c) {
  return {{"knn_k", c.knn_k},
          {"lag", c.lag},
          {"variant", c.variant == GraphVariant::WEIGHTED ? "WEIGHTED" : "UNWEIGHTED"},
          {"source", quantity_name(c.source)},
          {"destination", quantity_name(c.destination)},
          {"normalization", c.normalization == Normalization::ROW ? "ROW" : "COLUMN"}};
}

}  // namespace

std::string graph_to_json(const SignedGraph& g) {
  json j;
  j["name"] = g.config.name();
  j["config"] = config_json(g.config);
  json nodes = json::array();
  for (const auto& n : g.nodes) nodes.push_back(n.code());
  j["nodes"] = nodes;
  json adj = json::array();
  for (Eigen::Index i = 0; i < g.adjacency.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < g.adjacency.cols(); ++k) row.push_back(g.adjacency(i, k));
    adj.push_back(row);
  }
  j["adjacency"] = adj;
  j["degree"] = g.degree;
  j["correlation_quantiles"] = g.correlation_quantiles;
  return j.dump(2);
}

SignedGraph graph_from_json(const std::string& text) {
  const auto j = json::parse(text);
  SignedGraph g;
  for (const auto& code : j.at("nodes")) g.nodes.push_back(InstrumentId::parse(code.get<std::string>()));
  const auto n = static_cast<Eigen::Index>(g.nodes.size());
  g.adjacency.resize(n, n);
  const auto& adj = j.at("adjacency");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      g.adjacency(i, k) = adj.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
  g.degree = j.at("degree").get<std::vector<int>>();
  const auto& c = j.at("config");
  g.config.knn_k = c.at("knn_k").get<int>();
  g.config.lag = c.at("lag").get<int>();
  g.config.variant = c.at("variant").get<std::string>() == "WEIGHTED" ? GraphVariant::WEIGHTED : GraphVariant::UNWEIGHTED;
  g.config.source = parse_quantity(c.at("source").get<std::string>());
  g.config.destination = parse_quantity(c.at("destination").get<std::string>());
  g.config.normalization = c.at("normalization").get<std::string>() == "ROW" ? Normalization::ROW : Normalization::COLUMN;
  g.correlation_quantiles = j.at("correlation_quantiles").get<std::array<double, 5>>();
  return g;
}

void export_graph(const SignedGraph& g, GraphFormat format, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write graph to " + path.string());
  switch (format) {
    case GraphFormat::DOT: out << graph_to_dot(g); break;
    case GraphFormat::JSON: out << graph_to_json(g) << '\n'; break;
    case GraphFormat::CSV: {
      out << "source";
      for (const auto& n : g.nodes) out << ',' << n.code();
      out << '\n';
      for (Eigen::Index i = 0; i < g.adjacency.rows(); ++i) {
        out << g.nodes[static_cast<std::size_t>(i)].code();
        for (Eigen::Index j = 0; j < g.adjacency.cols(); ++j) out << ',' << format_double(g.adjacency(i, j));
        out << '\n';
      }
      break;
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
  const GraphStats stats[] = {graph_stats(g)};
  auto stats_path = path;
  stats_path += ".stats.csv";
  write_graph_stats_csv(stats, stats_path);
}

void write_graph_stats_csv(std::span<const GraphStats> stats, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "graph,positive_edges,negative_edges,max_positive_out,max_positive_node,max_negative_out,max_negative_node,"
         "spx_to_spx,spx_to_vix,vix_to_spx,vix_to_vix,q0,q25,q50,q75,q100\n";
  for (const auto& s : stats) {
    out << s.name << ',' << s.positive_edges << ',' << s.negative_edges << ',' << s.max_positive_out << ','
        << (s.max_positive_node.empty() ? "NA" : s.max_positive_node) << ',' << s.max_negative_out << ','
        << (s.max_negative_node.empty() ? "NA" : s.max_negative_node) << ',' << s.spx_to_spx << ',' << s.spx_to_vix
        << ',' << s.vix_to_spx << ',' << s.vix_to_vix;
    for (double q : s.quantiles) out << ',' << format_double(q);
    out << '\n';
  }
}

std::string graph_hash(const SignedGraph& g) {
  Fnv1a h;
  for (const auto& n : g.nodes) h.update(n.code());
  h.update(g.adjacency.data(), static_cast<std::size_t>(g.adjacency.size()) * sizeof(double));
  return h.hex();
}

}  // namespace termnet
