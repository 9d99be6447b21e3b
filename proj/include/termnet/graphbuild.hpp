#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "termnet/common.hpp"
#include "termnet/features.hpp"
#include "termnet/marketdata.hpp"

namespace termnet {

struct SpearmanResult {
  double value = 0.0;
  bool defined = false;  // false when fewer than 3 pairs or zero rank variance; value is then 0
  std::size_t n_pairs = 0;
};

/// Spearman correlation over the finite pairs of x and y; ties share their average rank.
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

/// Average ranks (1-based) of a sample.
std::vector<double> average_ranks(std::span<const double> x);

enum class GraphVariant : std::uint8_t { WEIGHTED, UNWEIGHTED };
enum class Normalization : std::uint8_t { ROW, COLUMN };

struct GraphConfig {
  int knn_k = 3;
  int lag = 0;  // hours; 0 contemporaneous, 1 lagged
  GraphVariant variant = GraphVariant::WEIGHTED;
  Quantity source = Quantity::RETURN;
  Quantity destination = Quantity::RETURN;
  Normalization normalization = Normalization::ROW;

  void validate() const;
  /// e.g. "RETURN-VOLATILITY_lagged_unweighted".
  std::string name() const;
};

struct CorrelationMatrix {
  RowMatrix values;                   // undefined entries hold 0
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> defined;
};

/// Entry (i,j) = spearman(source of node i at t - lag, destination of node j at t) over `rows`.
CorrelationMatrix pair_correlation_matrix(const TargetSet& targets, const GraphConfig& cfg,
                                          std::span<const std::size_t> rows);

struct SignedGraph {
  std::vector<InstrumentId> nodes;
  RowMatrix adjacency;
  std::vector<int> degree;
  GraphConfig config;
  std::array<double, 5> correlation_quantiles{};
};

SignedGraph weighted_adjacency(const CorrelationMatrix& c, std::span<const InstrumentId> nodes,
                               Normalization normalization = Normalization::ROW);
SignedGraph unweighted_adjacency(const CorrelationMatrix& c, std::span<const InstrumentId> nodes, int k);

/// Nonzero count per row, diagonal included.
std::vector<int> degree_vector(const RowMatrix& adjacency);

/// Builds correlation + adjacency for one configuration.
SignedGraph build_graph(const TargetSet& targets, std::span<const InstrumentId> nodes, const GraphConfig& cfg,
                        std::span<const std::size_t> rows);

struct GraphStats {
  std::string name;
  int positive_edges = 0;
  int negative_edges = 0;
  int max_positive_out = 0;
  std::string max_positive_node;  // empty when there are no positive edges
  int max_negative_out = 0;
  std::string max_negative_node;
  int spx_to_spx = 0, spx_to_vix = 0, vix_to_spx = 0, vix_to_vix = 0;
  std::array<double, 5> quantiles{};
};

/// Edge summary; nodes are clustered by InstrumentId::in_spx_cluster.
GraphStats graph_stats(const SignedGraph& g);

enum class ChannelSubset : std::uint8_t {
  ALL,
  CONTEMPORANEOUS_WEIGHTED,
  CONTEMPORANEOUS_UNWEIGHTED,
  LAGGED_WEIGHTED,
  LAGGED_UNWEIGHTED,
};

std::string channel_subset_name(ChannelSubset s);
ChannelSubset parse_channel_subset(std::string_view s);

/// For task q: pairs (RETURN,q), (VOLATILITY,q), (VOLUME,q), each in the variants
/// contemporaneous-weighted, contemporaneous-unweighted, lagged-weighted, lagged-unweighted.
std::vector<GraphConfig> channel_configs(Quantity task, ChannelSubset subset = ChannelSubset::ALL, int knn_k = 3,
                                         Normalization normalization = Normalization::ROW);

std::vector<SignedGraph> build_channel_set(const TargetSet& targets, std::span<const InstrumentId> nodes,
                                           Quantity task, std::span<const std::size_t> rows,
                                           ChannelSubset subset = ChannelSubset::ALL, int knn_k = 3);

enum class GraphFormat : std::uint8_t { DOT, JSON, CSV };

void export_graph(const SignedGraph& g, GraphFormat format, const std::filesystem::path& path);
std::string graph_to_dot(const SignedGraph& g);
std::string graph_to_json(const SignedGraph& g);
SignedGraph graph_from_json(const std::string& text);

void write_graph_stats_csv(std::span<const GraphStats> stats, const std::filesystem::path& path);

/// Content hash of node order and adjacency bits.
std::string graph_hash(const SignedGraph& g);

}  // namespace termnet
