#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "termnet/autodiff.hpp"
#include "termnet/graphbuild.hpp"

namespace termnet {

enum class Activation : std::uint8_t { TANH, RELU };
/// How the adjacency diagonal enters the propagation matrix D^-1/2 (A +/- I) D^-1/2.
enum class SelfLoopMode : std::uint8_t { SUBTRACT, ADD, NONE };
/// GCN_LSTM is the full model; LSTM drops the graph layer; ANN also replaces the LSTM with the last feature row.
enum class ModelVariant : std::uint8_t { GCN_LSTM, LSTM, ANN };

std::string activation_name(Activation a);
Activation parse_activation(std::string_view s);
std::string self_loop_mode_name(SelfLoopMode m);
SelfLoopMode parse_self_loop_mode(std::string_view s);
std::string model_variant_name(ModelVariant v);
ModelVariant parse_model_variant(std::string_view s);

struct ModelConfig {
  int lstm_units = 64;
  int dense1_units = 32;
  int dense2_units = 16;
  int gcn_out_units = 16;
  int seq_len = 12;
  Activation gcn_activation = Activation::TANH;
  int n_channels = 12;
  bool share_node_weights = false;
  /// Use h_t = c_t * tanh(c_t) instead of o_t * tanh(c_t).
  bool verbatim_hidden_state = false;
  SelfLoopMode self_loop_mode = SelfLoopMode::SUBTRACT;
  /// Propagate with A' instead of A, so that node j aggregates from the nodes i with an edge i -> j.
  bool transpose_adjacency = false;
  ModelVariant variant = ModelVariant::GCN_LSTM;

  void validate() const;
  bool uses_gcn() const { return variant == ModelVariant::GCN_LSTM; }
};

/// One mini-batch: x[node][step] is batch x input_dim, oldest step first.
struct ModelBatch {
  std::vector<std::vector<ad::Tensor>> x;
  std::size_t batch_size() const { return x.empty() || x[0].empty() ? 0 : x[0][0].rows(); }
};

/// D^-1/2 (A +/- I) D^-1/2 with D the graph's nonzero-count degrees. With `transpose`, A' and its
/// row degrees (the in-degrees of A) are used instead.
RowMatrix propagation_matrix(const SignedGraph& g, SelfLoopMode mode, bool transpose = false);

class GcnLstm {
 public:
  GcnLstm(ModelConfig config, std::vector<InstrumentId> nodes, std::size_t input_dim);

  /// Glorot-uniform weights, zero biases, forget-gate bias 1. Deterministic in `seed`.
  void init_params(std::uint64_t seed);
  /// Graph channels in order; required (and exactly n_channels) for the GCN variant.
  void set_graphs(std::span<const SignedGraph> graphs);

  /// Forecasts, batch x N. `skip_only` drops the graph terms from the head.
  ad::Var forward(ad::Tape& tape, const ModelBatch& batch, bool skip_only = false);
  /// Forward without gradient bookkeeping; returns batch x N.
  RowMatrix predict(const ModelBatch& batch, bool skip_only = false);

  // Building blocks, exposed for testing.
  ad::Var lstm_forward(ad::Tape& tape, std::span<const ad::Tensor> x_seq, std::size_t node);
  ad::Var node_module_forward(ad::Tape& tape, std::span<const ad::Tensor> x_seq, std::size_t node);
  /// `h0` is batch x (N*F); returns batch x (N * K*F1) laid out channel-major: block k holds all nodes.
  std::vector<ad::Var> gcn_forward(ad::Tape& tape, ad::Var h0);
  ad::Var head_forward(ad::Tape& tape, std::span<const ad::Var> gcn_channels, ad::Var skips);

  const ModelConfig& config() const { return config_; }
  const std::vector<InstrumentId>& nodes() const { return nodes_; }
  std::size_t n_nodes() const { return nodes_.size(); }
  std::size_t input_dim() const { return input_dim_; }
  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }
  const std::vector<RowMatrix>& propagation() const { return propagation_; }
  const std::vector<std::string>& graph_hashes() const { return graph_hashes_; }

  /// Prefix of a node's module parameters ("node/" when shared).
  std::string node_prefix(std::size_t node) const;

 private:
  void allocate();

  ModelConfig config_;
  std::vector<InstrumentId> nodes_;
  std::size_t input_dim_;
  ad::ParameterSet params_;
  std::vector<RowMatrix> propagation_;
  std::vector<std::string> graph_hashes_;
};

std::string model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const std::string& text);

/// Checkpoint: config, node order, input width, graph hashes and parameters.
void save_model(const GcnLstm& model, const std::filesystem::path& path);
/// Restores parameters; graphs must be re-attached and are checked against the recorded hashes.
GcnLstm load_model(const std::filesystem::path& path, std::span<const SignedGraph> graphs);

}  // namespace termnet
