#include "termnet/model.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace termnet {

using ad::Tape;
using ad::Tensor;
using ad::Var;

std::string activation_name(Activation a) { return a == Activation::TANH ? "TANH" : "RELU"; }

Activation parse_activation(std::string_view s) {
  if (s == "TANH" || s == "tanh") return Activation::TANH;
  if (s == "RELU" || s == "relu") return Activation::RELU;
  throw InvalidArgument("unknown activation: " + std::string(s));
}

std::string self_loop_mode_name(SelfLoopMode m) {
  switch (m) {
    case SelfLoopMode::SUBTRACT: return "subtract";
    case SelfLoopMode::ADD: return "add";
    case SelfLoopMode::NONE: return "none";
  }
  return "subtract";
}

SelfLoopMode parse_self_loop_mode(std::string_view s) {
  if (s == "subtract") return SelfLoopMode::SUBTRACT;
  if (s == "add") return SelfLoopMode::ADD;
  if (s == "none") return SelfLoopMode::NONE;
  throw InvalidArgument("unknown self_loop_mode: " + std::string(s));
}

std::string model_variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::GCN_LSTM: return "GCN_LSTM";
    case ModelVariant::LSTM: return "LSTM";
    case ModelVariant::ANN: return "ANN";
  }
  return "GCN_LSTM";
}

ModelVariant parse_model_variant(std::string_view s) {
  if (s == "GCN_LSTM" || s == "gcn-lstm" || s == "gcn_lstm") return ModelVariant::GCN_LSTM;
  if (s == "LSTM" || s == "lstm") return ModelVariant::LSTM;
  if (s == "ANN" || s == "ann") return ModelVariant::ANN;
  throw InvalidArgument("unknown model variant: " + std::string(s));
}

void ModelConfig::validate() const {
  if (lstm_units <= 0 || dense1_units <= 0 || dense2_units <= 0 || gcn_out_units <= 0 || seq_len <= 0)
    throw InvalidArgument("ModelConfig: layer widths and seq_len must be positive");
  if (uses_gcn() && n_channels <= 0) throw InvalidArgument("ModelConfig: n_channels must be positive");
}

RowMatrix propagation_matrix(const SignedGraph& g, SelfLoopMode mode, bool transpose) {
  const auto n = g.adjacency.rows();
  if (g.adjacency.cols() != n) throw InvalidArgument("propagation_matrix: adjacency must be square");
  RowMatrix a = g.adjacency;
  if (transpose) a.transposeInPlace();
  std::vector<int> deg = !transpose && g.degree.size() == static_cast<std::size_t>(n) ? g.degree : degree_vector(a);
  if (mode == SelfLoopMode::SUBTRACT) a -= RowMatrix::Identity(n, n);
  if (mode == SelfLoopMode::ADD) a += RowMatrix::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (deg[i] <= 0) throw InvalidArgument("propagation_matrix: zero degree");
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) /= std::sqrt(static_cast<double>(deg[i]) * deg[j]);
  }
  return a;
}

GcnLstm::GcnLstm(ModelConfig config, std::vector<InstrumentId> nodes, std::size_t input_dim)
    : config_(config), nodes_(std::move(nodes)), input_dim_(input_dim) {
  config_.validate();
  if (nodes_.empty()) throw InvalidArgument("GcnLstm: no nodes");
  if (input_dim_ == 0) throw InvalidArgument("GcnLstm: input_dim must be positive");
  allocate();
}

std::string GcnLstm::node_prefix(std::size_t node) const {
  return config_.share_node_weights ? std::string("node/") : "node" + std::to_string(node) + "/";
}

void GcnLstm::allocate() {
  const std::size_t d = input_dim_, u = config_.lstm_units, d1 = config_.dense1_units, f = config_.dense2_units,
                    f1 = config_.gcn_out_units;
  const std::size_t modules = config_.share_node_weights ? 1 : nodes_.size();
  for (std::size_t v = 0; v < modules; ++v) {
    const std::string p = node_prefix(v);
    std::size_t dense_in = d;
    if (config_.variant != ModelVariant::ANN) {
      params_.add(p + "lstm/W", d, 4 * u);
      params_.add(p + "lstm/U", u, 4 * u);
      params_.add(p + "lstm/b", 1, 4 * u, false);
      dense_in = u;
    }
    params_.add(p + "dense1/w", dense_in, d1);
    params_.add(p + "dense1/b", 1, d1, false);
    params_.add(p + "dense2/w", d1, f);
    params_.add(p + "dense2/b", 1, f, false);
  }
  const std::size_t k = config_.uses_gcn() ? static_cast<std::size_t>(config_.n_channels) : 0;
  for (std::size_t c = 0; c < k; ++c) params_.add("gcn/w" + std::to_string(c), f, f1);
  params_.add("head/w", k * f1 + f, 1);
  params_.add("head/b", 1, 1, false);
}

void GcnLstm::init_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto glorot = [&](Tensor& t, std::size_t col_begin, std::size_t col_end, std::size_t fan_in, std::size_t fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t r = 0; r < t.rows(); ++r)
      for (std::size_t c = col_begin; c < col_end; ++c) t(r, c) = dist(rng);
  };
  const std::size_t u = config_.lstm_units;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Parameter& p = params_[i];
    p.value.fill(0.0);
    const auto& name = p.name;
    if (!p.regularized) {
      // Gate order f, i, o, c: the forget block starts at column 0.
      if (name.ends_with("lstm/b"))
        for (std::size_t c = 0; c < u; ++c) p.value(0, c) = 1.0;
      continue;
    }
    if (name.ends_with("lstm/W") || name.ends_with("lstm/U")) {
      for (std::size_t g = 0; g < 4; ++g) glorot(p.value, g * u, (g + 1) * u, p.value.rows(), u);
    } else if (name == "head/w") {
      // Skip rows as in the graph-free head; graph rows start at zero.
      const std::size_t f = config_.dense2_units, skip = p.value.rows() - f;
      const double bound = std::sqrt(6.0 / static_cast<double>(f + 1));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (std::size_t r = skip; r < p.value.rows(); ++r) p.value(r, 0) = dist(rng);
    } else {
      glorot(p.value, 0, p.value.cols(), p.value.rows(), p.value.cols());
    }
  }
  params_.zero_grad();
}

void GcnLstm::set_graphs(std::span<const SignedGraph> graphs) {
  propagation_.clear();
  graph_hashes_.clear();
  if (!config_.uses_gcn()) return;
  if (graphs.size() != static_cast<std::size_t>(config_.n_channels))
    throw InvalidArgument("set_graphs: expected " + std::to_string(config_.n_channels) + " graphs, got " +
                          std::to_string(graphs.size()));
  for (const auto& g : graphs) {
    if (g.nodes != nodes_) throw InvalidArgument("set_graphs: node order of graph " + g.config.name() +
                                                 " does not match the model");
    propagation_.push_back(propagation_matrix(g, config_.self_loop_mode, config_.transpose_adjacency));
    graph_hashes_.push_back(graph_hash(g));
  }
}

Var GcnLstm::lstm_forward(Tape& tape, std::span<const Tensor> x_seq, std::size_t node) {
  if (x_seq.empty()) throw InvalidArgument("lstm_forward: empty sequence");
  const std::string p = node_prefix(node);
  Var w = tape.param(params_.at(p + "lstm/W"));
  Var uw = tape.param(params_.at(p + "lstm/U"));
  Var b = tape.param(params_.at(p + "lstm/b"));
  const std::size_t u = config_.lstm_units;
  const std::size_t batch = x_seq[0].rows();
  // Input projections of all steps in one product; step t occupies rows [t*batch, (t+1)*batch).
  Tensor stacked(x_seq.size() * batch, input_dim_);
  for (std::size_t t = 0; t < x_seq.size(); ++t) {
    const auto& xt = x_seq[t];
    if (xt.cols() != input_dim_ || xt.rows() != batch) throw InvalidArgument("lstm_forward: input shape mismatch");
    std::copy(xt.data().begin(), xt.data().end(), stacked.data().begin() + static_cast<std::ptrdiff_t>(t * batch * input_dim_));
  }
  Var xw = add(matmul(tape.constant(std::move(stacked)), w), b);
  Var h = tape.constant(Tensor(batch, u, 0.0));
  Var c = h;
  for (std::size_t t = 0; t < x_seq.size(); ++t) {
    Var z = add(slice(xw, 0, t * batch, (t + 1) * batch), matmul(h, uw));
    Var hc = ad::lstm_cell(z, c, config_.verbatim_hidden_state);
    h = slice(hc, 1, 0, u);
    c = slice(hc, 1, u, 2 * u);
  }
  return h;
}

Var GcnLstm::node_module_forward(Tape& tape, std::span<const Tensor> x_seq, std::size_t node) {
  if (x_seq.empty()) throw InvalidArgument("node_module_forward: empty sequence");
  const std::string p = node_prefix(node);
  Var in;
  if (config_.variant == ModelVariant::ANN) {
    if (x_seq.back().cols() != input_dim_) throw InvalidArgument("node_module_forward: input shape mismatch");
    in = tape.constant(x_seq.back());
  } else {
    in = lstm_forward(tape, x_seq, node);
  }
  Var d1 = tanh(add(matmul(in, tape.param(params_.at(p + "dense1/w"))), tape.param(params_.at(p + "dense1/b"))));
  return tanh(add(matmul(d1, tape.param(params_.at(p + "dense2/w"))), tape.param(params_.at(p + "dense2/b"))));
}

std::vector<Var> GcnLstm::gcn_forward(Tape& tape, Var h0) {
  if (propagation_.size() != static_cast<std::size_t>(config_.n_channels))
    throw InvalidArgument("gcn_forward: graphs not set");
  std::vector<Var> out;
  out.reserve(propagation_.size());
  for (std::size_t k = 0; k < propagation_.size(); ++k) {
    Var z = ad::node_mix(h0, propagation_[k], tape.param(params_.at("gcn/w" + std::to_string(k))));
    out.push_back(config_.gcn_activation == Activation::TANH ? tanh(z) : relu(z));
  }
  return out;
}

Var GcnLstm::head_forward(Tape& tape, std::span<const Var> gcn_channels, Var skips) {
  const auto n = static_cast<Eigen::Index>(nodes_.size());
  const std::size_t f = config_.dense2_units, f1 = config_.gcn_out_units;
  const RowMatrix identity = RowMatrix::Identity(n, n);
  Var w = tape.param(params_.at("head/w"));
  const std::size_t k_rows = w.rows() - f;
  if (gcn_channels.size() * f1 > k_rows) throw InvalidArgument("head_forward: more channels than head weights");
  // Skip term first so that all-zero graph terms leave it bit-identical.
  Var y = ad::node_mix(skips, identity, slice(w, 0, k_rows, k_rows + f));
  for (std::size_t k = 0; k < gcn_channels.size(); ++k)
    y = add(y, ad::node_mix(gcn_channels[k], identity, slice(w, 0, k * f1, (k + 1) * f1)));
  return add(y, tape.param(params_.at("head/b")));
}

Var GcnLstm::forward(Tape& tape, const ModelBatch& batch, bool skip_only) {
  if (batch.x.size() != nodes_.size()) throw InvalidArgument("forward: batch node count mismatch");
  std::vector<Var> modules;
  modules.reserve(nodes_.size());
  for (std::size_t v = 0; v < nodes_.size(); ++v) modules.push_back(node_module_forward(tape, batch.x[v], v));
  Var h0 = concat(modules, 1);
  std::vector<Var> channels;
  if (config_.uses_gcn() && !skip_only) channels = gcn_forward(tape, h0);
  return head_forward(tape, channels, h0);
}

RowMatrix GcnLstm::predict(const ModelBatch& batch, bool skip_only) {
  Tape tape;
  Var y = forward(tape, batch, skip_only);
  return y.value().map();
}

std::string model_config_to_json(const ModelConfig& c) {
  nlohmann::json j = {{"lstm_units", c.lstm_units},
                      {"dense1_units", c.dense1_units},
                      {"dense2_units", c.dense2_units},
                      {"gcn_out_units", c.gcn_out_units},
                      {"seq_len", c.seq_len},
                      {"gcn_activation", activation_name(c.gcn_activation)},
                      {"n_channels", c.n_channels},
                      {"share_node_weights", c.share_node_weights},
                      {"verbatim_hidden_state", c.verbatim_hidden_state},
                      {"transpose_adjacency", c.transpose_adjacency},
                      {"self_loop_mode", self_loop_mode_name(c.self_loop_mode)},
                      {"variant", model_variant_name(c.variant)}};
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig c;
  c.lstm_units = j.value("lstm_units", c.lstm_units);
  c.dense1_units = j.value("dense1_units", c.dense1_units);
  c.dense2_units = j.value("dense2_units", c.dense2_units);
  c.gcn_out_units = j.value("gcn_out_units", c.gcn_out_units);
  c.seq_len = j.value("seq_len", c.seq_len);
  if (j.contains("gcn_activation")) c.gcn_activation = parse_activation(j["gcn_activation"].get<std::string>());
  c.n_channels = j.value("n_channels", c.n_channels);
  c.share_node_weights = j.value("share_node_weights", c.share_node_weights);
  c.verbatim_hidden_state = j.value("verbatim_hidden_state", c.verbatim_hidden_state);
  c.transpose_adjacency = j.value("transpose_adjacency", c.transpose_adjacency);
  if (j.contains("self_loop_mode")) c.self_loop_mode = parse_self_loop_mode(j["self_loop_mode"].get<std::string>());
  if (j.contains("variant")) c.variant = parse_model_variant(j["variant"].get<std::string>());
  c.validate();
  return c;
}

void save_model(const GcnLstm& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "termnet-model";
  j["version"] = 1;
  j["config"] = nlohmann::json::parse(model_config_to_json(model.config()));
  auto nodes = nlohmann::json::array();
  for (const auto& n : model.nodes()) nodes.push_back(n.code());
  j["nodes"] = nodes;
  j["input_dim"] = model.input_dim();
  j["graph_hashes"] = model.graph_hashes();
  j["parameters"] = nlohmann::json::parse(ad::parameters_to_json(model.params()));
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump();
}

GcnLstm load_model(const std::filesystem::path& path, std::span<const SignedGraph> graphs) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("model checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "termnet-model") throw IoError("model checkpoint: unrecognised format");
  std::vector<InstrumentId> nodes;
  for (const auto& s : j.at("nodes")) nodes.push_back(InstrumentId::parse(s.get<std::string>()));
  GcnLstm model(model_config_from_json(j.at("config").dump()), std::move(nodes), j.at("input_dim").get<std::size_t>());
  ad::parameters_from_json(model.params(), j.at("parameters").dump());
  model.set_graphs(graphs);
  const auto hashes = j.at("graph_hashes").get<std::vector<std::string>>();
  if (hashes != model.graph_hashes()) throw IoError("model checkpoint: graphs differ from the ones it was trained on");
  return model;
}

}  // namespace termnet
