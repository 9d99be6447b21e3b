#pragma once

// Finite-difference cases: every tape operator, every loss, the L1 penalty and a small full model.

#include <memory>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "termnet/losses.hpp"
#include "termnet/model.hpp"

namespace gradcases {

using termnet::ad::ParameterSet;
using termnet::ad::Tape;
using termnet::ad::Tensor;
using termnet::ad::Var;

struct Case {
  std::string name;
  std::shared_ptr<ParameterSet> params;
  std::function<Var(Tape&)> loss;
};

inline Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  oracle::fill_uniform(t, rng, lo, hi);
  return t;
}

/// Uniform on [-hi, -lo] u [lo, hi], clear of kinks at zero.
inline Tensor signed_away(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = 0.1, double hi = 1.0) {
  Tensor t = random_tensor(r, c, rng, lo, hi);
  std::bernoulli_distribution flip(0.5);
  for (auto& v : t.data())
    if (flip(rng)) v = -v;
  return t;
}

inline std::vector<Case> operator_cases(std::uint64_t seed) {
  using namespace termnet::ad;
  std::mt19937_64 rng(seed);
  std::vector<Case> out;
  // Contracts the op output with a fixed random weight so every output entry matters.
  auto add_case = [&](std::string name, std::vector<Tensor> inits,
                      std::function<Var(Tape&, std::vector<Var>&)> body) {
    auto ps = std::make_shared<ParameterSet>();
    for (std::size_t i = 0; i < inits.size(); ++i) {
      auto& p = ps->add("p" + std::to_string(i), inits[i].rows(), inits[i].cols());
      p.value = inits[i];
    }
    // Probe the output shape once to draw the contraction weights.
    Tape probe;
    std::vector<Var> pv;
    for (std::size_t i = 0; i < ps->size(); ++i) pv.push_back(probe.param((*ps)[i]));
    const Var o = body(probe, pv);
    auto w = std::make_shared<Tensor>(random_tensor(o.rows(), o.cols(), rng));
    auto* raw = ps.get();
    out.push_back({std::move(name), ps, [raw, w, body](Tape& t) {
                     std::vector<Var> v;
                     for (std::size_t i = 0; i < raw->size(); ++i) v.push_back(t.param((*raw)[i]));
                     return sum(hadamard(body(t, v), t.constant(*w)));
                   }});
  };

  add_case("matmul", {random_tensor(3, 4, rng), random_tensor(4, 2, rng)},
           [](Tape&, auto& v) { return matmul(v[0], v[1]); });
  add_case("add", {random_tensor(3, 4, rng), random_tensor(3, 4, rng)}, [](Tape&, auto& v) { return add(v[0], v[1]); });
  add_case("add row broadcast", {random_tensor(5, 3, rng), random_tensor(1, 3, rng)},
           [](Tape&, auto& v) { return add(v[0], v[1]); });
  add_case("add scalar broadcast", {random_tensor(5, 3, rng), random_tensor(1, 1, rng)},
           [](Tape&, auto& v) { return add(v[0], v[1]); });
  add_case("sub", {random_tensor(3, 4, rng), random_tensor(3, 4, rng)}, [](Tape&, auto& v) { return sub(v[0], v[1]); });
  add_case("hadamard", {random_tensor(3, 4, rng), random_tensor(3, 4, rng)},
           [](Tape&, auto& v) { return hadamard(v[0], v[1]); });
  add_case("div", {random_tensor(3, 4, rng), signed_away(3, 4, rng, 0.5, 2.0)},
           [](Tape&, auto& v) { return div(v[0], v[1]); });
  add_case("scale", {random_tensor(2, 5, rng)}, [](Tape&, auto& v) { return scale(v[0], -1.7); });
  add_case("add_scalar", {random_tensor(2, 5, rng)}, [](Tape&, auto& v) { return add_scalar(v[0], 0.3); });
  add_case("concat rows", {random_tensor(2, 3, rng), random_tensor(4, 3, rng)},
           [](Tape&, auto& v) { return concat({v[0], v[1]}, 0); });
  add_case("concat cols", {random_tensor(2, 3, rng), random_tensor(2, 5, rng)},
           [](Tape&, auto& v) { return concat({v[0], v[1]}, 1); });
  add_case("slice rows", {random_tensor(5, 3, rng)}, [](Tape&, auto& v) { return slice(v[0], 0, 1, 4); });
  add_case("slice cols", {random_tensor(3, 6, rng)}, [](Tape&, auto& v) { return slice(v[0], 1, 2, 5); });
  add_case("sigmoid", {random_tensor(3, 3, rng, -3, 3)}, [](Tape&, auto& v) { return sigmoid(v[0]); });
  add_case("tanh", {random_tensor(3, 3, rng, -3, 3)}, [](Tape&, auto& v) { return termnet::ad::tanh(v[0]); });
  add_case("relu", {signed_away(3, 3, rng)}, [](Tape&, auto& v) { return relu(v[0]); });
  add_case("exp", {random_tensor(3, 3, rng, -2, 2)}, [](Tape&, auto& v) { return termnet::ad::exp(v[0]); });
  add_case("log", {random_tensor(3, 3, rng, 0.2, 3)}, [](Tape&, auto& v) { return termnet::ad::log(v[0]); });
  add_case("abs", {signed_away(3, 3, rng)}, [](Tape&, auto& v) { return termnet::ad::abs(v[0]); });
  add_case("clamp", {signed_away(4, 4, rng, 0.1, 2.0)}, [](Tape&, auto& v) { return clamp(v[0], -0.9, 0.8); });
  add_case("gather", {random_tensor(3, 4, rng)}, [](Tape&, auto& v) {
    static const std::vector<std::size_t> idx{0, 5, 5, 11, 7};
    return gather(v[0], idx);
  });
  add_case("sum", {random_tensor(3, 4, rng)}, [](Tape&, auto& v) { return sum(v[0]); });
  add_case("mean", {random_tensor(3, 4, rng)}, [](Tape&, auto& v) { return mean(v[0]); });
  add_case("sd", {random_tensor(6, 2, rng)}, [](Tape&, auto& v) { return sd(v[0]); });
  for (bool verbatim : {false, true})
    add_case(verbatim ? "lstm_cell (verbatim hidden)" : "lstm_cell", {random_tensor(3, 8, rng, -2, 2), random_tensor(3, 2, rng)},
             [verbatim](Tape&, auto& v) { return lstm_cell(v[0], v[1], verbatim); });
  {
    termnet::RowMatrix m(3, 3);
    m << 0.5, -0.25, 0.0, 0.3, 0.0, 0.7, -1.0, 0.2, 0.4;
    add_case("node_mix", {random_tensor(4, 3 * 2, rng), random_tensor(2, 3, rng)},
             [m](Tape&, auto& v) { return node_mix(v[0], m, v[1]); });
  }
  add_case("composite", {random_tensor(4, 3, rng), random_tensor(3, 3, rng), random_tensor(1, 3, rng)},
           [](Tape&, auto& v) {
             Var h = termnet::ad::tanh(add(matmul(v[0], v[1]), v[2]));
             Var g = sigmoid(scale(h, 2.0));
             return concat({hadamard(h, g), termnet::ad::exp(slice(h, 1, 0, 1))}, 1);
           });
  {
    auto ps = std::make_shared<ParameterSet>();
    auto& a = ps->add("w", 3, 4);
    a.value = signed_away(3, 4, rng);
    auto& b = ps->add("bias", 1, 4, false);
    b.value = signed_away(1, 4, rng);
    auto* raw = ps.get();
    out.push_back({"l1_penalty", ps, [raw](Tape& t) {
                     return add(l1_penalty(t, *raw, 1e-5), scale(sum(t.param(raw->at("bias"))), 0.1));
                   }});
  }
  return out;
}

inline std::vector<Case> loss_cases(std::uint64_t seed) {
  using namespace termnet;
  std::mt19937_64 rng(seed);
  std::vector<Case> out;
  auto add_case = [&](std::string name, std::function<Var(Var, Var)> f, double lo = -1.0, double hi = 1.0) {
    auto ps = std::make_shared<ParameterSet>();
    auto& p = ps->add("yhat", 12, 1);
    p.value = gradcases::signed_away(12, 1, rng, 0.05, 1.0);
    auto y = std::make_shared<Tensor>(gradcases::random_tensor(12, 1, rng, lo, hi));
    // Keep MAE clear of |y - yhat| = 0.
    for (std::size_t i = 0; i < 12; ++i)
      if (std::abs((*y)[i] - p.value[i]) < 0.05) (*y)[i] += 0.1;
    auto* raw = ps.get();
    out.push_back({std::move(name), ps, [raw, y, f](Tape& t) { return f(t.constant(*y), t.param(raw->at("yhat"))); }});
  };
  add_case("MSE", [](Var y, Var p) { return mse(y, p); });
  add_case("MAE", [](Var y, Var p) { return mae(y, p); });
  // A wide epsilon keeps tanh(yhat / eps) in its smooth range at h = 1e-5.
  add_case("SR", [](Var y, Var p) { return sr_loss(y, p, 0.5); });
  for (double alpha : {0.5, 1.0}) {
    LossConfig cfg{0.5, alpha, Quantity::RETURN};
    add_case("MIXED alpha=" + format_double(alpha), [cfg](Var y, Var p) { return mixed_loss(y, p, cfg); });
  }
  add_case("QLIKE", [](Var y, Var p) { return qlike(y, p); }, -2.0, 2.0);

  // Masked batch losses over a 5 x 3 forecast.
  for (auto kind : {LossKind::MSE, LossKind::MAE, LossKind::MIXED, LossKind::QLIKE}) {
    auto ps = std::make_shared<ParameterSet>();
    auto& p = ps->add("pred", 5, 3);
    p.value = gradcases::signed_away(5, 3, rng, 0.05, 1.0);
    auto y = std::make_shared<Tensor>(gradcases::random_tensor(5, 3, rng));
    for (std::size_t i = 0; i < y->size(); ++i)
      if (std::abs((*y)[i] - p.value[i]) < 0.05) (*y)[i] += 0.1;
    auto mask = std::make_shared<std::vector<std::uint8_t>>(15, 1);
    (*mask)[4] = (*mask)[9] = 0;
    LossConfig cfg{0.5, 1.0, kind == LossKind::QLIKE ? Quantity::VOLATILITY : Quantity::RETURN};
    auto* raw = ps.get();
    out.push_back({"masked " + loss_name(kind), ps, [raw, y, mask, kind, cfg](Tape& t) {
                     return masked_loss(t.param(raw->at("pred")), *y, *mask, kind, cfg);
                   }});
  }
  return out;
}

/// A model with tiny layer sizes: N nodes, 12 random signed channel graphs, all parameters randomized.
struct ModelFixture {
  std::shared_ptr<termnet::GcnLstm> model;
  termnet::ModelBatch batch;
  Tensor target;
};

inline ModelFixture small_model(std::uint64_t seed, std::size_t n_nodes = 3, bool verbatim_hidden = false,
                                termnet::ModelVariant variant = termnet::ModelVariant::GCN_LSTM,
                                bool share = false) {
  using namespace termnet;
  std::mt19937_64 rng(seed);
  ModelConfig cfg;
  cfg.lstm_units = 3;
  cfg.dense1_units = 3;
  cfg.dense2_units = 2;
  cfg.gcn_out_units = 2;
  cfg.seq_len = 3;
  cfg.verbatim_hidden_state = verbatim_hidden;
  cfg.variant = variant;
  cfg.share_node_weights = share;
  auto nodes = canonical_universe();
  nodes.resize(n_nodes);
  const std::size_t input_dim = 2;
  ModelFixture f;
  f.model = std::make_shared<GcnLstm>(cfg, nodes, input_dim);
  f.model->init_params(seed);
  if (cfg.uses_gcn()) {
    std::vector<SignedGraph> graphs;
    for (int k = 0; k < cfg.n_channels; ++k) {
      auto c = oracle::random_correlation(n_nodes, rng);
      graphs.push_back(k % 2 == 0 ? weighted_adjacency(c, nodes) : unweighted_adjacency(c, nodes, 1));
    }
    f.model->set_graphs(graphs);
  }
  for (std::size_t i = 0; i < f.model->params().size(); ++i) oracle::fill_uniform(f.model->params()[i].value, rng, -0.8, 0.8);
  const std::size_t b = 4;
  f.batch.x.assign(n_nodes, {});
  for (auto& node : f.batch.x)
    for (int s = 0; s < cfg.seq_len; ++s) node.push_back(random_tensor(b, input_dim, rng));
  f.target = random_tensor(b, n_nodes, rng);
  return f;
}

inline Case model_case(std::uint64_t seed, bool verbatim_hidden = false,
                       termnet::ModelVariant variant = termnet::ModelVariant::GCN_LSTM, bool share = false) {
  auto f = std::make_shared<ModelFixture>(small_model(seed, 3, verbatim_hidden, variant, share));
  std::shared_ptr<ParameterSet> ps(f, &f->model->params());
  std::string name = termnet::model_variant_name(variant) + (verbatim_hidden ? " (verbatim hidden)" : "") +
                     (share ? " (shared nodes)" : "");
  return {name, ps, [f](Tape& t) { return termnet::mse(t.constant(f->target), f->model->forward(t, f->batch)); }};
}

}  // namespace gradcases
