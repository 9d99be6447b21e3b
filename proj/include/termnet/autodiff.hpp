#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/StdVector>

#include "termnet/common.hpp"

// Reverse-mode automatic differentiation over dense row-major float64 matrices.
//
// A Tape records every forward operation together with a closure that pushes the
// output gradient back to the operation's inputs. Trainable tensors live in a
// ParameterSet; Tape::backward() accumulates into Parameter::grad.
namespace termnet::ad {

/// Fixed-alignment storage keeps vectorized reductions independent of where the heap puts a tensor.
using Storage = std::vector<double, Eigen::aligned_allocator<double>>;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& o) const { return rows() == o.rows() && cols() == o.cols(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double item() const;

  Storage& data() { return data_; }
  const Storage& data() const { return data_; }
  Eigen::Map<RowMatrix> map();
  Eigen::Map<const RowMatrix> map() const;

  void fill(double v);
  bool all_finite() const;

 private:
  std::vector<std::size_t> shape_;
  Storage data_;
};

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  /// Included in the L1 penalty. Biases are not.
  bool regularized = true;

  void zero_grad() { grad = Tensor(value.rows(), value.cols(), 0.0); }
};

/// Owns parameters at stable addresses, in insertion order.
class ParameterSet {
 public:
  Parameter& add(std::string name, std::size_t rows, std::size_t cols, bool regularized = true);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }
  void zero_grad();
  std::size_t scalar_count() const;

  ParameterSet() = default;
  ParameterSet(const ParameterSet& other);
  ParameterSet& operator=(const ParameterSet& other);
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to one recorded value on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

class Tape {
 public:
  /// Called with the node's own id; reads tape.grad(self) and adds into the inputs' gradients.
  using Backward = std::function<void(Tape& tape, std::size_t self)>;

  Var constant(Tensor value);
  /// Leaf bound to a parameter; repeated calls in one pass return the same node.
  Var param(Parameter& p);
  /// Appends an operation. `backward` may be empty when no input needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Tensor value, std::span<const Var> inputs, Backward backward);

  /// Seeds d(loss)/d(loss) = 1, runs the tape in reverse, and adds leaf gradients into Parameter::grad.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  /// Gradient slot of a node, allocated as zeros on first access.
  Tensor& grad(std::size_t id);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> leaves_;
};

// Forward operators. All operands must live on the same tape.

Var matmul(Var a, Var b);
/// Elementwise sum; `b` may also be a 1 x cols bias row or a 1 x 1 scalar, broadcast over `a`.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var concat(std::span<const Var> parts, int axis);
Var concat(std::initializer_list<Var> parts, int axis);
Var slice(Var a, int axis, std::size_t begin, std::size_t end);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var abs(Var a);
Var clamp(Var a, double lo, double hi);
/// Flat row-major gather into an n x 1 column.
Var gather(Var a, std::span<const std::size_t> flat_indices);
Var sum(Var a);
Var mean(Var a);
/// Population standard deviation, sqrt(var + 1e-24).
Var sd(Var a);
/// Fused LSTM cell. `z` holds the gate pre-activations [f | i | o | g] (rows x 4u); returns
/// [h | c] (rows x 2u) with c = f*c_prev + i*g and h = o*tanh(c), or c*tanh(c) when `verbatim_hidden`.
Var lstm_cell(Var z, Var c_prev, bool verbatim_hidden = false);
/// Node mixing for column-blocked node features: `h` is rows x (N*F) with node u in
/// columns [u*F, (u+1)*F); returns rows x (N*F1) with block v = sum_u m(v,u) * h_u * w.
Var node_mix(Var h, const RowMatrix& m, Var w);

inline constexpr double kSdGuard = 1e-24;

struct AdamConfig {
  double step_size = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::int64_t timestep = 0;
};

/// One bias-corrected ADAM update using Parameter::grad.
void adam_step(AdamState& state, ParameterSet& params);

/// lambda * sum |theta| over regularized parameters.
Var l1_penalty(Tape& tape, ParameterSet& params, double lambda = 1e-5);

/// Versioned JSON checkpoint: name -> {shape, values}.
std::string parameters_to_json(const ParameterSet& params);
void parameters_from_json(ParameterSet& params, const std::string& text);
void save_parameters(const ParameterSet& params, const std::filesystem::path& path);
void load_parameters(ParameterSet& params, const std::filesystem::path& path);

}  // namespace termnet::ad
