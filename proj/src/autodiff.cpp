#include "termnet/autodiff.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

namespace termnet::ad {

// ---------------------------------------------------------------- Tensor

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  if (shape_.size() > 2) throw InvalidArgument("Tensor: rank > 2 is not supported");
  std::size_t n = 1;
  for (auto d : shape_) n *= d;
  data_.assign(n, fill);
}

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill) : shape_{rows, cols}, data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : shape_{rows, cols}, data_(values.begin(), values.end()) {
  if (data_.size() != rows * cols) throw InvalidArgument("Tensor: value count does not match shape");
}

double Tensor::item() const {
  if (data_.size() != 1) throw InvalidArgument("Tensor::item on a non-scalar");
  return data_[0];
}

Eigen::Map<RowMatrix> Tensor::map() {
  return {data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
}

Eigen::Map<const RowMatrix> Tensor::map() const {
  return {data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------- ParameterSet

Parameter& ParameterSet::add(std::string name, std::size_t rows, std::size_t cols, bool regularized) {
  if (index_.count(name)) throw InvalidArgument("duplicate parameter: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor(rows, cols, 0.0);
  p->grad = Tensor(rows, cols, 0.0);
  p->regularized = regularized;
  index_.emplace(std::move(name), params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter: " + name);
  return *params_[it->second];
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter: " + name);
  return *params_[it->second];
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

ParameterSet::ParameterSet(const ParameterSet& other) : index_(other.index_) {
  params_.reserve(other.params_.size());
  for (const auto& p : other.params_) params_.push_back(std::make_unique<Parameter>(*p));
}

ParameterSet& ParameterSet::operator=(const ParameterSet& other) {
  if (this != &other) {
    ParameterSet copy(other);
    *this = std::move(copy);
  }
  return *this;
}

// ---------------------------------------------------------------- Tape

const Tensor& Var::value() const {
  if (!tape) throw InvalidArgument("Var is not bound to a tape");
  return tape->value(id);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  auto it = leaves_.find(&p);
  if (it != leaves_.end()) return {this, it->second};
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  leaves_.emplace(&p, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (const auto& v : inputs) {
    if (v.tape != this) throw InvalidArgument("operand recorded on a different tape");
    needs = needs || nodes_.at(v.id).requires_grad;
  }
#ifndef NDEBUG
  assert(value.all_finite() || !"non-finite value recorded on tape");
#endif
  Node n;
  n.value = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.size() != n.value.size() || n.grad.rows() != n.value.rows())
    n.grad = Tensor(n.value.rows(), n.value.cols(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw InvalidArgument("loss recorded on a different tape");
  if (nodes_.at(loss.id).value.size() != 1) throw InvalidArgument("backward requires a scalar loss");
  for (auto& n : nodes_) n.grad = Tensor();
  grad(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
  }
  for (auto& n : nodes_) {
    if (!n.param || n.grad.size() == 0) continue;
    Parameter& p = *n.param;
    if (!p.grad.same_shape(p.value) || p.grad.size() != p.value.size()) p.zero_grad();
    p.grad.map() += n.grad.map();
  }
}

// ---------------------------------------------------------------- operators

namespace {

void check_same(const Var& a, const Var& b, const char* op) {
  if (a.tape != b.tape) throw InvalidArgument(std::string(op) + ": operands on different tapes");
  if (!a.value().same_shape(b.value()))
    throw InvalidArgument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
}

// Elementwise unary op whose derivative is a function of input x and output y.
template <typename F, typename D>
Var unary(Var a, F f, D dfdx) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return a.tape->record(std::move(out), {a}, [a, dfdx](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(a.id);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.tape != b.tape) throw InvalidArgument("matmul: operands on different tapes");
  if (a.cols() != b.rows())
    throw InvalidArgument("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                          std::to_string(b.rows()) + ")");
  Tensor out(a.rows(), b.cols());
  out.map().noalias() = a.value().map() * b.value().map();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    if (t.requires_grad(a.id)) {
      const auto& g = t.grad(self);
      t.grad(a.id).map().noalias() += g.map() * t.value(b.id).map().transpose();
    }
    if (t.requires_grad(b.id)) {
      const auto& g = t.grad(self);
      t.grad(b.id).map().noalias() += t.value(a.id).map().transpose() * g.map();
    }
  });
}

Var add(Var a, Var b) {
  if (a.tape != b.tape) throw InvalidArgument("add: operands on different tapes");
  const bool same = a.value().same_shape(b.value());
  const bool scalar = !same && b.rows() == 1 && b.cols() == 1;
  const bool row = !same && !scalar && b.rows() == 1 && b.cols() == a.cols();
  if (!scalar && !row) check_same(a, b, "add");
  Tensor out = a.value();
  if (scalar)
    out.map().array() += b.value()[0];
  else if (row)
    out.map().rowwise() += b.value().map().row(0);
  else
    out.map() += b.value().map();
  return a.tape->record(std::move(out), {a, b}, [a, b, scalar, row](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(a.id)) t.grad(a.id).map() += g.map();
    if (t.requires_grad(b.id)) {
      if (scalar)
        t.grad(b.id)[0] += g.map().sum();
      else if (row)
        t.grad(b.id).map() += g.map().colwise().sum();
      else
        t.grad(b.id).map() += g.map();
    }
  });
}

Var sub(Var a, Var b) {
  check_same(a, b, "sub");
  Tensor out = a.value();
  out.map() -= b.value().map();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(a.id)) t.grad(a.id).map() += g.map();
    if (t.requires_grad(b.id)) t.grad(b.id).map() -= g.map();
  });
}

Var hadamard(Var a, Var b) {
  check_same(a, b, "hadamard");
  Tensor out = a.value();
  out.map().array() *= b.value().map().array();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(a.id)) t.grad(a.id).map().array() += g.map().array() * t.value(b.id).map().array();
    if (t.requires_grad(b.id)) t.grad(b.id).map().array() += g.map().array() * t.value(a.id).map().array();
  });
}

Var div(Var a, Var b) {
  check_same(a, b, "div");
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < bv.size(); ++i)
    if (bv[i] == 0.0) throw InvalidArgument("div: zero denominator");
  Tensor out = a.value();
  out.map().array() /= bv.map().array();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& bv = t.value(b.id);
    if (t.requires_grad(a.id)) t.grad(a.id).map().array() += g.map().array() / bv.map().array();
    if (t.requires_grad(b.id))
      t.grad(b.id).map().array() -= g.map().array() * t.value(self).map().array() / bv.map().array();
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  out.map() *= s;
  return a.tape->record(std::move(out), {a}, [a, s](Tape& t, std::size_t self) {
    t.grad(a.id).map() += s * t.grad(self).map();
  });
}

Var add_scalar(Var a, double s) {
  Tensor out = a.value();
  out.map().array() += s;
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    t.grad(a.id).map() += t.grad(self).map();
  });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw InvalidArgument("concat: no operands");
  if (axis != 0 && axis != 1) throw InvalidArgument("concat: axis must be 0 or 1");
  Tape* tape = parts[0].tape;
  std::size_t rows = 0, cols = 0;
  for (const auto& p : parts) {
    if (p.tape != tape) throw InvalidArgument("concat: operands on different tapes");
    if (axis == 0) {
      if (rows > 0 && p.cols() != cols) throw InvalidArgument("concat: column counts differ");
      cols = p.cols();
      rows += p.rows();
    } else {
      if (cols > 0 && p.rows() != rows) throw InvalidArgument("concat: row counts differ");
      rows = p.rows();
      cols += p.cols();
    }
  }
  Tensor out(rows, cols);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const auto m = p.value().map();
    if (axis == 0) {
      out.map().middleRows(static_cast<Eigen::Index>(off), m.rows()) = m;
      off += p.rows();
    } else {
      out.map().middleCols(static_cast<Eigen::Index>(off), m.cols()) = m;
      off += p.cols();
    }
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape->record(std::move(out), parts, [inputs, offsets, axis](Tape& t, std::size_t self) {
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const auto id = inputs[k].id;
      if (!t.requires_grad(id)) continue;
      const auto g = t.grad(self).map();
      auto gi = t.grad(id).map();
      const auto o = static_cast<Eigen::Index>(offsets[k]);
      if (axis == 0)
        gi += g.middleRows(o, gi.rows());
      else
        gi += g.middleCols(o, gi.cols());
    }
  });
}

Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  if (axis != 0 && axis != 1) throw InvalidArgument("slice: axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? a.rows() : a.cols();
  if (begin > end || end > extent) throw InvalidArgument("slice: range out of bounds");
  const auto b = static_cast<Eigen::Index>(begin);
  const auto n = static_cast<Eigen::Index>(end - begin);
  const auto m = a.value().map();
  Tensor out = axis == 0 ? Tensor(end - begin, a.cols()) : Tensor(a.rows(), end - begin);
  if (axis == 0)
    out.map() = m.middleRows(b, n);
  else
    out.map() = m.middleCols(b, n);
  return a.tape->record(std::move(out), {a}, [a, axis, b, n](Tape& t, std::size_t self) {
    const auto g = t.grad(self).map();
    auto ga = t.grad(a.id).map();
    if (axis == 0)
      ga.middleRows(b, n) += g;
    else
      ga.middleCols(b, n) += g;
  });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  const Tensor& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] > 0.0)) throw InvalidArgument("log: non-positive input");
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var abs(Var a) {
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var clamp(Var a, double lo, double hi) {
  if (lo > hi) throw InvalidArgument("clamp: lo > hi");
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var gather(Var a, std::span<const std::size_t> flat_indices) {
  const Tensor& x = a.value();
  Tensor out(flat_indices.size(), 1);
  for (std::size_t i = 0; i < flat_indices.size(); ++i) {
    if (flat_indices[i] >= x.size()) throw InvalidArgument("gather: index out of range");
    out[i] = x[flat_indices[i]];
  }
  std::vector<std::size_t> idx(flat_indices.begin(), flat_indices.end());
  return a.tape->record(std::move(out), {a}, [a, idx = std::move(idx)](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(a.id);
    for (std::size_t i = 0; i < idx.size(); ++i) ga[idx[i]] += g[i];
  });
}

Var sum(Var a) {
  Tensor out = Tensor::scalar(a.value().map().sum());
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    t.grad(a.id).map().array() += t.grad(self)[0];
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw InvalidArgument("mean: empty input");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var sd(Var a) {
  const Tensor& x = a.value();
  const std::size_t n = x.size();
  if (n == 0) throw InvalidArgument("sd: empty input");
  const double m = x.map().mean();
  const double var = (x.map().array() - m).square().sum() / static_cast<double>(n);
  Tensor out = Tensor::scalar(std::sqrt(var + kSdGuard));
  return a.tape->record(std::move(out), {a}, [a, n](Tape& t, std::size_t self) {
    const auto& x = t.value(a.id);
    const double m = x.map().mean();
    const double s = t.value(self)[0];
    const double g = t.grad(self)[0];
    t.grad(a.id).map().array() += g * (x.map().array() - m) / (static_cast<double>(n) * s);
  });
}

namespace {

double logistic(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

Var lstm_cell(Var z, Var c_prev, bool verbatim_hidden) {
  if (z.tape != c_prev.tape) throw InvalidArgument("lstm_cell: operands on different tapes");
  const std::size_t b = z.rows(), u = c_prev.cols();
  if (z.cols() != 4 * u || c_prev.rows() != b)
    throw InvalidArgument("lstm_cell: expected z of width 4u and c of width u with equal rows");
  Tensor out(b, 2 * u);
  // Activated gates [f | i | o | g] and tanh(c), kept for the backward pass.
  auto act = std::make_shared<std::vector<double>>(b * 5 * u);
  const Tensor& zv = z.value();
  const Tensor& cv = c_prev.value();
  for (std::size_t r = 0; r < b; ++r) {
    const double* zr = &zv.data()[r * 4 * u];
    double* ar = &(*act)[r * 5 * u];
    for (std::size_t j = 0; j < u; ++j) {
      const double f = logistic(zr[j]), i = logistic(zr[u + j]), o = logistic(zr[2 * u + j]);
      const double g = std::tanh(zr[3 * u + j]);
      const double c = f * cv(r, j) + i * g;
      const double tc = std::tanh(c);
      ar[j] = f, ar[u + j] = i, ar[2 * u + j] = o, ar[3 * u + j] = g, ar[4 * u + j] = tc;
      out(r, u + j) = c;
      out(r, j) = (verbatim_hidden ? c : o) * tc;
    }
  }
  return z.tape->record(std::move(out), {z, c_prev}, [z, c_prev, u, verbatim_hidden, act](Tape& t, std::size_t self) {
    const Tensor& gout = t.grad(self);
    const Tensor& cv = t.value(c_prev.id);
    const Tensor& ov = t.value(self);
    Tensor* gz = t.requires_grad(z.id) ? &t.grad(z.id) : nullptr;
    Tensor* gc = t.requires_grad(c_prev.id) ? &t.grad(c_prev.id) : nullptr;
    for (std::size_t r = 0; r < ov.rows(); ++r) {
      const double* ar = &(*act)[r * 5 * u];
      for (std::size_t j = 0; j < u; ++j) {
        const double f = ar[j], i = ar[u + j], o = ar[2 * u + j], g = ar[3 * u + j], tc = ar[4 * u + j];
        const double c = ov(r, u + j);
        const double gh = gout(r, j);
        const double dtc = 1.0 - tc * tc;
        const double dc = gout(r, u + j) + gh * (verbatim_hidden ? tc + c * dtc : o * dtc);
        if (gz) {
          double* gzr = &gz->data()[r * 4 * u];
          gzr[j] += dc * cv(r, j) * f * (1.0 - f);
          gzr[u + j] += dc * g * i * (1.0 - i);
          gzr[2 * u + j] += verbatim_hidden ? 0.0 : gh * tc * o * (1.0 - o);
          gzr[3 * u + j] += dc * i * (1.0 - g * g);
        }
        if (gc) (*gc)(r, j) += dc * f;
      }
    }
  });
}

Var node_mix(Var h, const RowMatrix& m, Var w) {
  if (h.tape != w.tape) throw InvalidArgument("node_mix: operands on different tapes");
  const auto n = m.rows();
  if (m.cols() != n) throw InvalidArgument("node_mix: mixing matrix must be square");
  const auto f = static_cast<Eigen::Index>(w.rows());
  const auto f1 = static_cast<Eigen::Index>(w.cols());
  if (static_cast<Eigen::Index>(h.cols()) != n * f)
    throw InvalidArgument("node_mix: feature width does not match node count x weight rows");
  const auto b = static_cast<Eigen::Index>(h.rows());
  const auto hv = h.value().map();
  const auto wv = w.value().map();
  std::vector<RowMatrix> z(static_cast<std::size_t>(n));
  for (Eigen::Index u = 0; u < n; ++u) z[u].noalias() = hv.middleCols(u * f, f) * wv;
  Tensor out(static_cast<std::size_t>(b), static_cast<std::size_t>(n * f1));
  auto om = out.map();
  for (Eigen::Index v = 0; v < n; ++v)
    for (Eigen::Index u = 0; u < n; ++u)
      if (m(v, u) != 0.0) om.middleCols(v * f1, f1) += m(v, u) * z[u];
  return h.tape->record(std::move(out), {h, w}, [h, w, m, n, f, f1, b](Tape& t, std::size_t self) {
    const auto g = t.grad(self).map();
    RowMatrix dz = RowMatrix::Zero(b, f1);
    const auto hv = t.value(h.id).map();
    const auto wv = t.value(w.id).map();
    const bool need_h = t.requires_grad(h.id);
    const bool need_w = t.requires_grad(w.id);
    for (Eigen::Index u = 0; u < n; ++u) {
      dz.setZero();
      for (Eigen::Index v = 0; v < n; ++v)
        if (m(v, u) != 0.0) dz += m(v, u) * g.middleCols(v * f1, f1);
      if (need_w) t.grad(w.id).map().noalias() += hv.middleCols(u * f, f).transpose() * dz;
      if (need_h) t.grad(h.id).map().middleCols(u * f, f).noalias() += dz * wv.transpose();
    }
  });
}

// ---------------------------------------------------------------- optimisation

void adam_step(AdamState& state, ParameterSet& params) {
  const auto& c = state.config;
  if (state.first_moment.size() != params.size()) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.first_moment.emplace_back(params[i].value.rows(), params[i].value.cols(), 0.0);
      state.second_moment.emplace_back(params[i].value.rows(), params[i].value.cols(), 0.0);
    }
    state.timestep = 0;
  }
  ++state.timestep;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.timestep));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.timestep));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (p.grad.size() != p.value.size()) continue;
    auto m = state.first_moment[i].map().array();
    auto v = state.second_moment[i].map().array();
    const auto g = p.grad.map().array();
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.square();
    p.value.map().array() -= c.step_size * (m / bc1) / ((v / bc2).sqrt() + c.eps);
  }
}

Var l1_penalty(Tape& tape, ParameterSet& params, double lambda) {
  Var total = tape.constant(Tensor::scalar(0.0));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].regularized) continue;
    total = add(total, sum(abs(tape.param(params[i]))));
  }
  return scale(total, lambda);
}

// ---------------------------------------------------------------- checkpoints

std::string parameters_to_json(const ParameterSet& params) {
  nlohmann::json j;
  j["format"] = "termnet-parameters";
  j["version"] = 1;
  auto arr = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    arr.push_back({{"name", p.name},
                   {"shape", {p.value.rows(), p.value.cols()}},
                   {"regularized", p.regularized},
                   {"values", p.value.data()}});
  }
  j["parameters"] = std::move(arr);
  return j.dump();
}

void parameters_from_json(ParameterSet& params, const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
  if (j.value("format", "") != "termnet-parameters") throw IoError("checkpoint: unrecognised format");
  if (j.value("version", 0) != 1) throw IoError("checkpoint: unsupported version");
  for (const auto& e : j.at("parameters")) {
    const auto name = e.at("name").get<std::string>();
    if (!params.contains(name)) throw IoError("checkpoint: unknown parameter " + name);
    Parameter& p = params.at(name);
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols())
      throw IoError("checkpoint: shape mismatch for " + name);
    auto values = e.at("values").get<std::vector<double>>();
    if (values.size() != p.value.size()) throw IoError("checkpoint: value count mismatch for " + name);
    p.value.data().assign(values.begin(), values.end());
  }
}

void save_parameters(const ParameterSet& params, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << parameters_to_json(params);
}

void load_parameters(ParameterSet& params, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  parameters_from_json(params, ss.str());
}

}  // namespace termnet::ad
