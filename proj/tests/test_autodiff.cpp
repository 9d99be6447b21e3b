#include <doctest.h>

#include "gradcases.hpp"
#include "termnet/autodiff.hpp"

using namespace termnet;
using namespace termnet::ad;

TEST_CASE("forward values") {
  Tape t;
  const Var z = t.constant(Tensor(1, 1, 0.0));
  CHECK(ad::tanh(z).value().item() == 0.0);
  CHECK(sigmoid(z).value().item() == 0.5);

  const Var a = t.constant(Tensor(2, 3, {1, 2, 3, 4, 5, 6}));
  const Var b = t.constant(Tensor(3, 1, {1, -1, 2}));
  const Var ab = matmul(a, b);
  REQUIRE(ab.rows() == 2);
  REQUIRE(ab.cols() == 1);
  CHECK(ab.value()(0, 0) == 1 - 2 + 6);
  CHECK(ab.value()(1, 0) == 4 - 5 + 12);

  const Var c = concat({a, t.constant(Tensor(2, 5, 1.0))}, 1);
  CHECK(c.rows() == 2);
  CHECK(c.cols() == 8);
  CHECK(c.value()(1, 2) == 6);
  CHECK(c.value()(1, 3) == 1);

  const Var row = t.constant(Tensor(1, 3, {10, 20, 30}));
  CHECK(add(a, row).value()(1, 2) == 36);
  CHECK(add(a, t.constant(Tensor::scalar(0.5))).value()(0, 0) == 1.5);
  CHECK(slice(a, 1, 1, 3).value()(1, 0) == 5);
  CHECK(clamp(t.constant(Tensor(1, 3, {-5, 0.2, 9})), -1, 1).value()(0, 2) == 1);
  CHECK(sd(t.constant(Tensor(1, 2, {1, 3}))).value().item() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("shape and domain errors") {
  Tape t, u;
  const Var a = t.constant(Tensor(2, 3));
  CHECK_THROWS_AS(matmul(a, a), InvalidArgument);
  CHECK_THROWS_AS(add(a, t.constant(Tensor(2, 2))), InvalidArgument);
  CHECK_THROWS_AS(hadamard(a, u.constant(Tensor(2, 3))), InvalidArgument);
  CHECK_THROWS_AS(ad::log(t.constant(Tensor(1, 1, 0.0))), InvalidArgument);
  CHECK_THROWS_AS(slice(a, 1, 2, 4), InvalidArgument);
  CHECK_THROWS_AS(t.backward(a), InvalidArgument);
  CHECK_THROWS_AS(Tensor(2, 2, std::vector<double>{1, 2, 3}), InvalidArgument);
}

TEST_CASE("backward of simple losses") {
  ParameterSet ps;
  auto& x = ps.add("x", 3, 2);
  x.value = Tensor(3, 2, {1, -2, 3, 0.5, 7, 1});
  ps.zero_grad();
  {
    Tape t;
    t.backward(sum(t.param(x)));
  }
  for (double g : x.grad.data()) CHECK(g == 1.0);

  // mean((W x - y)^2): gradient 2/n (W x - y) x'.
  std::mt19937_64 rng(3);
  auto& w = ps.add("w", 2, 3);
  w.value = gradcases::random_tensor(2, 3, rng);
  const Tensor xin = gradcases::random_tensor(3, 4, rng);
  const Tensor y = gradcases::random_tensor(2, 4, rng);
  ps.zero_grad();
  {
    Tape t;
    const Var r = sub(matmul(t.param(w), t.constant(xin)), t.constant(y));
    t.backward(mean(hadamard(r, r)));
  }
  const RowMatrix resid = w.value.map() * xin.map() - y.map();
  const RowMatrix closed = (2.0 / 8.0) * resid * xin.map().transpose();
  CHECK((w.grad.map() - closed).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("a parameter used twice accumulates both paths") {
  ParameterSet ps;
  auto& a = ps.add("a", 1, 1);
  a.value = Tensor::scalar(3.0);
  ps.zero_grad();
  Tape t;
  const Var p = t.param(a);
  CHECK(t.param(a).id == p.id);
  t.backward(hadamard(p, p));
  CHECK(a.grad.item() == 6.0);
}

TEST_CASE("operator gradients match central differences") {
  for (auto& c : gradcases::operator_cases(42)) {
    const auto r = oracle::check_gradients(*c.params, c.loss);
    INFO(c.name, " max relative error ", r.max_rel_error);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error <= 1e-4);
  }
}

TEST_CASE("lstm_cell matches the gate equations") {
  std::mt19937_64 rng(8);
  const Tensor z = gradcases::random_tensor(2, 12, rng, -2, 2);
  const Tensor c0 = gradcases::random_tensor(2, 3, rng);
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  for (bool verbatim : {false, true}) {
    Tape t;
    const Var hc = lstm_cell(t.constant(z), t.constant(c0), verbatim);
    REQUIRE(hc.cols() == 6);
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t j = 0; j < 3; ++j) {
        const double f = sig(z(r, j)), i = sig(z(r, 3 + j)), o = sig(z(r, 6 + j)), g = std::tanh(z(r, 9 + j));
        const double c = f * c0(r, j) + i * g;
        const double h = (verbatim ? c : o) * std::tanh(c);
        CHECK(hc.value()(r, 3 + j) == doctest::Approx(c).epsilon(1e-14));
        CHECK(hc.value()(r, j) == doctest::Approx(h).epsilon(1e-14));
      }
  }
}

TEST_CASE("adam") {
  ParameterSet ps;
  auto& p = ps.add("p", 2, 2);
  p.value = Tensor(2, 2, {1, -1, 0.5, 2});
  const Tensor before = p.value;
  ps.zero_grad();
  AdamState st;
  st.config.step_size = 1e-3;
  adam_step(st, ps);
  CHECK(p.value.data() == before.data());

  ParameterSet a, b;
  for (auto* s : {&a, &b}) {
    auto& q = s->add("q", 1, 3);
    q.value = Tensor(1, 3, {0.1, 0.2, 0.3});
    q.grad = Tensor(1, 3, {1, -1, 0.5});
  }
  AdamState sa, sb;
  for (int k = 0; k < 2; ++k) {
    adam_step(sa, a);
    adam_step(sb, b);
  }
  CHECK(a[0].value.data() == b[0].value.data());
  CHECK(sa.second_moment[0].data() == sb.second_moment[0].data());
}

TEST_CASE("adam first step moves each weight by the step size against its gradient sign") {
  ParameterSet ps;
  auto& p = ps.add("p", 1, 4);
  p.value = Tensor(1, 4, 0.0);
  p.grad = Tensor(1, 4, {0.3, -2.0, 1e-3, -50});
  AdamState st;
  adam_step(st, ps);
  const double sign[] = {1, -1, 1, -1};
  for (std::size_t i = 0; i < 4; ++i) CHECK(p.value[i] == doctest::Approx(-5e-4 * sign[i]).epsilon(1e-4));
}

TEST_CASE("l1 penalty") {
  ParameterSet ps;
  auto& w = ps.add("w", 2, 2);
  ps.add("b", 1, 2, false).value = Tensor(1, 2, 9.0);
  {
    Tape t;
    CHECK(l1_penalty(t, ps).value().item() == 0.0);
  }
  w.value = Tensor(2, 2, {2.0, 0, 0, 0});
  Tape t;
  CHECK(l1_penalty(t, ps).value().item() == doctest::Approx(2e-5).epsilon(1e-15));
  w.value = Tensor(2, 2, {2.0, -0.5, 0.25, -3});
  ps.zero_grad();
  Tape t2;
  t2.backward(l1_penalty(t2, ps, 1e-5));
  for (std::size_t i = 0; i < 4; ++i) CHECK(w.grad[i] == (w.value[i] > 0 ? 1e-5 : -1e-5));
  CHECK(ps.at("b").grad.map().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("parameter checkpoints round-trip") {
  std::mt19937_64 rng(1);
  ParameterSet ps;
  ps.add("a", 2, 3).value = gradcases::random_tensor(2, 3, rng);
  ps.add("b", 1, 1, false).value = Tensor::scalar(1.0 / 3.0);
  ParameterSet other;
  other.add("a", 2, 3);
  other.add("b", 1, 1, false);
  parameters_from_json(other, parameters_to_json(ps));
  CHECK(other.at("a").value.data() == ps.at("a").value.data());
  CHECK(other.at("b").value.item() == 1.0 / 3.0);
  ParameterSet wrong;
  wrong.add("c", 1, 1);
  CHECK_THROWS_AS(parameters_from_json(wrong, parameters_to_json(ps)), IoError);
  CHECK_THROWS_AS(parameters_from_json(other, "{not json"), IoError);

  const ParameterSet copy = ps;
  ps.at("a").value[0] = 99;
  CHECK(copy.at("a").value[0] != 99);
}
