#include <doctest.h>

#include <cmath>
#include <memory>

#include "metaenc/errors.hpp"
#include "metaenc/nngraph.hpp"
#include "metaenc/rng.hpp"
#include "metaenc/selfcheck.hpp"

using namespace metaenc;

namespace {

std::shared_ptr<const NetSpec> make(NetSpec spec) {
  return std::make_shared<const NetSpec>(std::move(spec));
}

}  // namespace

TEST_CASE("activation derivatives agree with central differences") {
  for (Activation a : {Activation::Identity, Activation::Tanh, Activation::ReLU, Activation::Sin,
                       Activation::Cos}) {
    for (double z : {-1.7, -0.3, 0.4, 2.2}) {
      const double h = 1e-6;
      const double fd = (activate(a, z + h) - activate(a, z - h)) / (2 * h);
      CHECK(activate_derivative(a, z) == doctest::Approx(fd).epsilon(1e-7));
    }
    CHECK(activation_from_string(to_string(a)) == a);
  }
  CHECK(activate_derivative(Activation::ReLU, 0.0) == 0.0);
  CHECK_THROWS_AS(activation_from_string("softplus"), ContractError);
}

TEST_CASE("dense parameter count and canonical slot order") {
  const NetSpec spec = NetSpec::dense_uniform({2, 3, 1}, {Activation::Tanh, Activation::Identity});
  CHECK(spec.param_count() == 13);
  CHECK(*spec.weight_slot(0, 0, 0) == 0);
  CHECK(*spec.weight_slot(0, 0, 1) == 1);
  CHECK(*spec.weight_slot(0, 2, 1) == 5);
  CHECK(*spec.bias_slot(0, 0) == 6);
  CHECK(*spec.weight_slot(1, 0, 2) == 11);
  CHECK(*spec.bias_slot(1, 0) == 12);
}

TEST_CASE("removed edges and frozen entries take no slot") {
  NetSpec spec = NetSpec::dense_uniform({2, 2, 1}, {Activation::Identity, Activation::Identity});
  spec.remove_edge(0, 1, 0).freeze_weight(0, 0, 1, 0.75).freeze_bias(1, 0, -2.0);
  CHECK(spec.param_count() == 9 - 3);
  CHECK_FALSE(spec.weight_slot(0, 1, 0).has_value());
  CHECK_FALSE(spec.weight_slot(0, 0, 1).has_value());
  CHECK_FALSE(spec.bias_slot(1, 0).has_value());
  const std::vector<double> params(spec.param_count(), 0.0);
  CHECK(spec.weight_value(params, 0, 1, 0) == 0.0);
  CHECK(spec.weight_value(params, 0, 0, 1) == 0.75);
  CHECK(spec.bias_value(params, 1, 0) == -2.0);
  CHECK_THROWS_AS(spec.freeze_weight(0, 1, 0, 1.0), ContractError);
}

TEST_CASE("forward of a hand-built affine net") {
  // y = 2 * (x0 - x1 + 1) + 0.5
  auto spec = make(NetSpec::dense_uniform({2, 1, 1}, {Activation::Identity, Activation::Identity}));
  const NetModel m(spec, {1.0, -1.0, 1.0, 2.0, 0.5});
  const double x[] = {3.0, 1.0};
  CHECK(m.forward(x)[0] == doctest::Approx(6.5));
  const double bad[] = {1.0};
  CHECK_THROWS_AS(m.forward(bad), ContractError);
}

TEST_CASE("forward_range composes to forward") {
  auto spec = make(NetSpec::dense_uniform({3, 4, 2, 3}, {Activation::Tanh, Activation::Sin,
                                                         Activation::Identity}));
  NetModel m(spec);
  m.init_uniform(5);
  const std::vector<double> x{0.3, -0.7, 1.1};
  const auto mid = m.forward_range(x, 0, 1);
  const auto full = m.forward(x);
  const auto composed = m.forward_range(mid, 1, 3);
  REQUIRE(composed.size() == full.size());
  for (std::size_t i = 0; i < full.size(); ++i) CHECK(composed[i] == full[i]);
}

TEST_CASE("reverse-mode gradients match finite differences on random nets") {
  const CheckResult r = check_gradients(30, 11);
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("first Adam step moves each parameter by lr against its gradient sign") {
  auto spec = make(NetSpec::dense_uniform({1, 2}, {Activation::Identity}));
  NetModel m(spec, {0.5, -0.5, 1.0, 2.0});
  const std::vector<double> g{3.0, -0.01, 0.0, 1e3};
  AdamState state;
  const AdamHyper hyper{0.1, 0.9, 0.999, 1e-8};
  adam_step(m, g, state, hyper);
  // Bias-corrected moments after one step are g and g^2.
  const std::vector<double> before{0.5, -0.5, 1.0, 2.0};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double expected = before[i] - 0.1 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(m.params()[i] == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK(state.step == 1);
}

TEST_CASE("frozen parameters survive training unchanged") {
  NetSpec raw = NetSpec::dense_uniform({2, 2, 1}, {Activation::Tanh, Activation::Identity});
  raw.freeze_weight(0, 1, 1, 0.25).freeze_bias(0, 0, -0.125);
  auto spec = make(std::move(raw));
  NetModel m(spec);
  m.init_uniform(3);
  AdamState state;
  Rng rng(9);
  for (int step = 0; step < 50; ++step) {
    const std::vector<double> x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const GradTape tape = m.forward_with_tape(x);
    const double err = tape.output()[0] - (x[0] * x[1]);
    const double up[] = {2 * err};
    adam_step(m, tape.grad_loss(up), state, AdamHyper{0.05});
  }
  CHECK(spec->weight_value(m.params(), 0, 1, 1) == 0.25);
  CHECK(spec->bias_value(m.params(), 0, 0) == -0.125);
}

TEST_CASE("non-finite parameters are rejected") {
  auto spec = make(NetSpec::dense_uniform({1, 1}, {Activation::Identity}));
  CHECK_THROWS_AS(NetModel(spec, {std::nan(""), 0.0}), NumericError);
  CHECK_THROWS_AS(NetModel(spec, {1.0}), ContractError);
}
