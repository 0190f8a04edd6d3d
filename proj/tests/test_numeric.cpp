#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fluxmut/adam.hpp"
#include "fluxmut/errors.hpp"
#include "fluxmut/loss.hpp"
#include "fluxmut/net.hpp"
#include "fluxmut/rng.hpp"
#include "oracles.hpp"

using namespace fluxmut;

TEST_CASE("huber loss branch values") {
  Vector r1(1);
  r1 << 0.5;
  CHECK(huber_loss(r1, 1.0).loss == doctest::Approx(0.125));

  Vector r0(1);
  r0 << 0.0;
  auto res0 = huber_loss(r0, 1.0);
  CHECK(res0.loss == 0.0);
  CHECK(res0.grad[0] == 0.0);

  Vector r2(1);
  r2 << 2.0;
  auto res2 = huber_loss(r2, 1.0);
  CHECK(res2.loss == doctest::Approx(1.5));
  CHECK(res2.grad[0] == 1.0);

  Vector rn(1);
  rn << -2.0;
  CHECK(huber_loss(rn, 1.0).grad[0] == -1.0);
}

TEST_CASE("huber loss is mean over elements") {
  Vector r(2);
  r << 0.5, 2.0;
  CHECK(huber_loss(r, 1.0).loss == doctest::Approx(0.5 * (0.125 + 1.5)));
}

TEST_CASE("huber continuity at the branch point") {
  const double delta = 1.3;
  auto loss_at = [&](double r) {
    Vector v(1);
    v << r;
    return huber_loss(v, delta).loss;
  };
  auto grad_at = [&](double r) {
    Vector v(1);
    v << r;
    return huber_loss(v, delta).grad[0];
  };
  CHECK(std::abs(loss_at(delta + 1e-9) - loss_at(delta - 1e-9)) < 1e-8);
  CHECK(std::abs(grad_at(delta + 1e-9) - grad_at(delta - 1e-9)) < 1e-8);
}

TEST_CASE("huber rejects bad input") {
  Vector r(1);
  r << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(huber_loss(r, 1.0), NumericError);
  Vector ok(1);
  ok << 1.0;
  CHECK_THROWS_AS(huber_loss(ok, 0.0), ConfigError);
}

TEST_CASE("forward identity and degenerate affine") {
  LayerStack stack;
  DenseLayer layer;
  layer.weights = Matrix::Identity(3, 3);
  layer.bias = Vector::Zero(3);
  layer.activation = Activation::Linear;
  stack.layers.push_back(layer);

  Rng rng(5);
  Matrix x(2, 3);
  rng.fill_normal(x);
  CHECK(forward(stack, x).isApprox(x));

  stack.layers[0].weights.setZero();
  stack.layers[0].bias << 1.0, 2.0, 3.0;
  Matrix out = forward(stack, x);
  for (Index i = 0; i < out.rows(); ++i) {
    CHECK(out(i, 0) == 1.0);
    CHECK(out(i, 1) == 2.0);
    CHECK(out(i, 2) == 3.0);
  }
}

TEST_CASE("forward shape contract on a random 2-layer stack") {
  Rng rng(11);
  LayerStack stack = make_stack(4, {7}, 5, Activation::Tanh,
                                Activation::Linear, rng);
  Matrix x(3, 4);
  rng.fill_normal(x);
  Matrix out = forward(stack, x);
  CHECK(out.rows() == 3);
  CHECK(out.cols() == 5);
  CHECK(out.allFinite());
  CHECK(stack.parameter_count() == (4 * 7 + 7) + (7 * 5 + 5));

  Matrix bad(3, 5);
  bad.setZero();
  CHECK_THROWS_AS(forward(stack, bad), DimensionError);
}

TEST_CASE("backward zero loss gradient and analytic single layer") {
  Rng rng(7);
  LayerStack stack = make_stack(3, {4}, 2, Activation::Tanh,
                                Activation::Linear, rng);
  Matrix x(5, 3);
  rng.fill_normal(x);
  ForwardTape tape;
  forward(stack, x, &tape);
  StackGrads grads = backward(stack, tape, Matrix::Zero(5, 2));
  for (const auto& gw : grads.weights) CHECK(gw.isZero(0.0));
  for (const auto& gb : grads.bias) CHECK(gb.isZero(0.0));

  // Single affine layer, squared loss, one sample: grad_W = 2 x^T (Wx+b-y).
  LayerStack affine;
  affine.layers.push_back(make_dense_layer(3, 2, Activation::Linear, rng));
  Matrix xs(1, 3);
  rng.fill_normal(xs);
  Matrix y(1, 2);
  rng.fill_normal(y);
  ForwardTape t2;
  Matrix out = forward(affine, xs, &t2);
  Matrix dloss = 2.0 * (out - y);
  StackGrads g2 = backward(affine, t2, dloss);
  Matrix expected = xs.transpose() * (2.0 * (out - y));
  CHECK(g2.weights[0].isApprox(expected, 1e-12));
  CHECK(g2.bias[0].isApprox((2.0 * (out - y)).colwise().sum().transpose(), 1e-12));
}

TEST_CASE("backward matches central finite differences on a 3-layer tanh stack") {
  Rng rng(13);
  LayerStack stack = make_stack(4, {6, 5}, 3, Activation::Tanh,
                                Activation::Linear, rng);
  Matrix x(4, 4);
  rng.fill_normal(x);
  Matrix target(4, 3);
  rng.fill_normal(target);

  auto loss_value = [&]() {
    Matrix out = forward(stack, x);
    return 0.5 * (out - target).squaredNorm();
  };

  ForwardTape tape;
  Matrix out = forward(stack, x, &tape);
  StackGrads grads = backward(stack, tape, out - target);

  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    auto& layer = stack.layers[l];
    for (Index i = 0; i < layer.weights.rows(); ++i)
      for (Index j = 0; j < layer.weights.cols(); ++j) {
        const double fd =
            oracle::central_difference(loss_value, &layer.weights(i, j));
        CHECK(oracle::rel_err(grads.weights[l](i, j), fd) < 1e-4);
      }
    for (Index j = 0; j < layer.bias.size(); ++j) {
      const double fd = oracle::central_difference(loss_value, &layer.bias[j]);
      CHECK(oracle::rel_err(grads.bias[l][j], fd) < 1e-4);
    }
  }
}

TEST_CASE("backward gradient check for leaky-rectifier and huber loss") {
  Rng rng(29);
  for (int trial = 0; trial < 5; ++trial) {
    LayerStack stack = make_stack(3, {5}, 3, Activation::LeakyRelu,
                                  Activation::Linear, rng);
    Matrix x(6, 3);
    rng.fill_normal(x);
    Matrix target(6, 3);
    rng.fill_normal(target);
    const double delta = 0.7;

    auto loss_value = [&]() {
      Matrix diff = forward(stack, x) - target;
      Eigen::Map<const Vector> r(diff.data(), diff.size());
      return huber_loss(Vector(r), delta).loss;
    };

    ForwardTape tape;
    Matrix out = forward(stack, x, &tape);
    Matrix diff = out - target;
    Eigen::Map<const Vector> rvec(diff.data(), diff.size());
    auto hub = huber_loss(Vector(rvec), delta);
    Matrix dloss =
        Eigen::Map<const Matrix>(hub.grad.data(), diff.rows(), diff.cols()) /
        static_cast<double>(diff.size());
    StackGrads grads = backward(stack, tape, dloss);

    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
      auto& layer = stack.layers[l];
      for (Index i = 0; i < layer.weights.rows(); ++i)
        for (Index j = 0; j < layer.weights.cols(); ++j) {
          const double fd =
              oracle::central_difference(loss_value, &layer.weights(i, j));
          CHECK(oracle::rel_err(grads.weights[l](i, j), fd) < 1e-4);
        }
    }
  }
}

TEST_CASE("stale tape rejected") {
  Rng rng(31);
  LayerStack a = make_stack(3, {4}, 2, Activation::Tanh, Activation::Linear, rng);
  LayerStack b = make_stack(3, {6}, 2, Activation::Tanh, Activation::Linear, rng);
  Matrix x(2, 3);
  rng.fill_normal(x);
  ForwardTape tape;
  forward(a, x, &tape);
  CHECK_THROWS_AS(backward(b, tape, Matrix::Zero(2, 2)), UsageError);
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
  Rng rng(17);
  LayerStack stack = make_stack(2, {3}, 2, Activation::Tanh,
                                Activation::Linear, rng);
  LayerStack before = stack;
  OptimizerState opt = make_adam_state(stack, 1e-3);
  StackGrads grads;
  for (auto& l : stack.layers) {
    grads.weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
    grads.bias.push_back(Vector::Zero(l.bias.size()));
  }
  adam_step(opt, stack, grads);
  CHECK(opt.step == 1);
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    CHECK(stack.layers[l].weights.isApprox(before.layers[l].weights, 0.0));
    CHECK(stack.layers[l].bias.isApprox(before.layers[l].bias, 0.0));
  }
}

TEST_CASE("adam first step approximates -lr * sign(grad)") {
  LayerStack stack;
  DenseLayer layer;
  layer.weights = Matrix::Zero(1, 2);
  layer.bias = Vector::Zero(2);
  stack.layers.push_back(layer);
  OptimizerState opt = make_adam_state(stack, 0.05);

  StackGrads grads;
  Matrix g(1, 2);
  g << 3.0, -0.2;
  grads.weights.push_back(g);
  grads.bias.push_back(Vector::Zero(2));
  adam_step(opt, stack, grads);
  CHECK(stack.layers[0].weights(0, 0) == doctest::Approx(-0.05).epsilon(1e-6));
  CHECK(stack.layers[0].weights(0, 1) == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("adam descends a scalar quadratic") {
  // f(w) = w^2 from w=1 at lr=0.01: |w| well below 0.9 after 100 steps.
  LayerStack stack;
  DenseLayer layer;
  layer.weights = Matrix::Constant(1, 1, 1.0);
  layer.bias = Vector::Zero(1);
  stack.layers.push_back(layer);
  OptimizerState opt = make_adam_state(stack, 0.01);
  for (int i = 0; i < 100; ++i) {
    StackGrads grads;
    grads.weights.push_back(Matrix::Constant(1, 1, 2.0 * stack.layers[0].weights(0, 0)));
    grads.bias.push_back(Vector::Zero(1));
    adam_step(opt, stack, grads);
  }
  CHECK(std::abs(stack.layers[0].weights(0, 0)) < 0.9);
  CHECK(opt.step == 100);
}

TEST_CASE("adam shape mismatch raises") {
  Rng rng(3);
  LayerStack stack = make_stack(2, {}, 2, Activation::Tanh, Activation::Linear, rng);
  OptimizerState opt = make_adam_state(stack, 1e-3);
  StackGrads grads;
  grads.weights.push_back(Matrix::Zero(3, 3));
  grads.bias.push_back(Vector::Zero(2));
  CHECK_THROWS_AS(adam_step(opt, stack, grads), DimensionError);
}

TEST_CASE("seeded training pieces are bit-deterministic") {
  auto build = [] {
    Rng rng(99);
    LayerStack stack = make_stack(3, {4}, 2, Activation::Tanh,
                                  Activation::Linear, rng);
    OptimizerState opt = make_adam_state(stack, 1e-3);
    Matrix x(4, 3);
    rng.fill_normal(x);
    for (int step = 0; step < 25; ++step) {
      ForwardTape tape;
      Matrix out = forward(stack, x, &tape);
      StackGrads grads = backward(stack, tape, out);
      adam_step(opt, stack, grads);
    }
    return stack;
  };
  LayerStack a = build();
  LayerStack b = build();
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK((a.layers[l].weights.array() == b.layers[l].weights.array()).all());
    CHECK((a.layers[l].bias.array() == b.layers[l].bias.array()).all());
  }
}
