#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fluxmut/errors.hpp"
#include "fluxmut/flow.hpp"
#include "flow_helpers.hpp"
#include "oracles.hpp"

using namespace fluxmut;
using testutil::make_identity_flow;
using testutil::make_small_flow;

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

TEST_CASE("reverse permutation composes to identity") {
  auto perm = reverse_permutation(7);
  Rng rng(2);
  Matrix x(3, 7);
  rng.fill_normal(x);
  Matrix twice = permute_columns(permute_columns(x, perm), perm);
  CHECK(twice.isApprox(x, 0.0));
  CHECK(invert_permutation(perm) == perm);
}

TEST_CASE("autoregressive masks: numerical Jacobian is lower-triangular") {
  Rng rng(3);
  for (Index dim : {1, 2, 5}) {
    MadeBlock block = make_made_block(dim, 2, {16, 16},
                                      testutil::identity_permutation(dim), 7.0,
                                      rng);
    Vector k(2);
    k << 0.3, -0.7;
    auto ar_inverse = [&](const Vector& w) {
      Matrix shift, scale;
      conditioner_forward(block, w.transpose(), k.transpose(), shift, scale);
      Vector v = (w - shift.row(0).transpose()).array() *
                 (-scale.row(0).transpose().array()).exp();
      return v;
    };
    Vector w0(dim);
    for (Index i = 0; i < dim; ++i) w0[i] = 0.2 * static_cast<double>(i) - 0.3;
    Matrix jac = oracle::numerical_jacobian(ar_inverse, w0);
    for (Index i = 0; i < dim; ++i)
      for (Index j = i + 1; j < dim; ++j)
        CHECK(std::abs(jac(i, j)) < 1e-8);
  }
}

TEST_CASE("conditions influence every output dimension") {
  Rng rng(5);
  const Index dim = 4;
  MadeBlock block = make_made_block(dim, 2, {16},
                                    testutil::identity_permutation(dim), 7.0,
                                    rng);
  Matrix x = Matrix::Zero(1, dim);
  Matrix k1(1, 2), k2(1, 2);
  k1 << 0.1, 0.9;
  k2 << 0.8, -0.4;
  Matrix s1, a1, s2, a2;
  conditioner_forward(block, x, k1, s1, a1);
  conditioner_forward(block, x, k2, s2, a2);
  for (Index i = 0; i < dim; ++i)
    CHECK(std::abs(s1(0, i) - s2(0, i)) > 1e-12);
}

TEST_CASE("identity flow density equals the standard normal") {
  FlowModel flow = make_identity_flow(2, 1, 2);
  Vector x = Vector::Zero(2);
  Vector k = Vector::Zero(1);
  CHECK(log_prob(flow, x, k) == doctest::Approx(-kLog2Pi).epsilon(1e-12));

  // Identity flow: sample and inverse are the identity map.
  Rng rng(7);
  Matrix z(5, 2), cond(5, 1);
  rng.fill_normal(z);
  rng.fill_normal(cond);
  CHECK(sample(flow, z, cond).isApprox(z, 0.0));
  CHECK(inverse(flow, z, cond).isApprox(z, 0.0));
}

TEST_CASE("constant-affine flow closed form") {
  FlowModel flow = make_identity_flow(1, 1, 1);
  flow.blocks[0].shift_head.bias[0] = 1.0;
  flow.blocks[0].scale_head.bias[0] = std::log(2.0);

  Vector x(1), k(1);
  x << 3.0;
  k << 0.0;
  const double expected = -0.5 * kLog2Pi - 0.5 * 1.0 - std::log(2.0);
  CHECK(log_prob(flow, x, k) == doctest::Approx(expected).epsilon(1e-12));

  Matrix z(1, 1), cond(1, 1);
  z << 1.0;
  cond << 0.0;
  CHECK(sample(flow, z, cond)(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
  Matrix x3(1, 1);
  x3 << 3.0;
  CHECK(inverse(flow, x3, cond)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("log-det term matches the numerical Jacobian of the inverse map") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const Index dim = 3;
    FlowModel flow = make_small_flow(dim, 2, 3, seed);
    Vector k(2);
    k << 0.4, 0.6;
    Matrix cond = k.transpose();

    Rng rng(seed ^ 0xABCu);
    Vector x(dim);
    for (Index i = 0; i < dim; ++i) x[i] = rng.normal();

    auto inv_map = [&](const Vector& v) {
      return Vector(inverse(flow, v.transpose(), cond).row(0).transpose());
    };
    Matrix jac = oracle::numerical_jacobian(inv_map, x);
    const double num_ldj = std::log(std::abs(jac.determinant()));

    const double lp = log_prob(flow, x, k);
    Vector z = inverse(flow, x.transpose(), cond).row(0).transpose();
    const double base = -0.5 * static_cast<double>(dim) * kLog2Pi -
                        0.5 * z.squaredNorm();
    const double analytic_ldj = lp - base;
    CHECK(std::abs(analytic_ldj - num_ldj) < 1e-4);
  }
}

TEST_CASE("sample(inverse(x)) round-trips to 1e-6") {
  const Index dim = 6;
  FlowModel flow = make_small_flow(dim, 2, 4, 21);
  Rng rng(22);
  Matrix x(1000, dim), cond(1000, 2);
  rng.fill_normal(x);
  rng.fill_uniform(cond, 0.0, 1.0);
  Matrix z = inverse(flow, x, cond);
  Matrix back = sample(flow, z, cond);
  CHECK((back - x).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("density integrates to one on a 2-D grid") {
  const Index dim = 2;
  FlowModel flow = make_small_flow(dim, 1, 3, 31);
  Vector k(1);
  k << 0.5;

  // Empirical support from samples, then a +-6 sigma grid.
  Rng rng(32);
  Matrix z(4000, dim), cond(4000, 1);
  rng.fill_normal(z);
  cond.setConstant(0.5);
  Matrix samples = sample(flow, z, cond);
  Vector mean = samples.colwise().mean();
  Vector sd(dim);
  for (Index d = 0; d < dim; ++d)
    sd[d] = std::sqrt((samples.col(d).array() - mean[d]).square().mean());

  const Index n_cells = 220;
  Vector lo = mean - 6.0 * sd, hi = mean + 6.0 * sd;
  const double dx = (hi[0] - lo[0]) / n_cells;
  const double dy = (hi[1] - lo[1]) / n_cells;
  Matrix pts(n_cells * n_cells, dim);
  Index r = 0;
  for (Index i = 0; i < n_cells; ++i)
    for (Index j = 0; j < n_cells; ++j, ++r) {
      pts(r, 0) = lo[0] + (static_cast<double>(i) + 0.5) * dx;
      pts(r, 1) = lo[1] + (static_cast<double>(j) + 0.5) * dy;
    }
  Matrix kk = Matrix::Constant(pts.rows(), 1, 0.5);
  Vector lp = log_prob(flow, pts, kk);
  const double mass = lp.array().exp().sum() * dx * dy;
  CHECK(mass == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("nll of the identity flow on standard-normal data") {
  FlowModel flow = make_identity_flow(2, 1, 2);
  Rng rng(41);
  const Index n = 4000;
  Matrix x(n, 2), cond(n, 1);
  rng.fill_normal(x);
  cond.setZero();
  NllResult res = nll_loss(flow, x, cond);
  const double expected = 1.0 + kLog2Pi;  // Gaussian entropy, D.5 + D/2 log2pi
  // 3 sigma of the sample mean of 0.5*||z||^2 + log 2 pi.
  Vector per = 0.5 * x.array().square().rowwise().sum();
  const double sd = std::sqrt((per.array() - per.mean()).square().mean() /
                              static_cast<double>(n));
  CHECK(std::abs(res.loss - expected) < 3.0 * sd + 1e-9);
}

TEST_CASE("nll gradients match finite differences") {
  for (std::uint64_t seed : {51u, 52u}) {
    const Index dim = 3;
    FlowModel flow = make_small_flow(dim, 2, 2, seed);
    Rng rng(seed ^ 0xF00u);
    Matrix x(6, dim), cond(6, 2);
    rng.fill_normal(x);
    rng.fill_uniform(cond, 0.0, 1.0);

    auto loss_value = [&]() { return nll_loss(flow, x, cond).loss; };
    NllResult res = nll_loss(flow, x, cond);

    for (std::size_t b = 0; b < flow.blocks.size(); ++b) {
      auto& block = flow.blocks[b];
      auto& bg = res.grads.blocks[b];
      for (std::size_t l = 0; l < block.hidden.size(); ++l) {
        auto& W = block.hidden[l].weights;
        for (Index i = 0; i < W.rows(); i += 3)
          for (Index j = 0; j < W.cols(); j += 3) {
            const double fd = oracle::central_difference(loss_value, &W(i, j));
            CHECK(oracle::rel_err(bg.hidden_w[l](i, j), fd) < 1e-4);
          }
      }
      for (Index i = 0; i < block.shift_head.weights.rows(); i += 2)
        for (Index j = 0; j < block.shift_head.weights.cols(); ++j) {
          double fd = oracle::central_difference(
              loss_value, &block.shift_head.weights(i, j));
          CHECK(oracle::rel_err(bg.shift_w(i, j), fd) < 1e-4);
          fd = oracle::central_difference(loss_value,
                                          &block.scale_head.weights(i, j));
          CHECK(oracle::rel_err(bg.scale_w(i, j), fd) < 1e-4);
        }
      for (Index j = 0; j < dim; ++j) {
        double fd =
            oracle::central_difference(loss_value, &block.shift_head.bias[j]);
        CHECK(oracle::rel_err(bg.shift_b[j], fd) < 1e-4);
        fd = oracle::central_difference(loss_value, &block.scale_head.bias[j]);
        CHECK(oracle::rel_err(bg.scale_b[j], fd) < 1e-4);
      }
    }
  }
}

TEST_CASE("degenerate batch of one repeated point stays finite") {
  FlowModel flow = make_small_flow(2, 1, 2, 61);
  Matrix x(4, 2), cond(4, 1);
  for (Index i = 0; i < 4; ++i) {
    x.row(i) << 0.7, -0.2;
    cond(i, 0) = 0.5;
  }
  NllResult res = nll_loss(flow, x, cond);
  CHECK(std::isfinite(res.loss));
  for (const auto& bg : res.grads.blocks) {
    CHECK(bg.shift_w.allFinite());
    CHECK(bg.scale_w.allFinite());
    for (const auto& hw : bg.hidden_w) CHECK(hw.allFinite());
  }
  CHECK_THROWS_AS(nll_loss(flow, Matrix(0, 2), Matrix(0, 1)), DataError);
}

TEST_CASE("training on conditional data improves the fit") {
  // Data: x ~ N(k, 1) in one dimension with k in [0, 4].
  Rng rng(71);
  const Index n = 3000;
  Matrix x(n, 1), cond(n, 1);
  for (Index i = 0; i < n; ++i) {
    cond(i, 0) = rng.uniform(0.0, 4.0);
    x(i, 0) = cond(i, 0) + rng.normal();
  }
  FlowConfig cfg;
  cfg.n_blocks = 2;
  cfg.hidden = {16};
  cfg.learning_rate = 5e-3;
  cfg.batch_size = 256;
  cfg.max_epochs = 40;
  cfg.patience = 40;
  cfg.seed = 72;
  FlowModel flow = train_flow(x, cond, cfg);

  // Best-checkpoint sequence of validation losses is non-increasing.
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_seq;
  for (double v : flow.val_loss_history) {
    if (v < best) {
      best = v;
      best_seq.push_back(v);
    }
  }
  REQUIRE(best_seq.size() >= 2);
  for (std::size_t i = 1; i < best_seq.size(); ++i)
    CHECK(best_seq[i] <= best_seq[i - 1]);

  // Terminal fit beats the unconditional Gaussian entropy bound by margin:
  // the conditional structure is learnable only through k.
  const double unconditional_nll = 0.5 * (1.0 + kLog2Pi) +
                                   0.5 * std::log(1.0 + 16.0 / 12.0);
  CHECK(best < unconditional_nll);
}

TEST_CASE("overflow is reported with the failing block") {
  FlowModel flow = make_identity_flow(2, 1, 2);
  Matrix x(1, 2), cond(1, 1);
  x << std::numeric_limits<double>::infinity(), 0.0;
  cond << 0.0;
  CHECK_THROWS_AS(log_prob(flow, x, cond), NumericError);
}
