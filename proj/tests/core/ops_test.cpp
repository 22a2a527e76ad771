#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "checks.hpp"
#include "kws/error.hpp"
#include "kws/ops.hpp"
#include "kws/optim.hpp"

namespace kws {
namespace {

TEST(Conv, MatchesNestedLoopsForEveryDilation) {
  for (int d : {1, 2, 4, 8, 16}) {
    EXPECT_LT(testing::conv_oracle_error({d, d}, 6, 100 + d), 1e-6) << "d=" << d;
    EXPECT_LT(testing::conv_oracle_error({1, d}, 3, 200 + d), 1e-6) << "d_h=" << d;
  }
}

TEST(Conv, IdentityKernel) {
  Tensor x({1, 1, 3, 4});
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = float(i);
  ConvParams p{Tensor({1, 1, 3, 3}), {1, 1}};
  p.weights.at(0, 0, 1, 1) = 1.0f;
  EXPECT_EQ(conv2d(x, p).data()[5], 5.0f);
  // A dilation wider than the input only sees the centre tap.
  p.weights.at(0, 0, 0, 0) = 7.0f;
  p.dilation = {8, 8};
  const Tensor y = conv2d(x, p);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Conv, ShapeErrors) {
  ConvParams p{Tensor({2, 3, 3, 3}), {1, 1}};
  EXPECT_THROW(conv2d(Tensor({1, 2, 4, 4}), p), ShapeError);
  EXPECT_THROW(conv2d(Tensor({2, 4, 4}), p), ShapeError);
}

TEST(BatchNorm, TrainStatistics) {
  Tensor x({4, 1, 1, 1}, std::vector<float>{1, 2, 3, 4});
  BatchNormState s(1);
  const Tensor y = batch_norm(x, s, Mode::train);
  const double var = 1.25;  // biased
  EXPECT_NEAR(y[0], (1 - 2.5) / std::sqrt(var + 1e-5), 1e-5);
  EXPECT_NEAR(s.running_mean[0], 0.25, 1e-6);
  EXPECT_NEAR(s.running_var[0], 0.9 + 0.1 * (5.0 / 3.0), 1e-6);  // unbiased into the running estimate
}

TEST(BatchNorm, EvalUsesRunningStats) {
  Tensor x({1, 2, 1, 1}, std::vector<float>{3, 3});
  BatchNormState s(2);
  s.running_mean = {1, 3};
  s.running_var = {4, 1};
  const Tensor y = batch_norm(x, s, Mode::eval);
  EXPECT_NEAR(y[0], 2 / std::sqrt(4 + 1e-5), 1e-6);
  EXPECT_NEAR(y[1], 0, 1e-6);
  EXPECT_EQ(s.running_mean[0], 1.0f);
}

TEST(Pool, DropsPartialWindows) {
  Tensor x({1, 1, 5, 3});
  for (std::size_t i = 0; i < x.numel(); ++i) x[i] = float(i);
  const Tensor y = avg_pool(x, {2, 2});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 1}));
  EXPECT_FLOAT_EQ(y[0], (0 + 1 + 3 + 4) / 4.0f);
  EXPECT_FLOAT_EQ(y[1], (6 + 7 + 9 + 10) / 4.0f);
  EXPECT_THROW(avg_pool(x, {6, 1}), ShapeError);
}

TEST(Pool, Global) {
  Tensor x({1, 2, 2, 2}, std::vector<float>{1, 2, 3, 4, 10, 10, 10, 10});
  const Tensor y = global_avg_pool(x);
  EXPECT_EQ(y.shape(), (Shape{1, 2}));
  EXPECT_FLOAT_EQ(y[0], 2.5f);
  EXPECT_FLOAT_EQ(y[1], 10.0f);
}

TEST(Softmax, RowsSumToOneAndLoss) {
  Tensor x({2, 3}, std::vector<float>{1, 0, -1, 100, 200, 300});
  Tensor w({3, 4});
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = 0.1f * float(i % 5);
  const Tensor p = linear_softmax(x, w);
  for (std::size_t n = 0; n < 2; ++n) {
    double s = 0;
    for (std::size_t k = 0; k < 4; ++k) s += p[n * 4 + k];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  Tensor zw({3, 4});
  std::vector<int> labels = {0, 3};
  EXPECT_NEAR(linear_softmax_xent(x, zw, labels).loss, std::log(4.0), 1e-6);
}

TEST(Relu, ForwardBackward) {
  Tensor x({4}, std::vector<float>{-1, 0, 2, -3});
  const Tensor y = relu(x);
  EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()), (std::vector<float>{0, 0, 2, 0}));
  const Tensor g = relu_backward(Tensor({4}, 1.0f), y);
  EXPECT_EQ(std::vector<float>(g.data().begin(), g.data().end()), (std::vector<float>{0, 0, 1, 0}));
}

TEST(Sgd, MomentumAndDecay) {
  Tensor p({2}, std::vector<float>{1.0f, -2.0f});
  p.ensure_grad();
  p.grad()[0] = 0.5f;
  p.grad()[1] = 0.0f;
  std::vector<std::vector<float>> v(1, std::vector<float>(2, 0.0f));
  Tensor* params[] = {&p};
  const SgdConfig cfg{0.1, 0.9, 0.01};
  sgd_step(params, v, cfg);
  EXPECT_NEAR(v[0][0], 0.5 + 0.01, 1e-7);
  EXPECT_NEAR(p[0], 1.0 - 0.1 * 0.51, 1e-6);
  sgd_step(params, v, cfg);
  EXPECT_NEAR(v[0][0], 0.9 * 0.51 + 0.5 + 0.01 * 0.949, 1e-6);
  EXPECT_NEAR(p[0], 0.949 - 0.1 * (0.9 * 0.51 + 0.5 + 0.01 * 0.949), 1e-6);
}

TEST(Sgd, WeightDecayShrinksWithZeroGradient) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<float> u(-3.0f, 3.0f);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor p({5});
    for (auto& x : p.data()) x = u(rng);
    p.ensure_grad();
    std::vector<std::vector<float>> v(1, std::vector<float>(5, 0.0f));
    Tensor* params[] = {&p};
    std::vector<float> mag(5);
    for (std::size_t i = 0; i < 5; ++i) mag[i] = std::abs(p[i]);
    for (int step = 0; step < 10; ++step) {
      p.zero_grad();
      sgd_step(params, v, {0.1, 0.9, 1e-2});
      for (std::size_t i = 0; i < 5; ++i) {
        ASSERT_LT(std::abs(p[i]), mag[i]) << "step " << step;
        mag[i] = std::abs(p[i]);
      }
    }
  }
}

TEST(Sgd, NonFiniteGradientLeavesParamsUntouched) {
  Tensor a({1}, 1.0f), b({1}, 2.0f);
  a.ensure_grad();
  b.ensure_grad();
  a.grad()[0] = 1.0f;
  b.grad()[0] = NAN;
  std::vector<std::vector<float>> v(2, std::vector<float>(1, 0.0f));
  Tensor* params[] = {&a, &b};
  EXPECT_THROW(sgd_step(params, v, {}), NumericError);
  EXPECT_EQ(a[0], 1.0f);
  EXPECT_EQ(v[0][0], 0.0f);
}

}  // namespace
}  // namespace kws
