#include <gtest/gtest.h>

#include <random>
#include <set>

#include "kws/arch.hpp"
#include "kws/error.hpp"
#include "kws/network.hpp"

namespace kws {
namespace {

Tensor random_input(std::size_t n, std::size_t t, std::size_t f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  Tensor x({n, 1, t, f});
  for (auto& v : x.data()) v = g(rng);
  return x;
}

TEST(Network, ParameterCountMatchesFootprint) {
  for (const auto& name : variant_names()) {
    const Network net(arch_by_name(name), 1);
    EXPECT_EQ(net.parameter_count(), footprint(arch_by_name(name), 98, 40).n_params) << name;
  }
}

TEST(Network, ProbabilitiesAreDistributions) {
  Network net(arch_by_name("res8-narrow"), 3);
  const Tensor p = net.forward(random_input(3, 98, 40, 1), Mode::eval);
  ASSERT_EQ(p.shape(), (Shape{3, 12}));
  for (std::size_t n = 0; n < 3; ++n) {
    double s = 0;
    for (std::size_t k = 0; k < 12; ++k) {
      EXPECT_GE(p[n * 12 + k], 0.0f);
      s += p[n * 12 + k];
    }
    EXPECT_NEAR(s, 1.0, 1e-5);
  }
}

TEST(Network, SeedDeterminesInit) {
  Network a(arch_by_name("res8-narrow"), 7), b(arch_by_name("res8-narrow"), 7), c(arch_by_name("res8-narrow"), 8);
  const Tensor x = random_input(2, 98, 40, 2);
  const Tensor pa = a.forward(x, Mode::eval), pb = b.forward(x, Mode::eval), pc = c.forward(x, Mode::eval);
  EXPECT_TRUE(std::equal(pa.data().begin(), pa.data().end(), pb.data().begin()));
  EXPECT_FALSE(std::equal(pa.data().begin(), pa.data().end(), pc.data().begin()));
}

TEST(Network, EveryParameterGetsAGradient) {
  Network net(arch_by_name("res8-narrow"), 1);
  std::vector<int> labels = {0, 5, 10, 11};
  net.forward_backward(random_input(4, 98, 40, 3), labels);
  std::set<std::string> names;
  for (auto& p : net.parameters()) {
    ASSERT_TRUE(p.tensor->has_grad()) << p.name;
    double norm = 0;
    for (float g : p.tensor->grad()) norm += double(g) * g;
    EXPECT_GT(norm, 0.0) << p.name;
    names.insert(p.name);
  }
  EXPECT_TRUE(names.count("conv0"));
  EXPECT_TRUE(names.count("softmax"));
  EXPECT_TRUE(names.count("block3.conv_b"));
}

TEST(Network, TrainModeUpdatesRunningStats) {
  Network net(arch_by_name("res8-narrow"), 1);
  std::vector<int> labels = {1, 2};
  auto bns = net.batch_norms();
  ASSERT_FALSE(bns.empty());
  const float before = bns[0].state->running_mean[0];
  net.forward_backward(random_input(2, 98, 40, 4), labels);
  EXPECT_NE(bns[0].state->running_mean[0], before);
  const float after = bns[0].state->running_mean[0];
  net.forward(random_input(2, 98, 40, 5), Mode::eval);
  EXPECT_EQ(bns[0].state->running_mean[0], after);
}

TEST(Network, ShortInputsThroughPooling) {
  Network net(arch_by_name("res8-narrow"), 1);
  EXPECT_THROW(net.forward(random_input(1, 3, 40, 1), Mode::eval), ShapeError);
}

TEST(Network, MakeBatchChecksShapes) {
  FeatureMatrix a{2, 3, std::vector<float>(6, 1.0f)}, b{3, 2, std::vector<float>(6, 1.0f)};
  const FeatureMatrix* both[] = {&a, &b};
  EXPECT_THROW(make_batch(both), ShapeError);
  const FeatureMatrix* one[] = {&a};
  EXPECT_EQ(make_batch(one).shape(), (Shape{1, 1, 2, 3}));
}

}  // namespace
}  // namespace kws
