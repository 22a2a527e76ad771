#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "kws/error.hpp"
#include "kws/evaluation.hpp"

namespace kws {
namespace {

Tensor random_scores(std::size_t n, std::mt19937_64& rng) {
  Tensor s({n, 12});
  std::gamma_distribution<float> g(1.0f, 1.0f);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0;
    for (std::size_t k = 0; k < 12; ++k) sum += s[i * 12 + k] = g(rng);
    for (std::size_t k = 0; k < 12; ++k) s[i * 12 + k] = static_cast<float>(s[i * 12 + k] / sum);
  }
  return s;
}

// Scores that lean towards the true class by `skill`.
Tensor informed_scores(const std::vector<int>& labels, double skill, std::mt19937_64& rng) {
  Tensor s = random_scores(labels.size(), rng);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double sum = 0;
    s[i * 12 + labels[i]] += static_cast<float>(skill);
    for (std::size_t k = 0; k < 12; ++k) sum += s[i * 12 + k];
    for (std::size_t k = 0; k < 12; ++k) s[i * 12 + k] = static_cast<float>(s[i * 12 + k] / sum);
  }
  return s;
}

std::vector<int> balanced_labels(std::size_t per_class) {
  std::vector<int> l;
  for (std::size_t i = 0; i < per_class * 12; ++i) l.push_back(static_cast<int>(i % 12));
  return l;
}

TEST(Accuracy, LowestIndexTieBreak) {
  EXPECT_EQ(predicted_class(std::vector<float>{0.2f, 0.4f, 0.4f}), 1);
  const auto labels = balanced_labels(5);
  Tensor uniform({labels.size(), 12}, 1.0f / 12.0f);
  EXPECT_DOUBLE_EQ(accuracy(uniform, labels), 1.0 / 12.0);
}

TEST(Accuracy, PerfectAndEmpty) {
  const auto labels = balanced_labels(2);
  Tensor onehot({labels.size(), 12});
  for (std::size_t i = 0; i < labels.size(); ++i) onehot[i * 12 + labels[i]] = 1.0f;
  EXPECT_DOUBLE_EQ(accuracy(onehot, labels), 1.0);
  EXPECT_THROW(accuracy(Tensor({0, 12}), std::vector<int>{}), DataError);
}

TEST(Report, ConfusionInvariants) {
  std::mt19937_64 rng(2);
  const auto labels = balanced_labels(20);
  const auto scores = informed_scores(labels, 0.3, rng);
  const auto r = evaluate(scores, labels);
  std::uint64_t trace = 0, total = 0;
  for (std::size_t c = 0; c < 12; ++c) {
    std::uint64_t row = 0;
    for (auto v : r.confusion[c]) row += v;
    EXPECT_EQ(row, 20u);
    trace += r.confusion[c][c];
    total += row;
  }
  EXPECT_EQ(r.accuracy, double(trace) / double(total));
  EXPECT_EQ(r.accuracy, accuracy(scores, labels));
  EXPECT_EQ(r.n_examples, labels.size());
}

TEST(Roc, Endpoints) {
  std::mt19937_64 rng(3);
  const auto labels = balanced_labels(10);
  const auto roc = roc_sweep(random_scores(labels.size(), rng), labels);
  ASSERT_EQ(roc.keywords.size(), 10u);
  for (const auto& c : roc.keywords) {
    EXPECT_EQ(c.points.front().threshold, 0.0);
    EXPECT_EQ(c.points.front().far, 1.0);
    EXPECT_EQ(c.points.front().frr, 0.0);
    EXPECT_GT(c.points.back().threshold, 1.0);
    EXPECT_EQ(c.points.back().far, 0.0);
    EXPECT_EQ(c.points.back().frr, 1.0);
    EXPECT_EQ(c.points.size(), 202u);
  }
}

TEST(Roc, MonotoneInThreshold) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto labels = balanced_labels(8);
    const auto roc = roc_sweep(informed_scores(labels, 0.1 * trial, rng), labels);
    for (const auto& c : roc.keywords)
      for (std::size_t i = 1; i < c.points.size(); ++i) {
        ASSERT_LE(c.points[i].far, c.points[i - 1].far);
        ASSERT_GE(c.points[i].frr, c.points[i - 1].frr);
      }
  }
}

TEST(Roc, AverageWithinEnvelope) {
  std::mt19937_64 rng(5);
  const auto labels = balanced_labels(15);
  const auto roc = roc_sweep(informed_scores(labels, 0.4, rng), labels);
  ASSERT_EQ(roc.average.far.size(), 201u);
  for (std::size_t i = 0; i < roc.average.far.size(); ++i) {
    double lo = 1e9, hi = -1e9;
    for (const auto& c : roc.keywords) {
      lo = std::min(lo, frr_at(c, roc.average.far[i]));
      hi = std::max(hi, frr_at(c, roc.average.far[i]));
    }
    EXPECT_GE(roc.average.frr[i], lo - 1e-12);
    EXPECT_LE(roc.average.frr[i], hi + 1e-12);
  }
}

TEST(Roc, InvariantToMonotoneRescaling) {
  std::mt19937_64 rng(6);
  const auto labels = balanced_labels(10);
  const Tensor s = informed_scores(labels, 0.2, rng);
  Tensor t = s;
  for (auto& v : t.data()) v = std::pow(v, 3.0f) * 0.5f;
  const auto a = roc_sweep(s, labels), b = roc_sweep(t, labels);
  EXPECT_EQ(a.average.frr, b.average.frr);
  EXPECT_EQ(a.average.auc, b.average.auc);
  for (std::size_t k = 0; k < a.keywords.size(); ++k) EXPECT_EQ(a.keywords[k].auc, b.keywords[k].auc);
}

TEST(Roc, RandomScoresGiveHalfArea) {
  // Two effective classes, 1000 examples, uniformly random scores.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<int> labels;
  Tensor s({1000, 12});
  for (std::size_t i = 0; i < 1000; ++i) {
    labels.push_back(i % 2 ? 0 : 10);
    s[i * 12 + 0] = u(rng);
  }
  const auto roc = roc_sweep(s, labels);
  ASSERT_EQ(roc.keywords.size(), 1u);
  EXPECT_NEAR(1.0 - roc.keywords[0].auc, 0.5, 0.05);
  EXPECT_EQ(roc.excluded.size(), 9u);
}

TEST(Roc, BetterScoresSmallerArea) {
  std::mt19937_64 rng(8);
  const auto labels = balanced_labels(20);
  const auto weak = roc_sweep(random_scores(labels.size(), rng), labels);
  const auto strong = roc_sweep(informed_scores(labels, 0.5, rng), labels);
  EXPECT_LT(strong.average.auc, weak.average.auc);
  EXPECT_TRUE(std::isfinite(strong.average.auc));
}

TEST(Roc, CsvShape) {
  std::mt19937_64 rng(9);
  const auto labels = balanced_labels(3);
  const auto roc = roc_sweep(random_scores(labels.size(), rng), labels);
  std::ostringstream csv, avg;
  write_roc_csv(csv, roc);
  write_average_csv(avg, roc);
  const std::string c = csv.str(), a = avg.str();
  EXPECT_EQ(std::count(c.begin(), c.end(), '\n'), 1 + 10 * 202);
  EXPECT_EQ(c.substr(0, c.find('\n')), "threshold,keyword,far,frr");
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 1 + 201);
}

TEST(ConfidenceInterval, KnownValues) {
  const auto a = confidence_interval(std::vector<double>{90, 90, 90, 90, 95});
  EXPECT_NEAR(a.mean, 91.0, 1e-12);
  EXPECT_NEAR(a.stddev, 2.2360680, 1e-6);
  EXPECT_NEAR(a.half_width, 2.7764451, 1e-6);
  const auto b = confidence_interval(std::vector<double>{90.3, 89.1, 91.0, 90.6, 89.7});
  EXPECT_NEAR(b.mean, 90.14, 1e-12);
  EXPECT_NEAR(b.half_width, 0.931661794717971, 1e-9);
}

TEST(ConfidenceInterval, DegenerateAndShift) {
  EXPECT_EQ(confidence_interval(std::vector<double>(5, 3.0)).half_width, 0.0);
  EXPECT_THROW(confidence_interval(std::vector<double>{1.0}), DataError);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(90, 2);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> v(5);
    for (auto& x : v) x = g(rng);
    auto w = v;
    for (auto& x : w) x += 3.5;
    const auto a = confidence_interval(v), b = confidence_interval(w);
    EXPECT_NEAR(b.mean - a.mean, 3.5, 1e-9);
    EXPECT_NEAR(b.half_width, a.half_width, 1e-9);
  }
}

TEST(Report, JsonHasNullForUndefined) {
  std::vector<int> labels = {0, 0, 1};
  Tensor s({3, 12});
  for (std::size_t i = 0; i < 3; ++i) s[i * 12] = 1.0f;
  const std::string j = report_json(evaluate(s, labels), -1);
  EXPECT_NE(j.find("\"precision\":null"), std::string::npos);
  EXPECT_NE(j.find("\"excluded\""), std::string::npos);
}

}  // namespace
}  // namespace kws
