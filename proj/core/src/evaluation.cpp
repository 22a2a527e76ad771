#include "kws/evaluation.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>

#include "kws/dataset.hpp"
#include "kws/error.hpp"

namespace kws {
namespace {

constexpr int kKeywords = static_cast<int>(LabelSpace::keywords.size());

void check_scores(const Tensor& scores, std::span<const int> labels) {
  if (scores.rank() != 2) throw ShapeError("scores must be (N, K), got " + shape_string(scores.shape()));
  if (scores.dim(0) != labels.size()) throw ShapeError("scores and labels disagree on N");
  if (labels.empty()) throw DataError("cannot evaluate an empty set");
  const auto K = static_cast<int>(scores.dim(1));
  for (int l : labels) {
    if (l < 0 || l >= K) throw DataError("label " + std::to_string(l) + " out of range");
  }
}

// Trapezoid area along a polyline sorted by x.
double trapezoid(std::span<const double> x, std::span<const double> y) {
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += (x[i] - x[i - 1]) * (y[i] + y[i - 1]) / 2.0;
  return area;
}

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::string_view version_string() { return KWS_VERSION_STRING; }

int predicted_class(std::span<const float> probabilities) {
  if (probabilities.empty()) throw ShapeError("argmax of an empty row");
  return static_cast<int>(std::max_element(probabilities.begin(), probabilities.end()) - probabilities.begin());
}

double accuracy(const Tensor& probabilities, std::span<const int> labels) {
  check_scores(probabilities, labels);
  const std::size_t K = probabilities.dim(1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predicted_class(probabilities.data().subspan(i * K, K)) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double frr_at(const RocCurve& curve, double far) {
  const auto& pts = curve.operating_points;
  if (pts.empty()) return std::nan("");
  // Points are ordered by FAR ascending, FRR descending within equal FAR.
  auto after = std::upper_bound(pts.begin(), pts.end(), far, [](double f, const RocPoint& p) { return f < p.far; });
  if (after != pts.begin() && std::prev(after)->far == far) return std::prev(after)->frr;
  if (after == pts.begin()) return after->frr;
  if (after == pts.end()) return pts.back().frr;
  const RocPoint& lo = *std::prev(after);
  const RocPoint& hi = *after;
  const double u = (far - lo.far) / (hi.far - lo.far);
  return lo.frr + u * (hi.frr - lo.frr);
}

RocReport roc_sweep(const Tensor& scores, std::span<const int> labels, double step) {
  check_scores(scores, labels);
  if (!(step > 0.0 && step <= 1.0)) throw ConfigError("ROC grid step must be in (0, 1]");
  const std::size_t N = labels.size();
  const std::size_t K = scores.dim(1);
  if (K < static_cast<std::size_t>(kKeywords)) throw ShapeError("scores need a column per keyword");

  const auto n_steps = static_cast<std::size_t>(std::llround(1.0 / step));
  std::vector<double> thresholds;
  for (std::size_t i = 0; i <= n_steps; ++i) thresholds.push_back(static_cast<double>(i) * step);
  thresholds.push_back(1.0 + step);

  RocReport report;
  report.step = step;
  for (int k = 0; k < kKeywords; ++k) {
    const std::string name(LabelSpace::keywords[static_cast<std::size_t>(k)]);
    std::vector<float> pos, neg;
    for (std::size_t i = 0; i < N; ++i) (labels[i] == k ? pos : neg).push_back(scores[i * K + k]);
    if (pos.empty() || neg.empty()) {
      report.excluded.push_back(name);
      continue;
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    const double np = static_cast<double>(pos.size());
    const double nn = static_cast<double>(neg.size());
    auto far_of = [&](double t) {
      return static_cast<double>(neg.end() - std::lower_bound(neg.begin(), neg.end(), t)) / nn;
    };
    auto frr_of = [&](double t) {
      return static_cast<double>(std::lower_bound(pos.begin(), pos.end(), t) - pos.begin()) / np;
    };

    RocCurve curve;
    curve.keyword = name;
    for (double t : thresholds) curve.points.push_back({t, far_of(t), frr_of(t)});

    std::vector<double> cuts(pos.begin(), pos.end());
    cuts.insert(cuts.end(), neg.begin(), neg.end());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    curve.operating_points.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
    for (auto it = cuts.rbegin(); it != cuts.rend(); ++it) curve.operating_points.push_back({*it, far_of(*it), frr_of(*it)});
    std::stable_sort(curve.operating_points.begin(), curve.operating_points.end(),
                     [](const RocPoint& a, const RocPoint& b) { return a.far < b.far || (a.far == b.far && a.frr > b.frr); });

    std::vector<double> x, y;
    for (const auto& p : curve.operating_points) {
      x.push_back(p.far);
      y.push_back(p.frr);
    }
    curve.auc = trapezoid(x, y);
    report.keywords.push_back(std::move(curve));
  }

  if (!report.keywords.empty()) {
    for (std::size_t i = 0; i <= n_steps; ++i) {
      const double f = std::min(1.0, static_cast<double>(i) * step);
      double sum = 0.0;
      for (const auto& c : report.keywords) sum += frr_at(c, f);
      report.average.far.push_back(f);
      report.average.frr.push_back(sum / static_cast<double>(report.keywords.size()));
    }
    report.average.auc = trapezoid(report.average.far, report.average.frr);
  } else {
    report.average.auc = std::nan("");
  }
  return report;
}

EvalReport evaluate(const Tensor& probabilities, std::span<const int> labels, double roc_step) {
  check_scores(probabilities, labels);
  const std::size_t K = probabilities.dim(1);
  EvalReport r;
  r.n_examples = labels.size();
  r.confusion.assign(K, std::vector<std::uint64_t>(K, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predicted_class(probabilities.data().subspan(i * K, K));
    ++r.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(p)];
  }
  std::uint64_t trace = 0;
  for (std::size_t c = 0; c < K; ++c) {
    trace += r.confusion[c][c];
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < K; ++j) {
      row += r.confusion[c][j];
      col += r.confusion[j][c];
    }
    r.precision.push_back(col ? static_cast<double>(r.confusion[c][c]) / static_cast<double>(col) : std::nan(""));
    r.recall.push_back(row ? static_cast<double>(r.confusion[c][c]) / static_cast<double>(row) : std::nan(""));
  }
  r.accuracy = static_cast<double>(trace) / static_cast<double>(r.n_examples);
  if (K >= static_cast<std::size_t>(kKeywords)) r.roc = roc_sweep(probabilities, labels, roc_step);
  return r;
}

std::string report_json(const EvalReport& report, int indent) {
  using nlohmann::json;
  json j;
  j["n_examples"] = report.n_examples;
  j["accuracy"] = report.accuracy;
  j["confusion"] = report.confusion;
  json classes = json::array();
  for (std::size_t c = 0; c < report.precision.size(); ++c) {
    classes.push_back({{"class", LabelSpace::class_name(static_cast<int>(c))},
                       {"precision", number(report.precision[c])},
                       {"recall", number(report.recall[c])}});
  }
  j["classes"] = classes;
  json roc;
  roc["step"] = report.roc.step;
  json per = json::object();
  for (const auto& c : report.roc.keywords) per[c.keyword] = {{"auc", number(c.auc)}};
  roc["keywords"] = per;
  roc["average_auc"] = number(report.roc.average.auc);
  roc["excluded"] = report.roc.excluded;
  j["roc"] = roc;
  return j.dump(indent);
}

void write_roc_csv(std::ostream& out, const RocReport& roc) {
  out << "threshold,keyword,far,frr\n";
  for (const auto& c : roc.keywords) {
    for (const auto& p : c.points) out << p.threshold << ',' << c.keyword << ',' << p.far << ',' << p.frr << '\n';
  }
}

void write_average_csv(std::ostream& out, const RocReport& roc) {
  out << "far,frr\n";
  for (std::size_t i = 0; i < roc.average.far.size(); ++i) out << roc.average.far[i] << ',' << roc.average.frr[i] << '\n';
}

ConfidenceInterval confidence_interval(std::span<const double> values) {
  if (values.size() < 2) throw DataError("a confidence interval needs at least two values");
  const double n = static_cast<double>(values.size());
  ConfidenceInterval ci;
  ci.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - ci.mean) * (v - ci.mean);
  ci.stddev = std::sqrt(ss / (n - 1.0));
  const boost::math::students_t dist(n - 1.0);
  ci.half_width = boost::math::quantile(dist, 0.975) * ci.stddev / std::sqrt(n);
  return ci;
}

}  // namespace kws
