#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kws/tensor.hpp"

namespace kws {

/// "<major>.<minor>.<patch>[+g<describe>]" of the library build.
std::string_view version_string();

/// Index of the largest entry; ties go to the lowest index.
int predicted_class(std::span<const float> probabilities);

/// Fraction of rows of `probabilities` (N, K) whose argmax equals the label.
/// Throws DataError for an empty set.
double accuracy(const Tensor& probabilities, std::span<const int> labels);

struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

/// One keyword's ROC. `points` follow the threshold grid (ascending, plus one
/// threshold above 1). `operating_points` are the exact curve: one point per
/// distinct score, sorted by FAR ascending. `auc` is the trapezoid area under
/// FRR over FAR in [0, 1] along the exact curve (lower is better).
struct RocCurve {
  std::string keyword;
  std::vector<RocPoint> points;
  std::vector<RocPoint> operating_points;
  double auc = 0.0;
};

/// Averaged curve: FRR at each FAR grid value is the mean over keywords of
/// their linearly interpolated exact curves.
struct AveragedRoc {
  std::vector<double> far;
  std::vector<double> frr;
  double auc = 0.0;
};

struct RocReport {
  double step = 0.005;
  std::vector<RocCurve> keywords;
  AveragedRoc average;
  std::vector<std::string> excluded;  // keywords without positive or negative examples
};

/// FRR of the exact curve at `far`; the lowest FRR when several points share it.
double frr_at(const RocCurve& curve, double far);

/// Per-keyword and vertically averaged ROC over the keyword classes
/// (labels 0..9). All other examples, unknown and silence included, are
/// negatives for every keyword.
RocReport roc_sweep(const Tensor& scores, std::span<const int> labels, double step = 0.005);

struct EvalReport {
  std::size_t n_examples = 0;
  double accuracy = 0.0;
  std::vector<std::vector<std::uint64_t>> confusion;  // [true][predicted]
  std::vector<double> precision;                      // NaN when a class is never predicted
  std::vector<double> recall;                         // NaN when a class never occurs
  RocReport roc;
};

EvalReport evaluate(const Tensor& probabilities, std::span<const int> labels, double roc_step = 0.005);

std::string report_json(const EvalReport& report, int indent = 2);

/// Rows "threshold,keyword,far,frr" for every keyword and grid threshold.
void write_roc_csv(std::ostream& out, const RocReport& roc);
/// Rows "far,frr" of the averaged curve.
void write_average_csv(std::ostream& out, const RocReport& roc);

struct ConfidenceInterval {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
  double half_width = 0.0;
};

/// mean ± t_{0.975, n-1} · s / sqrt(n). Throws DataError for fewer than two values.
ConfidenceInterval confidence_interval(std::span<const double> values);

}  // namespace kws
