#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "kws/arch.hpp"
#include "kws/checkpoint.hpp"
#include "kws/dataset.hpp"
#include "kws/feature_cache.hpp"
#include "kws/frontend.hpp"
#include "kws/network.hpp"
#include "kws/optim.hpp"

namespace kws {

struct TrainConfig {
  double lr0 = 0.1;
  double lr_decay = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  std::size_t batch_size = 64;
  std::size_t epochs = 26;
  std::size_t plateau_patience = 3;
  double plateau_min_delta = 0.001;  // accuracy fraction, i.e. 0.1 points
  double lr_floor = 1e-5;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Learning rate decay on validation-accuracy plateaus.
///
/// An epoch improves when its accuracy beats the best so far by at least
/// min_delta. After `patience` consecutive epochs without improvement the
/// rate is multiplied by `decay` (never below `floor`) and the count restarts.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr0, const TrainConfig& config);

  /// Records one epoch's accuracy; returns the rate for the next epoch.
  double observe(double validation_accuracy);
  double learning_rate() const { return lr_; }

 private:
  double lr_;
  double decay_;
  double floor_;
  double min_delta_;
  std::size_t patience_;
  std::optional<double> best_;
  std::size_t bad_epochs_ = 0;
};

/// Rate after replaying `history` through a PlateauSchedule starting at `lr`.
double lr_schedule(std::span<const double> history, double lr, const TrainConfig& config);

/// Loads the audio behind a LabeledSample (not called for silence slots).
class AudioSource {
 public:
  virtual ~AudioSource() = default;
  virtual AudioBuffer load(const LabeledSample& sample) const = 0;
};

/// Reads <root>/<sample.path> and pads/clips it to one second.
class DiskAudioSource final : public AudioSource {
 public:
  explicit DiskAudioSource(std::filesystem::path root) : root_(std::move(root)) {}
  AudioBuffer load(const LabeledSample& sample) const override;

 private:
  std::filesystem::path root_;
};

/// Un-augmented features for evaluation. Silence slots are cut from the
/// noise bank with a generator seeded from (split, index), so every run sees
/// the same evaluation set.
std::vector<FeatureMatrix> clean_features(const std::vector<LabeledSample>& samples, const AudioSource& source,
                                          const NoiseBank& noise, const FrontendConfig& frontend = {});

/// Eval-mode class probabilities (N, 12), computed in batches.
Tensor predict(Network& network, const std::vector<FeatureMatrix>& features, std::size_t batch_size = 64);

std::vector<int> labels_of(const std::vector<LabeledSample>& samples);

/// Epoch-level training driver. Single worker; bit-deterministic for a seed.
class Trainer {
 public:
  Trainer(ArchSpec spec, const SplitSet& splits, const AudioSource& source, NoiseBank noise, TrainConfig config,
          AugmentationConfig augmentation, FrontendConfig frontend = {});

  /// One pass over the shuffled training split, cache eviction, validation
  /// and the learning-rate update. Throws NumericError on a non-finite loss.
  EpochMetrics run_epoch();

  /// Eval-mode accuracy on the un-augmented split.
  double accuracy(Split split);
  Tensor probabilities(Split split);

  Checkpoint checkpoint();
  /// Restores model, optimizer, schedule, RNG and cache membership.
  void resume(const Checkpoint& checkpoint);

  Network& network() { return network_; }
  const std::vector<EpochMetrics>& history() const { return history_; }
  double learning_rate() const { return lr_; }
  std::uint64_t steps() const { return steps_; }
  const FeatureCache& cache() const { return cache_; }

 private:
  std::shared_ptr<const FeatureMatrix> train_features(std::size_t index);
  const std::vector<FeatureMatrix>& eval_features(Split split);

  ArchSpec spec_;
  const SplitSet& splits_;
  const AudioSource& source_;
  NoiseBank noise_;
  TrainConfig config_;
  AugmentationConfig augmentation_;
  FrontendConfig frontend_;
  Network network_;
  std::vector<std::vector<float>> velocity_;
  Rng rng_;
  FeatureCache cache_;
  std::optional<std::vector<FeatureMatrix>> eval_cache_[2];
  std::vector<EpochMetrics> history_;
  double lr_;
  std::uint64_t steps_ = 0;
};

struct TrainResult {
  Checkpoint best;  // highest validation accuracy (earliest on ties)
  Checkpoint last;
  std::vector<EpochMetrics> epochs;
};

/// Runs config.epochs epochs (continuing from `resume` when given).
/// `on_epoch` is called after every epoch.
TrainResult train(const ArchSpec& spec, const SplitSet& splits, const AudioSource& source, const NoiseBank& noise,
                  const TrainConfig& config, const AugmentationConfig& augmentation,
                  const std::optional<Checkpoint>& resume = std::nullopt,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace kws
