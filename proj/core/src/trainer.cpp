#include "kws/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kws/error.hpp"
#include "kws/evaluation.hpp"
#include "kws/wav.hpp"

namespace kws {
namespace {

Rng seeded(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

constexpr std::uint64_t kShuffleSalt = 0x73687566;
constexpr std::uint64_t kAugmentSalt = 0x61756731;
constexpr std::uint64_t kSilenceSalt = 0x73696c65;

bool augmentation_enabled(const AugmentationConfig& a) { return a.noise_prob > 0.0 || a.shift_ms > 0.0; }

}  // namespace

void TrainConfig::validate() const {
  if (!(lr0 > 0.0 && lr_decay > 0.0 && lr_decay <= 1.0 && lr_floor > 0.0)) {
    throw ConfigError("train: learning rates must be positive and lr_decay in (0, 1]");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (batch_size == 0 || epochs == 0 || plateau_patience == 0) {
    throw ConfigError("train: batch_size, epochs and plateau_patience must be positive");
  }
}

PlateauSchedule::PlateauSchedule(double lr0, const TrainConfig& config)
    : lr_(lr0),
      decay_(config.lr_decay),
      floor_(config.lr_floor),
      min_delta_(config.plateau_min_delta),
      patience_(config.plateau_patience) {}

double PlateauSchedule::observe(double validation_accuracy) {
  if (!best_ || validation_accuracy >= *best_ + min_delta_) {
    best_ = std::max(validation_accuracy, best_.value_or(validation_accuracy));
    bad_epochs_ = 0;
    return lr_;
  }
  if (++bad_epochs_ >= patience_) {
    lr_ = std::max(floor_, lr_ * decay_);
    bad_epochs_ = 0;
  }
  return lr_;
}

double lr_schedule(std::span<const double> history, double lr, const TrainConfig& config) {
  PlateauSchedule schedule(lr, config);
  for (double acc : history) schedule.observe(acc);
  return schedule.learning_rate();
}

AudioBuffer DiskAudioSource::load(const LabeledSample& sample) const {
  auto wav = read_wav(root_ / sample.path);
  if (wav.samples.empty()) throw DataError(sample.path + ": empty audio");
  return pad_or_clip(AudioBuffer{std::move(wav.samples), wav.sample_rate_hz});
}

std::vector<FeatureMatrix> clean_features(const std::vector<LabeledSample>& samples, const AudioSource& source,
                                          const NoiseBank& noise, const FrontendConfig& frontend) {
  std::vector<FeatureMatrix> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.label == LabelSpace::silence_index && s.path.empty()) {
      Rng rng = seeded({kCompositionSeed, static_cast<std::uint64_t>(s.split), i, kSilenceSalt});
      out.push_back(extract_mfcc(make_silence(noise, rng), frontend));
    } else {
      out.push_back(extract_mfcc(source.load(s), frontend));
    }
  }
  return out;
}

Tensor predict(Network& network, const std::vector<FeatureMatrix>& features, std::size_t batch_size) {
  const std::size_t K = network.spec().n_classes;
  Tensor probs({features.size(), K});
  for (std::size_t start = 0; start < features.size(); start += batch_size) {
    const std::size_t end = std::min(features.size(), start + batch_size);
    std::vector<const FeatureMatrix*> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(&features[i]);
    const Tensor p = network.forward(make_batch(batch), Mode::eval);
    std::copy(p.data().begin(), p.data().end(), probs.data().begin() + static_cast<std::ptrdiff_t>(start * K));
  }
  return probs;
}

std::vector<int> labels_of(const std::vector<LabeledSample>& samples) {
  std::vector<int> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.label);
  return labels;
}

Trainer::Trainer(ArchSpec spec, const SplitSet& splits, const AudioSource& source, NoiseBank noise, TrainConfig config,
                 AugmentationConfig augmentation, FrontendConfig frontend)
    : spec_(std::move(spec)),
      splits_(splits),
      source_(source),
      noise_(std::move(noise)),
      config_(config),
      augmentation_(augmentation),
      frontend_(frontend),
      network_(spec_, config.seed),
      rng_(seeded({config.seed, kShuffleSalt})),
      lr_(config.lr0) {
  config_.validate();
  augmentation_.validate();
  frontend_.validate();
  if (splits_.train.empty()) throw DataError("training split is empty");
  const bool needs_noise =
      augmentation_.noise_prob > 0.0 ||
      std::any_of(splits_.train.begin(), splits_.train.end(),
                  [](const LabeledSample& s) { return s.label == LabelSpace::silence_index && s.path.empty(); });
  if (needs_noise && noise_.empty()) {
    throw DataError("background noise bank is empty but noise augmentation or silence samples need it");
  }
  velocity_.resize(network_.parameters().size());
}

std::shared_ptr<const FeatureMatrix> Trainer::train_features(std::size_t index) {
  return cache_.get_or_compute(index, static_cast<FeatureCache::Tag>(history_.size() + 1), [&](FeatureCache::Tag tag) {
    const LabeledSample& s = splits_.train[index];
    Rng rng = seeded({config_.seed, index, tag, kAugmentSalt});
    AudioBuffer audio =
        (s.label == LabelSpace::silence_index && s.path.empty()) ? make_silence(noise_, rng) : source_.load(s);
    if (augmentation_enabled(augmentation_)) audio = augment(audio, noise_, augmentation_, rng);
    return extract_mfcc(audio, frontend_);
  });
}

const std::vector<FeatureMatrix>& Trainer::eval_features(Split split) {
  auto& slot = eval_cache_[split == Split::validation ? 0 : 1];
  if (!slot) slot = clean_features(splits_[split], source_, noise_, frontend_);
  return *slot;
}

Tensor Trainer::probabilities(Split split) {
  if (split == Split::train) {
    return predict(network_, clean_features(splits_.train, source_, noise_, frontend_), config_.batch_size);
  }
  return predict(network_, eval_features(split), config_.batch_size);
}

double Trainer::accuracy(Split split) {
  if (splits_[split].empty()) return std::nan("");
  return kws::accuracy(probabilities(split), labels_of(splits_[split]));
}

EpochMetrics Trainer::run_epoch() {
  const auto epoch = static_cast<std::uint32_t>(history_.size() + 1);
  const std::size_t n = splits_.train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng_);

  auto params = network_.parameters();
  std::vector<Tensor*> tensors;
  for (auto& p : params) tensors.push_back(p.tensor);
  const SgdConfig sgd{lr_, config_.momentum, config_.weight_decay};

  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::size_t batch_index = 0;
  for (std::size_t start = 0; start < n; start += config_.batch_size, ++batch_index) {
    const std::size_t end = std::min(n, start + config_.batch_size);
    std::vector<std::shared_ptr<const FeatureMatrix>> held;
    std::vector<const FeatureMatrix*> batch;
    std::vector<int> labels;
    for (std::size_t i = start; i < end; ++i) {
      held.push_back(train_features(order[i]));
      batch.push_back(held.back().get());
      labels.push_back(splits_.train[order[i]].label);
    }
    auto step = network_.forward_backward(make_batch(batch), labels);
    if (!std::isfinite(step.loss)) {
      std::ostringstream msg;
      msg << "non-finite loss at epoch " << epoch << ", batch " << batch_index << " (learning rate " << lr_ << ")";
      throw NumericError(msg.str());
    }
    try {
      sgd_step(tensors, velocity_, sgd);
    } catch (const NumericError& e) {
      std::ostringstream msg;
      msg << e.what() << " at epoch " << epoch << ", batch " << batch_index << " (learning rate " << lr_ << ")";
      throw NumericError(msg.str());
    }
    ++steps_;
    loss_sum += step.loss * static_cast<double>(labels.size());
    const std::size_t K = step.probabilities.dim(1);
    for (std::size_t b = 0; b < labels.size(); ++b) {
      const auto row = step.probabilities.data().subspan(b * K, K);
      if (predicted_class(row) == labels[b]) ++correct;
    }
  }
  cache_.evict_fraction(augmentation_.cache_eviction_frac, rng_);

  EpochMetrics m;
  m.epoch = epoch;
  m.train_loss = loss_sum / static_cast<double>(n);
  m.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  m.validation_accuracy = accuracy(Split::validation);
  m.learning_rate = lr_;
  m.steps = steps_;
  history_.push_back(m);

  std::vector<double> monitored;
  for (const auto& h : history_) {
    monitored.push_back(std::isnan(h.validation_accuracy) ? h.train_accuracy : h.validation_accuracy);
  }
  lr_ = lr_schedule(monitored, config_.lr0, config_);
  return m;
}

Checkpoint Trainer::checkpoint() {
  Checkpoint c;
  capture_model(network_, &velocity_, c);
  c.epoch = static_cast<std::uint32_t>(history_.size());
  c.validation_accuracy = history_.empty() ? 0.0 : history_.back().validation_accuracy;
  c.learning_rate = lr_;
  c.steps = steps_;
  std::ostringstream rng_state;
  rng_state << rng_;
  c.rng_state = rng_state.str();
  c.history = history_;
  c.cache = cache_.manifest();
  return c;
}

void Trainer::resume(const Checkpoint& c) {
  apply_model(c, network_);
  auto params = network_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor* v = c.find(params[i].name + ".velocity");
    if (!v) throw MismatchError("checkpoint has no optimizer state for '" + params[i].name + "'");
    if (v->shape() != params[i].tensor->shape()) {
      throw MismatchError("optimizer state for '" + params[i].name + "' has the wrong shape");
    }
    velocity_[i].assign(v->data().begin(), v->data().end());
  }
  std::istringstream rng_state(c.rng_state);
  rng_state >> rng_;
  if (!rng_state) throw FormatError("checkpoint RNG state is malformed");
  history_ = c.history;
  lr_ = c.learning_rate;
  steps_ = c.steps;
  cache_.restore(c.cache);
}

TrainResult train(const ArchSpec& spec, const SplitSet& splits, const AudioSource& source, const NoiseBank& noise,
                  const TrainConfig& config, const AugmentationConfig& augmentation,
                  const std::optional<Checkpoint>& resume, const std::function<void(const EpochMetrics&)>& on_epoch) {
  if (splits.validation.empty()) throw DataError("validation split is empty; cannot select the best checkpoint");
  Trainer trainer(spec, splits, source, noise, config, augmentation);
  if (resume) trainer.resume(*resume);
  TrainResult result;
  std::optional<double> best;
  while (trainer.history().size() < config.epochs) {
    const EpochMetrics m = trainer.run_epoch();
    if (on_epoch) on_epoch(m);
    if (!best || m.validation_accuracy > *best) {
      best = m.validation_accuracy;
      result.best = trainer.checkpoint();
    }
  }
  result.last = trainer.checkpoint();
  if (!best) result.best = result.last;
  result.epochs = trainer.history();
  return result;
}

}  // namespace kws
