#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kws/network.hpp"
#include "kws/tensor.hpp"

namespace kws {

struct EpochMetrics {
  std::uint32_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  double learning_rate = 0.0;  // rate used during the epoch
  std::uint64_t steps = 0;     // cumulative optimizer steps at epoch end
  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Everything needed to evaluate a model or resume its training run.
///
/// Tensors: every parameter under its layer name, "<bn>.running_mean" and
/// "<bn>.running_var" for each batch norm, and "<param>.velocity" for the
/// optimizer state.
struct Checkpoint {
  std::string arch;
  std::uint32_t epoch = 0;
  double validation_accuracy = 0.0;
  double learning_rate = 0.0;  // rate for the next epoch
  std::uint64_t steps = 0;
  std::string rng_state;
  std::vector<EpochMetrics> history;
  std::vector<NamedTensor> tensors;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> cache;  // (sample key, tag)

  const Tensor* find(std::string_view name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian binary encoding:
///   "KWSCKPT\0"  u32 version
///   str arch  u32 epoch  f64 validation_accuracy  f64 learning_rate  u64 steps  str rng_state
///   u32 n, then n x (u32 epoch, f64 train_loss, f64 train_accuracy, f64 validation_accuracy,
///                    f64 learning_rate, u64 steps)
///   u32 n, then n x (str name, u32 rank, rank x u32 dim, prod(dim) x f32)
///   u32 n, then n x (u64 key, u32 tag)
/// where str = u32 byte length + bytes.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
/// Throws FormatError (bad magic or trailing bytes), VersionError or TruncatedError.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters, batch-norm statistics and (optionally) velocities of `network`.
void capture_model(Network& network, const std::vector<std::vector<float>>* velocity, Checkpoint& out);

/// Copies parameters and batch-norm statistics into `network`. Throws
/// MismatchError if the architecture name, a tensor name or a shape differs.
void apply_model(const Checkpoint& checkpoint, Network& network);

}  // namespace kws
