#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kws/ops.hpp"

namespace kws {

enum class LayerKind { conv, relu, batch_norm, avg_pool, global_avg_pool, residual_add, softmax };
std::string_view layer_kind_name(LayerKind kind);

/// One entry of the flattened layer list an ArchSpec expands to.
struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  std::string name;         // parameter / state name, e.g. "block2.conv_a"
  std::string group;        // footprint table row, e.g. "res x 6"
  std::size_t channels = 0; // output feature maps (classes for softmax)
  Dilation dilation;        // conv only
  PoolWindow window;        // avg_pool only
  int block = -1;           // residual block index, -1 outside blocks
};

/// Declarative description of a residual keyword-spotting network.
///
/// The layer list is a stem 3x3 conv + ReLU, an optional average pool, then
/// `n_res_blocks` blocks of (conv, ReLU, bn, conv, ReLU, bn) whose input is
/// added to their output. Dilated variants use 2^floor(i/3) for the i-th
/// residual conv and append one more conv + ReLU + bn. All variants end with
/// a global average pool and a bias-free softmax layer.
struct ArchSpec {
  std::string name;
  std::size_t n_feature_maps = 45;
  std::size_t n_res_blocks = 6;
  std::optional<PoolWindow> front_pool;  // (time, frequency)
  bool dilation_enabled = true;
  std::size_t n_classes = 12;

  /// Throws ConfigError on an inconsistent spec (including a named variant
  /// whose fields disagree with its name).
  void validate() const;
  std::vector<LayerSpec> layers() const;
};

/// The six named variants, in table order.
const std::vector<std::string>& variant_names();
/// Throws ConfigError listing the valid names for an unknown name.
ArchSpec arch_by_name(std::string_view name);

/// Dilation of the i-th residual conv (0-based across all blocks).
Dilation dilation_at(std::size_t layer_index);

struct ReceptiveField {
  std::size_t height = 1;  // time frames
  std::size_t width = 1;   // frequency bins
  friend bool operator==(const ReceptiveField&, const ReceptiveField&) = default;
};

/// Input extent seen by one unit before the global pool. Each 3x3 conv adds
/// 2*d*jump and each pooling window p adds (p-1)*jump, where jump is the
/// product of the pooling factors applied so far.
ReceptiveField receptive_field(const ArchSpec& spec);

struct FootprintRow {
  std::string name;
  std::string group;
  LayerKind kind = LayerKind::conv;
  std::size_t m = 0;  // kernel/window width
  std::size_t r = 0;  // kernel/window height
  std::size_t n = 0;
  Dilation dilation;
  std::size_t positions = 0;  // spatial output positions (H*W)
  std::uint64_t params = 0;
  std::uint64_t multiplies = 0;
};

/// Rows with the same group label merged, in first-appearance order.
struct FootprintGroup {
  std::string group;
  std::string type;
  std::size_t m = 0, r = 0, n = 0;
  std::string d_w, d_h;
  std::uint64_t params = 0;
  std::uint64_t multiplies = 0;
};

/// Parameter and multiply accounting for an input of `frames` x `coeffs`.
///
/// Parameters come from conv and softmax weights only. Multiplies: conv =
/// params x output positions, bn and non-global pooling = one per output
/// element, global pooling = one per feature map, softmax = its weight count.
struct Footprint {
  std::uint64_t n_params = 0;
  std::uint64_t n_multiplies = 0;
  std::vector<FootprintRow> rows;

  std::vector<FootprintGroup> groups() const;
};

Footprint footprint(const ArchSpec& spec, std::size_t frames, std::size_t coeffs);

}  // namespace kws
