#include "kws/arch.hpp"

#include <algorithm>
#include <map>

#include "kws/error.hpp"

namespace kws {

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv:
      return "conv";
    case LayerKind::relu:
      return "relu";
    case LayerKind::batch_norm:
      return "bn";
    case LayerKind::avg_pool:
    case LayerKind::global_avg_pool:
      return "avg-pool";
    case LayerKind::residual_add:
      return "add";
    case LayerKind::softmax:
      return "softmax";
  }
  return "?";
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {"res15", "res15-narrow", "res26", "res26-narrow", "res8", "res8-narrow"};
  return names;
}

namespace {

std::string joined_variant_names() {
  std::string out;
  for (const auto& n : variant_names()) out += (out.empty() ? "" : ", ") + n;
  return out;
}

}  // namespace

ArchSpec arch_by_name(std::string_view name) {
  const bool narrow = name.ends_with("-narrow");
  const std::string_view family = narrow ? name.substr(0, name.size() - 7) : name;
  ArchSpec spec;
  spec.name = std::string(name);
  spec.n_feature_maps = narrow ? 19 : 45;
  if (family == "res15") {
    spec.n_res_blocks = 6;
    spec.dilation_enabled = true;
  } else if (family == "res8") {
    spec.n_res_blocks = 3;
    spec.front_pool = PoolWindow{4, 3};
    spec.dilation_enabled = false;
  } else if (family == "res26") {
    spec.n_res_blocks = 12;
    spec.front_pool = PoolWindow{2, 2};
    spec.dilation_enabled = false;
  } else {
    throw ConfigError("unknown architecture '" + std::string(name) + "'; valid names: " + joined_variant_names());
  }
  return spec;
}

void ArchSpec::validate() const {
  if (n_feature_maps == 0 || n_classes == 0) throw ConfigError("arch " + name + ": widths must be positive");
  if (front_pool && (front_pool->height == 0 || front_pool->width == 0)) {
    throw ConfigError("arch " + name + ": pooling window must be positive");
  }
  const auto& names = variant_names();
  if (std::find(names.begin(), names.end(), name) != names.end()) {
    const ArchSpec ref = arch_by_name(name);
    if (ref.n_feature_maps != n_feature_maps || ref.n_res_blocks != n_res_blocks || ref.front_pool != front_pool ||
        ref.dilation_enabled != dilation_enabled || n_classes != 12) {
      throw ConfigError("arch " + name + ": fields disagree with the named variant");
    }
  }
}

Dilation dilation_at(std::size_t layer_index) {
  const int d = 1 << (layer_index / 3);
  return {d, d};
}

std::vector<LayerSpec> ArchSpec::layers() const {
  validate();
  const std::size_t n = n_feature_maps;
  std::vector<LayerSpec> out;
  out.push_back({LayerKind::conv, "conv0", "conv", n, {1, 1}, {}, -1});
  out.push_back({LayerKind::relu, "conv0.relu", "conv", n, {}, {}, -1});
  if (front_pool) out.push_back({LayerKind::avg_pool, "pool0", "avg-pool", n, {}, *front_pool, -1});

  const std::string res_group = "res x " + std::to_string(n_res_blocks);
  for (std::size_t b = 0; b < n_res_blocks; ++b) {
    const std::string prefix = "block" + std::to_string(b + 1) + ".";
    const int block = static_cast<int>(b);
    for (const char* half : {"a", "b"}) {
      const std::size_t conv_index = 2 * b + (half[0] == 'b' ? 1 : 0);
      const Dilation d = dilation_enabled ? dilation_at(conv_index) : Dilation{1, 1};
      out.push_back({LayerKind::conv, prefix + "conv_" + half, res_group, n, d, {}, block});
      out.push_back({LayerKind::relu, prefix + "relu_" + half, res_group, n, {}, {}, block});
      out.push_back({LayerKind::batch_norm, prefix + "bn_" + half, res_group, n, {}, {}, block});
    }
    out.push_back({LayerKind::residual_add, prefix + "add", res_group, n, {}, {}, block});
  }
  if (dilation_enabled) {
    const Dilation d = dilation_at(2 * n_res_blocks);
    out.push_back({LayerKind::conv, "tail.conv", "conv", n, d, {}, -1});
    out.push_back({LayerKind::relu, "tail.relu", "conv", n, {}, {}, -1});
    out.push_back({LayerKind::batch_norm, "tail.bn", "bn", n, {}, {}, -1});
  }
  out.push_back({LayerKind::global_avg_pool, "pool_global", "avg-pool", n, {}, {}, -1});
  out.push_back({LayerKind::softmax, "softmax", "softmax", n_classes, {}, {}, -1});
  return out;
}

ReceptiveField receptive_field(const ArchSpec& spec) {
  std::size_t rf_h = 1, rf_w = 1, jump_h = 1, jump_w = 1;
  for (const auto& layer : spec.layers()) {
    if (layer.kind == LayerKind::conv) {
      rf_h += 2 * static_cast<std::size_t>(layer.dilation.height) * jump_h;
      rf_w += 2 * static_cast<std::size_t>(layer.dilation.width) * jump_w;
    } else if (layer.kind == LayerKind::avg_pool) {
      rf_h += (layer.window.height - 1) * jump_h;
      rf_w += (layer.window.width - 1) * jump_w;
      jump_h *= layer.window.height;
      jump_w *= layer.window.width;
    }
  }
  return {rf_h, rf_w};
}

Footprint footprint(const ArchSpec& spec, std::size_t frames, std::size_t coeffs) {
  if (frames == 0 || coeffs == 0) throw ConfigError("footprint: input dimensions must be positive");
  Footprint fp;
  std::size_t h = frames, w = coeffs, channels = 1;
  for (const auto& layer : spec.layers()) {
    FootprintRow row{layer.name, layer.group, layer.kind, 0, 0, layer.channels, {}, h * w, 0, 0};
    switch (layer.kind) {
      case LayerKind::conv:
        row.m = row.r = kKernelSize;
        row.dilation = layer.dilation;
        row.params = kKernelSize * kKernelSize * channels * layer.channels;
        row.multiplies = row.params * row.positions;
        break;
      case LayerKind::batch_norm:
        row.multiplies = layer.channels * row.positions;
        break;
      case LayerKind::avg_pool:
        h /= layer.window.height;
        w /= layer.window.width;
        row.m = layer.window.width;
        row.r = layer.window.height;
        row.positions = h * w;
        row.multiplies = layer.channels * row.positions;
        break;
      case LayerKind::global_avg_pool:
        row.positions = 1;
        row.multiplies = layer.channels;
        break;
      case LayerKind::softmax:
        row.positions = 1;
        row.params = channels * layer.channels;
        row.multiplies = row.params;
        break;
      case LayerKind::relu:
      case LayerKind::residual_add:
        continue;
    }
    channels = layer.channels;
    fp.n_params += row.params;
    fp.n_multiplies += row.multiplies;
    fp.rows.push_back(std::move(row));
  }
  return fp;
}

std::vector<FootprintGroup> Footprint::groups() const {
  std::vector<FootprintGroup> out;
  auto dil = [](const FootprintRow& r, bool width) -> std::string {
    if (r.kind != LayerKind::conv) return "-";
    const int d = width ? r.dilation.width : r.dilation.height;
    return d == 1 ? "-" : std::to_string(d);
  };
  for (const auto& row : rows) {
    if (out.empty() || out.back().group != row.group) {
      out.push_back({row.group, std::string(layer_kind_name(row.kind)), row.m, row.r, row.n, dil(row, true),
                     dil(row, false), 0, 0});
      if (row.group.starts_with("res x")) out.back().type = "res";
    } else if (out.back().d_w != dil(row, true) && row.kind == LayerKind::conv) {
      out.back().d_w = out.back().d_h = "2^floor(i/3)";
    }
    out.back().params += row.params;
    out.back().multiplies += row.multiplies;
  }
  return out;
}

}  // namespace kws
