#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <utility>
#include <vector>

#include "kws/dataset.hpp"
#include "kws/frontend.hpp"

namespace kws {

/// Cache of preprocessed inputs reused across training epochs.
///
/// Each entry carries a tag (the trainer stores the epoch its augmentation
/// was drawn in). Entries can be restored from a (key, tag) manifest without
/// their features; such entries are recomputed on first access with the
/// stored tag, which makes a restored cache behave like the original one.
///
/// Lookups may run concurrently; evict_fraction must not overlap with them.
class FeatureCache {
 public:
  using Key = std::uint64_t;
  using Tag = std::uint32_t;
  using Compute = std::function<FeatureMatrix(Tag)>;

  /// Cached features for `key`, computing them with `tag` on a miss.
  std::shared_ptr<const FeatureMatrix> get_or_compute(Key key, Tag tag, const Compute& compute);

  /// Removes round(fraction * size) entries chosen uniformly at random.
  /// Returns the number removed.
  std::size_t evict_fraction(double fraction, Rng& rng);

  std::size_t size() const;
  bool contains(Key key) const;
  void clear();

  /// (key, tag) pairs, ascending by key.
  std::vector<std::pair<Key, Tag>> manifest() const;
  void restore(const std::vector<std::pair<Key, Tag>>& manifest);

 private:
  struct Entry {
    Tag tag = 0;
    std::shared_ptr<const FeatureMatrix> features;  // null until recomputed after restore
  };

  mutable std::shared_mutex mutex_;
  std::map<Key, Entry> entries_;
};

}  // namespace kws
