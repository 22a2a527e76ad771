#include "kws/feature_cache.hpp"

#include <cmath>
#include <mutex>

namespace kws {

std::shared_ptr<const FeatureMatrix> FeatureCache::get_or_compute(Key key, Tag tag, const Compute& compute) {
  {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      if (it->second.features) return it->second.features;
      tag = it->second.tag;
    }
  }
  auto features = std::make_shared<const FeatureMatrix>(compute(tag));
  std::unique_lock lock(mutex_);
  auto& entry = entries_[key];
  if (!entry.features) {
    entry.tag = tag;
    entry.features = std::move(features);
  }
  return entry.features;
}

std::size_t FeatureCache::evict_fraction(double fraction, Rng& rng) {
  std::unique_lock lock(mutex_);
  const auto n_evict = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(entries_.size())));
  std::vector<Key> keys;
  keys.reserve(entries_.size());
  for (const auto& [key, entry] : entries_) keys.push_back(key);
  // Partial Fisher-Yates: the first n_evict slots become a uniform sample.
  for (std::size_t i = 0; i < n_evict; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, keys.size() - 1);
    std::swap(keys[i], keys[pick(rng)]);
    entries_.erase(keys[i]);
  }
  return n_evict;
}

std::size_t FeatureCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

bool FeatureCache::contains(Key key) const {
  std::shared_lock lock(mutex_);
  return entries_.count(key) != 0;
}

void FeatureCache::clear() {
  std::unique_lock lock(mutex_);
  entries_.clear();
}

std::vector<std::pair<FeatureCache::Key, FeatureCache::Tag>> FeatureCache::manifest() const {
  std::shared_lock lock(mutex_);
  std::vector<std::pair<Key, Tag>> out;
  out.reserve(entries_.size());
  for (const auto& [key, entry] : entries_) out.emplace_back(key, entry.tag);
  return out;
}

void FeatureCache::restore(const std::vector<std::pair<Key, Tag>>& manifest) {
  std::unique_lock lock(mutex_);
  entries_.clear();
  for (const auto& [key, tag] : manifest) entries_[key] = Entry{tag, nullptr};
}

}  // namespace kws
