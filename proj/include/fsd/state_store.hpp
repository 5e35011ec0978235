#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>

#include "fsd/clock.hpp"

namespace fsd {

/// Version counter for a store entry. Versions start at 1 and increase
/// strictly with every committed write; 0 denotes "absent" and can be used
/// with compare_and_put to create a key only if nobody else has.
using StoreVersion = std::uint64_t;

/// In-process shared-state store with per-key optimistic versioning. Safe for
/// concurrent readers and writers; writes serialize on an internal mutex.
/// The interface is deliberately store-shaped so a networked backend could be
/// slotted in behind it.
template <typename V>
class StateStore {
 public:
  explicit StateStore(std::string ns = "") : namespace_(std::move(ns)) {}

  const std::string& store_namespace() const { return namespace_; }

  std::optional<V> get(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second.value;
  }

  /// Value plus the version to hand back to compare_and_put.
  std::optional<std::pair<V, StoreVersion>> get_versioned(
      const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return std::make_pair(it->second.value, it->second.version);
  }

  StoreVersion version_of(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.version;
  }

  /// Unconditional write; returns the new version.
  StoreVersion put(const std::string& key, V value) {
    std::lock_guard lock(mu_);
    return put_locked(key, std::move(value));
  }

  /// Succeeds only when the key's current version equals expected_version
  /// (0 = key must be absent). Returns the new version, or nullopt on
  /// conflict, in which case the caller re-reads and retries.
  std::optional<StoreVersion> compare_and_put(const std::string& key,
                                              StoreVersion expected_version,
                                              V value) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    StoreVersion current = it == entries_.end() ? 0 : it->second.version;
    if (current != expected_version) return std::nullopt;
    return put_locked(key, std::move(value));
  }

  bool erase(const std::string& key) {
    std::lock_guard lock(mu_);
    return entries_.erase(key) > 0;
  }

  bool contains(const std::string& key) const {
    std::lock_guard lock(mu_);
    return entries_.count(key) > 0;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

  /// Atomically validates a set of observed versions and, if none changed,
  /// applies all writes. Backs StoreTxn commits.
  bool commit_if_unchanged(
      const std::unordered_map<std::string, StoreVersion>& observed,
      const std::map<std::string, V>& writes) {
    std::lock_guard lock(mu_);
    for (const auto& [key, version] : observed) {
      auto it = entries_.find(key);
      StoreVersion current = it == entries_.end() ? 0 : it->second.version;
      if (current != version) return false;
    }
    for (const auto& [key, value] : writes) put_locked(key, value);
    return true;
  }

 private:
  struct Entry {
    V value;
    StoreVersion version;
  };

  StoreVersion put_locked(const std::string& key, V value) {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      entries_.emplace(key, Entry{std::move(value), 1});
      return 1;
    }
    it->second.value = std::move(value);
    return ++it->second.version;
  }

  mutable std::mutex mu_;
  std::string namespace_;
  std::unordered_map<std::string, Entry> entries_;
};

/// Buffered read-write view over a StateStore. Reads record the versions they
/// observed (read-your-writes within the transaction); writes stay local until
/// commit, which applies them atomically only if no observed key has moved.
/// Discarding the transaction abandons the buffered writes.
template <typename V>
class StoreTxn {
 public:
  explicit StoreTxn(StateStore<V>& store) : store_(&store) {}

  std::optional<V> get(const std::string& key) {
    auto written = writes_.find(key);
    if (written != writes_.end()) return written->second;
    auto versioned = store_->get_versioned(key);
    if (versioned) {
      observed_.emplace(key, versioned->second);
      return versioned->first;
    }
    observed_.emplace(key, 0);
    return std::nullopt;
  }

  void put(const std::string& key, V value) {
    writes_[key] = std::move(value);
  }

  /// True on success; false means an observed key changed underneath us and
  /// the caller should rerun its logic on a fresh transaction.
  bool commit() { return store_->commit_if_unchanged(observed_, writes_); }

  void discard() {
    observed_.clear();
    writes_.clear();
  }

  std::size_t pending_writes() const { return writes_.size(); }

 private:
  StateStore<V>* store_;
  std::unordered_map<std::string, StoreVersion> observed_;
  std::map<std::string, V> writes_;
};

/// Read-through cache over a StateStore for read-mostly keys. A max-staleness
/// of zero (the default) always reads through; a positive bound serves hits
/// from the local copy until they age out, trading freshness for fewer trips
/// to the shared structure.
template <typename V>
class CachedReader {
 public:
  CachedReader(const StateStore<V>& store, const Clock& clock,
               std::int64_t max_staleness_ms = 0)
      : store_(&store), clock_(&clock), max_staleness_ms_(max_staleness_ms) {}

  std::optional<V> get(const std::string& key) {
    const std::int64_t now = clock_->now_ms();
    if (max_staleness_ms_ > 0) {
      auto it = cache_.find(key);
      if (it != cache_.end() &&
          now - it->second.fetched_ms <= max_staleness_ms_)
        return it->second.value;
    }
    auto fresh = store_->get(key);
    if (max_staleness_ms_ > 0) {
      if (fresh)
        cache_[key] = Cached{*fresh, now};
      else
        cache_.erase(key);
    }
    return fresh;
  }

 private:
  struct Cached {
    V value;
    std::int64_t fetched_ms;
  };

  const StateStore<V>* store_;
  const Clock* clock_;
  std::int64_t max_staleness_ms_;
  std::unordered_map<std::string, Cached> cache_;
};

}  // namespace fsd
