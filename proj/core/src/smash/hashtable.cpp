#include "neura/smash.hpp"

namespace neura::smash {

ScratchpadHashTable::ScratchpadHashTable(std::uint64_t capacity, bool direct, std::optional<std::uint64_t> probe_limit)
    : capacity_(capacity), probe_limit_(probe_limit.value_or(capacity)), direct_(direct) {
  if (capacity_ == 0) throw ConfigError("hashtable capacity must be > 0");
  if (!direct_ && !oracle::is_prime(capacity_)) {
    throw ConfigError("hashtable capacity " + std::to_string(capacity_) + " is not prime");
  }
  tags_ = std::make_unique<std::atomic<std::uint64_t>[]>(capacity_);
  vals_ = std::make_unique<std::atomic<double>[]>(capacity_);
  for (std::uint64_t s = 0; s < capacity_; ++s) {
    tags_[s].store(kEmpty, std::memory_order_relaxed);
    vals_[s].store(0.0, std::memory_order_relaxed);
  }
}

void ScratchpadHashTable::accumulate(std::uint64_t slot, double value) noexcept {
  auto& cell = vals_[slot];
  double seen = cell.load(std::memory_order_relaxed);
  while (!cell.compare_exchange_weak(seen, seen + value, std::memory_order_acq_rel, std::memory_order_relaxed)) {
  }
}

ProbeResult ScratchpadHashTable::insert(std::uint64_t tag, double value) {
  if (tag == kEmpty) throw ConfigError("tag collides with the EMPTY sentinel");
  if (direct_) {
    const std::uint64_t slot = tag_col(tag);
    if (slot >= capacity_) throw OverflowError("column " + std::to_string(slot) + " beyond direct table");
    std::uint64_t expected = kEmpty;
    const bool won = tags_[slot].compare_exchange_strong(expected, tag, std::memory_order_acq_rel);
    if (!won && expected != tag) {
      throw OverflowError("direct table slot " + std::to_string(slot) + " holds a different row");
    }
    accumulate(slot, value);
    return {won ? HashOutcome::Inserted : HashOutcome::Updated, 0, slot};
  }

  const std::uint64_t home = tag % capacity_;
  for (std::uint64_t i = 0; i <= probe_limit_; ++i) {
    const std::uint64_t slot = (home + (i % capacity_) * (i % capacity_)) % capacity_;
    std::uint64_t expected = tag_at(slot);
    if (expected == kEmpty) {
      if (tags_[slot].compare_exchange_strong(expected, tag, std::memory_order_acq_rel)) {
        accumulate(slot, value);
        return {i == 0 ? HashOutcome::Inserted : HashOutcome::Probed, static_cast<std::uint32_t>(i), slot};
      }
      // Lost the race; `expected` now holds the winner's tag.
    }
    if (expected == tag) {
      accumulate(slot, value);
      return {HashOutcome::Updated, static_cast<std::uint32_t>(i), slot};
    }
  }
  throw OverflowError("hashtable of capacity " + std::to_string(capacity_) + " full after " +
                      std::to_string(probe_limit_) + " probes");
}

std::uint64_t ScratchpadHashTable::occupancy() const noexcept {
  std::uint64_t n = 0;
  for (std::uint64_t s = 0; s < capacity_; ++s) n += tag_at(s) != kEmpty;
  return n;
}

ProbeResult hash_probe_insert(ScratchpadHashTable& table, std::uint64_t tag, double value) {
  return table.insert(tag, value);
}

}  // namespace neura::smash
