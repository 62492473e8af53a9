#include <algorithm>

#include "neura/uarch.hpp"

namespace neura::uarch {

void MemChannelModel::retire(Cycle now) const {
  while (!in_flight_.empty() && in_flight_.front() <= now) in_flight_.pop_front();
}

std::uint32_t MemChannelModel::outstanding(Cycle now) const noexcept {
  retire(now);
  return static_cast<std::uint32_t>(in_flight_.size());
}

bool MemChannelModel::can_accept(Cycle now) const noexcept {
  return next_free_ <= now && outstanding(now) < cfg_.queue_depth;
}

Cycle MemChannelModel::submit(std::uint32_t bytes, Cycle now) {
  const Cycle start = std::max(now, next_free_);
  const Cycle occupancy = (bytes + cfg_.bytes_per_cycle - 1) / cfg_.bytes_per_cycle;
  next_free_ = start + std::max<Cycle>(occupancy, 1);
  const Cycle done = start + std::max(cfg_.fixed_latency, occupancy);
  in_flight_.push_back(done);
  bytes_ += bytes;
  ++txns_;
  return done;
}

MemoryController::MemoryController(std::uint32_t id, const ChannelConfig& cfg) : id_(id), cfg_(cfg), channel_(cfg) {}

std::uint32_t MemoryController::read_free() const noexcept {
  return cfg_.read_queue_depth - static_cast<std::uint32_t>(std::min<std::size_t>(reads_.size(), cfg_.read_queue_depth));
}

std::uint32_t MemoryController::wb_free() const noexcept {
  return cfg_.wb_buffer_depth - static_cast<std::uint32_t>(std::min<std::size_t>(wb_in_.size(), cfg_.wb_buffer_depth));
}

void MemoryController::deliver_read(UnitRef src, std::uint32_t req_id, std::uint64_t addr, Cycle) {
  reads_.push_back({src, req_id, addr - addr % cfg_.granule_bytes});
  ++stats_.read_requests;
}

void MemoryController::deliver_writeback(const Writeback& wb) { wb_in_.push_back(wb); }

std::uint32_t MemoryController::outstanding(Cycle now) const noexcept {
  return static_cast<std::uint32_t>(reads_.size()) + channel_.outstanding(now);
}

bool MemoryController::idle(Cycle now) const noexcept {
  return reads_.empty() && wb_in_.empty() && combine_.empty() && pending_line_writes_ == 0 && txns_.empty() &&
         resp_out_.empty() && channel_.idle(now);
}

void MemoryController::step(Cycle now) {
  progressed_ = false;

  while (!txns_.empty() && txns_.front().done <= now) {
    for (const auto& w : txns_.front().waiters) resp_out_.push_back(w);
    txns_.pop_front();
    progressed_ = true;
  }

  // Write-combine: four (row, col, value) records fill one granule.
  const std::size_t per_line = std::max<std::size_t>(1, cfg_.granule_bytes / 16);
  while (!wb_in_.empty()) {
    combine_.push_back(wb_in_.front());
    written_.push_back(wb_in_.front());
    wb_in_.pop_front();
    ++stats_.writebacks;
    progressed_ = true;
    if (combine_.size() == per_line) {
      ++pending_line_writes_;
      combine_.clear();
    }
  }
  if (draining_ && !combine_.empty()) {
    ++pending_line_writes_;
    combine_.clear();
  }

  if (!channel_.can_accept(now)) return;

  std::size_t reserved = 0;
  for (const auto& t : txns_) reserved += t.waiters.size();

  bool issued = false;
  const bool writes_urgent = pending_line_writes_ >= std::max<std::uint32_t>(1, cfg_.wb_buffer_depth / 2);
  if (!reads_.empty() && !writes_urgent) {
    const std::uint64_t g = reads_.front().granule;
    const std::size_t window = std::min<std::size_t>(reads_.size(), cfg_.reorder_window);
    std::size_t merge = 0;
    for (std::size_t i = 0; i < window; ++i) merge += reads_[i].granule == g;
    if (resp_out_.size() + reserved + merge <= cfg_.resp_queue_depth) {
      Txn t;
      std::deque<Read> rest;
      for (std::size_t i = 0; i < reads_.size(); ++i) {
        if (i < window && reads_[i].granule == g) {
          t.waiters.emplace_back(reads_[i].src, reads_[i].req_id);
        } else {
          rest.push_back(reads_[i]);
        }
      }
      reads_.swap(rest);
      t.done = channel_.submit(cfg_.granule_bytes, now);
      stats_.coalesced += t.waiters.size() - 1;
      ++stats_.read_transactions;
      stats_.bytes_read += cfg_.granule_bytes;
      txns_.push_back(std::move(t));
      issued = true;
    }
  }
  if (!issued && pending_line_writes_ > 0) {
    --pending_line_writes_;
    Txn t;
    t.done = channel_.submit(cfg_.granule_bytes, now);
    ++stats_.write_transactions;
    stats_.bytes_written += cfg_.granule_bytes;
    txns_.push_back(std::move(t));
    issued = true;
  }
  progressed_ = progressed_ || issued;
}

}  // namespace neura::uarch
