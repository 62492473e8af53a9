#include <algorithm>

#include "neura/oracle.hpp"
#include "neura/uarch.hpp"

namespace neura::uarch {

NeuraMem::NeuraMem(std::uint32_t id, const MemConfig& cfg, const isa::TagLayout* layout, bool barrier_eviction)
    : id_(id), cfg_(cfg), layout_(layout), barrier_(barrier_eviction), pad_(cfg.hashlines) {
  engines_.resize(cfg_.hash_engines);
  const std::uint32_t per = cfg_.hashlines / cfg_.hash_engines;
  for (std::uint32_t e = 0; e < cfg_.hash_engines; ++e) {
    auto& eng = engines_[e];
    eng.first_line = e * per;
    eng.n_lines = e + 1 == cfg_.hash_engines ? cfg_.hashlines - e * per : per;
    eng.prime = std::max<std::uint64_t>(oracle::prev_prime(eng.n_lines), 2);
  }
}

std::uint32_t NeuraMem::engine_of(isa::Tag32 tag) const noexcept {
  std::uint32_t h = tag;
  h ^= h >> 16;
  h *= 0x7feb352dU;
  h ^= h >> 15;
  h *= 0x846ca68bU;
  h ^= h >> 16;
  return h % cfg_.hash_engines;
}

std::uint32_t NeuraMem::inbox_free() const noexcept {
  const auto used = static_cast<std::uint32_t>(inbox_.size());
  return used >= cfg_.instr_buffer_depth ? 0 : cfg_.instr_buffer_depth - used;
}

void NeuraMem::deliver(const Packet& p, Cycle now) { inbox_.push_back({p.hacc, p.window, now}); }

void NeuraMem::begin_flush(std::uint32_t window) {
  flush_window_ = window;
  for (auto& e : engines_) e.flush_cursor = 0;
}

std::map<std::uint32_t, std::uint64_t> NeuraMem::take_applied() {
  std::map<std::uint32_t, std::uint64_t> out;
  out.swap(applied_);
  return out;
}

std::uint64_t NeuraMem::lines_of_window(std::uint32_t w) const {
  auto it = live_per_window_.find(w);
  return it == live_per_window_.end() ? 0 : it->second;
}

bool NeuraMem::idle() const noexcept {
  if (!inbox_.empty() || !wb_out_.empty() || flush_window_) return false;
  return std::none_of(engines_.begin(), engines_.end(),
                      [](const Engine& e) { return e.current.has_value() || e.pending_wb.has_value(); });
}

std::uint32_t NeuraMem::apply(Engine& e, const Queued& q, std::optional<Writeback>& wb) {
  const auto tag = q.hacc.tag;
  const std::uint64_t home = tag % e.prime;
  std::optional<std::uint32_t> free_at;
  std::uint32_t free_probe = 0;
  // Associative match over the region; the probe index of the matching line
  // (or of the first free line for an insert) sets the compare time.
  for (std::uint64_t i = 0; i < e.prime; ++i) {
    const auto slot = static_cast<std::uint32_t>(e.first_line + (home + (i * i) % e.prime) % e.prime);
    Line& line = pad_[slot];
    if (line.used && line.tag == tag) {
      line.data += q.hacc.data;
      ++stats_.updates;
      if (!barrier_) {
        if (line.counter == 0) throw SimulationError("HACC update on a line whose counter is already zero");
        if (--line.counter == 0) {
          const auto [row, col] = isa::decode_tag(tag, *layout_);
          wb = Writeback{row, col, line.data, line.window};
          line.used = false;
          --live_;
          --live_per_window_[line.window];
        }
      }
      return static_cast<std::uint32_t>(i);
    }
    if (!line.used && !free_at) {
      free_at = slot;
      free_probe = static_cast<std::uint32_t>(i);
    }
  }
  if (!free_at) {
    throw SimulationError("NeuraMem " + std::to_string(id_) + ": HashPad region full (" + std::to_string(e.n_lines) +
                          " lines); the window plan is too large for this chip");
  }
  ++stats_.inserts;
  if (!barrier_ && q.hacc.counter == 0) {
    const auto [row, col] = isa::decode_tag(tag, *layout_);
    wb = Writeback{row, col, q.hacc.data, q.window};
    return free_probe;
  }
  Line& line = pad_[*free_at];
  line = Line{tag, q.hacc.data, q.hacc.counter, q.window, true};
  ++live_;
  ++live_per_window_[q.window];
  stats_.max_occupancy = std::max(stats_.max_occupancy, live_);
  return free_probe;
}

void NeuraMem::step(Cycle now) {
  progressed_ = false;

  auto complete = [&](Engine& e) {
    if (!e.current || e.busy_until > now) return;
    if (e.pending_wb) {
      if (wb_out_.size() >= cfg_.wb_queue_depth) {
        ++stats_.stall_wb;
        return;
      }
      wb_out_.push_back(*e.pending_wb);
      e.pending_wb.reset();
      ++stats_.evictions;
    }
    stats_.cpi.add(now - e.current->accepted);
    ++applied_[e.current->window];
    e.current.reset();
    progressed_ = true;
  };

  for (auto& e : engines_) complete(e);

  std::vector<bool> flushed(engines_.size(), false);
  if (flush_window_) {
    const std::uint32_t w = *flush_window_;
    for (std::size_t ei = 0; ei < engines_.size(); ++ei) {
      Engine& e = engines_[ei];
      if (e.current || wb_out_.size() >= cfg_.wb_queue_depth) continue;
      while (e.flush_cursor < e.n_lines) {
        Line& line = pad_[e.first_line + e.flush_cursor++];
        if (line.used && line.window == w) {
          const auto [row, col] = isa::decode_tag(line.tag, *layout_);
          wb_out_.push_back({row, col, line.data, w});
          line.used = false;
          --live_;
          --live_per_window_[w];
          ++stats_.evictions;
          flushed[ei] = true;
          progressed_ = true;
          break;
        }
      }
    }
    if (lines_of_window(w) == 0) {
      live_per_window_.erase(w);
      flush_window_.reset();
    }
  }

  // Each idle engine takes the oldest HACC addressed to it.
  std::uint32_t idle_engines = 0;
  for (std::size_t ei = 0; ei < engines_.size(); ++ei) idle_engines += !engines_[ei].current && !flushed[ei];
  for (auto it = inbox_.begin(); it != inbox_.end() && idle_engines > 0;) {
    const std::uint32_t ei = engine_of(it->hacc.tag);
    Engine& e = engines_[ei];
    if (e.current || flushed[ei]) {
      ++it;
      continue;
    }
    std::optional<Writeback> wb;
    const std::uint32_t probes = apply(e, *it, wb);
    stats_.probes += probes;
    ++stats_.haccs;
    const Cycle compare = cfg_.full_parallel_compare ? 1 : (probes + cfg_.comparators_per_engine) / cfg_.comparators_per_engine;
    e.busy_until = now + compare * cfg_.compare_latency + cfg_.accumulate_latency - 1;
    e.current = *it;
    e.pending_wb = wb;
    it = inbox_.erase(it);
    --idle_engines;
    progressed_ = true;
  }

  for (auto& e : engines_) complete(e);
}

}  // namespace neura::uarch
