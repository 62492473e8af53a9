#include <algorithm>

#include "neura/uarch.hpp"

namespace neura::uarch {

NeuraCore::NeuraCore(std::uint32_t id, const CoreConfig& cfg, const isa::Program* program, const isa::TagLayout* layout,
                     std::uint32_t granule_bytes)
    : id_(id), cfg_(cfg), program_(program), layout_(layout), granule_bytes_(granule_bytes) {
  pipelines_.resize(cfg_.n_pipelines);
  for (auto& p : pipelines_) p.free_regs = cfg_.regs_per_pipeline;
  ports_.resize(cfg_.n_ports);
}

bool NeuraCore::can_accept() const noexcept {
  if (accepted_this_cycle_) return false;
  return std::any_of(pipelines_.begin(), pipelines_.end(),
                     [&](const Pipeline& p) { return p.slots.size() < cfg_.pipeline_queue_depth; });
}

std::uint32_t NeuraCore::alloc_slot() {
  if (!free_slots_.empty()) {
    const auto s = free_slots_.back();
    free_slots_.pop_back();
    return s;
  }
  slots_.emplace_back();
  return static_cast<std::uint32_t>(slots_.size() - 1);
}

void NeuraCore::collect_granules(Slot& s) const {
  s.granules.clear();
  const auto& in = s.instr;
  auto span = [&](std::uint64_t addr, std::uint64_t bytes) {
    if (bytes == 0) return;
    for (std::uint64_t g = addr / granule_bytes_; g <= (addr + bytes - 1) / granule_bytes_; ++g) {
      const std::uint64_t ga = g * granule_bytes_;
      if (std::find(s.granules.begin(), s.granules.end(), ga) == s.granules.end()) s.granules.push_back(ga);
    }
  };
  span(in.base_addr + in.a_data_addr, 8ull * in.n_a);
  span(in.base_addr + in.b_col_ind_addr, 4ull * in.n_b);
  span(in.base_addr + in.b_data_addr, 8ull * in.n_b);
  span(in.base_addr + in.roll_counter_addr, 64);
}

void NeuraCore::accept(const isa::Mmh4Instr& instr, std::uint32_t window, Cycle now) {
  const auto n = static_cast<std::uint32_t>(pipelines_.size());
  for (std::uint32_t k = 0; k < n; ++k) {
    const std::uint32_t p = (rr_accept_ + k) % n;
    if (pipelines_[p].slots.size() >= cfg_.pipeline_queue_depth) continue;
    const auto id = alloc_slot();
    Slot& s = slots_[id];
    s = Slot{};
    s.instr = instr;
    s.window = window;
    s.accepted = now;
    s.stage = Stage::Decode;
    s.ready_at = now + cfg_.decode_latency;
    collect_granules(s);
    pipelines_[p].slots.push_back(id);
    rr_accept_ = (p + 1) % n;
    accepted_this_cycle_ = true;
    ++stats_.accepted;
    return;
  }
  throw SimulationError("core " + std::to_string(id_) + " accepted an MMH4 with every pipeline full");
}

void NeuraCore::deliver_response(std::uint32_t req_id) {
  auto it = req_owner_.find(req_id);
  if (it == req_owner_.end()) {
    throw SimulationError("core " + std::to_string(id_) + " got a response for unknown request " + std::to_string(req_id));
  }
  --slots_[it->second].pending;
  req_owner_.erase(it);
}

std::uint32_t NeuraCore::port_free(std::uint32_t p) const noexcept {
  const auto used = static_cast<std::uint32_t>(ports_[p].size());
  return used >= cfg_.port_queue_depth ? 0 : cfg_.port_queue_depth - used;
}

bool NeuraCore::idle() const noexcept {
  for (const auto& p : pipelines_) {
    if (!p.slots.empty()) return false;
  }
  if (!requests_.empty() || !staged_.empty()) return false;
  for (const auto& q : ports_) {
    if (!q.empty()) return false;
  }
  return req_owner_.empty();
}

void NeuraCore::step(Cycle now) {
  progressed_ = false;
  accepted_this_cycle_ = false;
  const auto n = static_cast<std::uint32_t>(pipelines_.size());

  // Outbound capacity this cycle: every port queue slot not yet taken.
  std::uint32_t room = 0;
  for (std::uint32_t p = 0; p < ports_.size(); ++p) room += port_free(p);
  room -= std::min<std::uint32_t>(room, static_cast<std::uint32_t>(requests_.size() + staged_.size()));

  std::uint32_t agen_budget = cfg_.n_addr_generators;
  std::uint32_t emit_budget = std::min(cfg_.n_ports, room);
  bool want_emit = false;
  bool emit_blocked = false;

  for (std::uint32_t k = 0; k < n; ++k) {
    const std::uint32_t pi = (rr_agen_ + k) % n;
    Pipeline& pipe = pipelines_[pi];
    bool older_front_end = true;   // all older instructions are past RegAlloc
    bool older_multiplied = true;  // all older instructions are past Multiply
    bool waiting_operands = false;
    for (std::size_t pos = 0; pos < pipe.slots.size(); ++pos) {
      Slot& s = slots_[pipe.slots[pos]];
      switch (s.stage) {
        case Stage::Decode:
          if (older_front_end && now >= s.ready_at) {
            s.stage = Stage::RegAlloc;
            s.ready_at = now + cfg_.reg_alloc_latency;
            progressed_ = true;
          }
          break;
        case Stage::RegAlloc:
          if (older_front_end && now >= s.ready_at) {
            if (pipe.free_regs >= cfg_.regs_per_mmh4) {
              pipe.free_regs -= cfg_.regs_per_mmh4;
              s.has_regs = true;
              s.stage = Stage::AddrGen;
              s.ready_at = now + cfg_.addr_gen_latency;
              progressed_ = true;
            } else {
              ++stats_.stall_reg;
            }
          }
          break;
        case Stage::AddrGen:
          if (now >= s.ready_at) {
            while (agen_budget > 0 && s.next_granule < s.granules.size() && room > 0) {
              const std::uint32_t rid = next_req_id_++;
              req_owner_.emplace(rid, pipe.slots[pos]);
              requests_.emplace_back(rid, s.granules[s.next_granule++]);
              ++s.pending;
              --agen_budget;
              --room;
              emit_budget = std::min(emit_budget, room);
              ++stats_.mem_requests;
              progressed_ = true;
            }
            if (s.next_granule == s.granules.size()) s.stage = Stage::Operands;
          }
          break;
        case Stage::Operands:
          if (s.pending == 0 && older_multiplied) {
            s.stage = Stage::Multiply;
            s.ready_at = now + cfg_.multiply_latency;
            progressed_ = true;
          } else {
            waiting_operands = true;
          }
          break;
        case Stage::Multiply:
          if (now >= s.ready_at) {
            s.haccs = isa::expand_mmh4(s.instr, program_->memory, *layout_);
            s.next_hacc = 0;
            s.stage = Stage::Emit;
            progressed_ = true;
          }
          break;
        case Stage::Emit:
          break;
      }
      if (s.stage == Stage::Decode || s.stage == Stage::RegAlloc) older_front_end = false;
      if (s.stage != Stage::Emit) older_multiplied = false;
    }
    if (waiting_operands && !pipe.slots.empty() && slots_[pipe.slots.front()].stage == Stage::Operands) {
      ++stats_.stall_operand;
    }

    // Head of the pipeline: finish multiply, emit, retire (in order).
    while (!pipe.slots.empty()) {
      const std::uint32_t id = pipe.slots.front();
      Slot& s = slots_[id];
      if (s.stage != Stage::Emit) break;
      want_emit = want_emit || s.next_hacc < s.haccs.size();
      while (s.next_hacc < s.haccs.size() && emit_budget > 0) {
        staged_.push_back({s.haccs[s.next_hacc++], s.window});
        --emit_budget;
        --room;
        ++stats_.haccs_emitted;
        progressed_ = true;
      }
      if (s.next_hacc < s.haccs.size()) {
        emit_blocked = true;
        break;
      }
      const Cycle cpi = now - s.accepted;
      (s.instr.lanes() == 16 ? stats_.cpi_full : stats_.cpi_ragged).add(cpi);
      pipe.free_regs += cfg_.regs_per_mmh4;
      ++stats_.retired;
      pipe.slots.pop_front();
      free_slots_.push_back(id);
      progressed_ = true;
    }
  }
  if (want_emit && emit_blocked && room == 0) ++stats_.stall_port;
  rr_agen_ = (rr_agen_ + 1) % n;
  rr_emit_ = (rr_emit_ + 1) % n;
}

}  // namespace neura::uarch
