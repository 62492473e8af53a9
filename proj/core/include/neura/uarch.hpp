#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "neura/isa.hpp"

namespace neura::uarch {

// --- Configuration -----------------------------------------------------------

struct CoreConfig {
  std::uint32_t n_pipelines = 4;
  std::uint32_t regs_per_pipeline = 8;
  std::uint32_t reg_bits = 128;
  std::uint32_t n_multipliers = 4;
  std::uint32_t n_addr_generators = 2;
  std::uint32_t n_ports = 4;
  /// Registers held by one in-flight MMH4.
  std::uint32_t regs_per_mmh4 = 4;
  std::uint32_t pipeline_queue_depth = 4;
  std::uint32_t port_queue_depth = 8;

  Cycle decode_latency = 1;
  Cycle reg_alloc_latency = 1;
  Cycle addr_gen_latency = 1;
  Cycle multiply_latency = 2;
};

struct MemConfig {
  std::uint32_t hash_engines = 4;
  std::uint32_t comparators_per_engine = 4;
  std::uint32_t hashlines = 2048;
  std::uint32_t hashline_bytes = 12;  // 32-bit TAG + 64-bit DATA; COUNTER kept in the engine
  std::uint32_t n_ports = 4;
  std::uint32_t instr_buffer_depth = 16;
  std::uint32_t wb_queue_depth = 8;

  Cycle compare_latency = 1;
  Cycle accumulate_latency = 1;
  /// Compare against every TAG of the region in one step.
  bool full_parallel_compare = false;
};

struct NocConfig {
  Cycle hop_latency = 1;
  std::uint32_t buffer_depth = 4;  // flits per (input port, virtual network)
  /// Eviction write-backs bypass the torus on a dedicated path to the
  /// tile's memory controller.
  bool dedicated_writeback = false;
};

struct ChannelConfig {
  std::uint32_t bytes_per_cycle = 16;
  Cycle fixed_latency = 100;
  std::uint32_t queue_depth = 32;  // outstanding transactions
  std::uint32_t granule_bytes = 64;
  std::uint32_t read_queue_depth = 64;
  std::uint32_t reorder_window = 16;
  std::uint32_t resp_queue_depth = 64;
  std::uint32_t wb_buffer_depth = 16;
};

struct ChipConfig {
  std::string name = "custom";
  std::uint32_t n_tiles = 8;
  std::uint32_t cores_per_tile = 16;
  std::uint32_t mems_per_tile = 16;
  std::uint32_t routers_per_tile = 32;
  double frequency_ghz = 1.0;
  CoreConfig core;
  MemConfig mem;
  NocConfig noc;
  ChannelConfig channel;

  std::uint32_t total_cores() const noexcept { return n_tiles * cores_per_tile; }
  std::uint32_t total_mems() const noexcept { return n_tiles * mems_per_tile; }
  std::uint32_t total_routers() const noexcept { return n_tiles * routers_per_tile; }
  std::uint32_t total_pipelines() const noexcept { return total_cores() * core.n_pipelines; }
  std::uint32_t total_hash_engines() const noexcept { return total_mems() * mem.hash_engines; }
  std::uint32_t register_bits_per_pipeline() const noexcept { return core.regs_per_pipeline * core.reg_bits; }
  std::uint64_t total_hashlines() const noexcept { return std::uint64_t{total_mems()} * mem.hashlines; }
  std::uint64_t hashpad_bytes() const noexcept { return total_hashlines() * mem.hashline_bytes; }
  std::uint32_t n_memory_controllers() const noexcept { return n_tiles; }
  /// Aggregate channel bandwidth in GB/s.
  double peak_bandwidth_gbs() const noexcept {
    return n_memory_controllers() * channel.bytes_per_cycle * frequency_ghz;
  }

  void validate() const;
};

/// tile4, tile16, tile64, and tile16-gnn (the 16x16 NeuraCore grid used for
/// the GNN comparison).
ChipConfig named_config(const std::string& name);
std::vector<std::string> config_names();
ChipConfig config_from_json(const std::string& text);
std::string config_to_json(const ChipConfig& cfg);

// --- Topology ----------------------------------------------------------------

enum class Direction : std::uint8_t { East = 0, West = 1, North = 2, South = 3, Local = 4 };

struct Torus {
  std::uint32_t width = 1;   // X
  std::uint32_t height = 1;  // Y

  std::uint32_t size() const noexcept { return width * height; }
  std::uint32_t x(std::uint32_t r) const noexcept { return r % width; }
  std::uint32_t y(std::uint32_t r) const noexcept { return r / width; }
  std::uint32_t at(std::uint32_t x, std::uint32_t y) const noexcept { return y * width + x; }
  std::uint32_t neighbor(std::uint32_t r, Direction d) const noexcept;
  std::uint32_t distance(std::uint32_t a, std::uint32_t b) const noexcept;
  std::uint32_t diameter() const noexcept { return width / 2 + height / 2; }

  /// Most square factorization of n routers.
  static Torus for_routers(std::uint32_t n);
};

/// Dimension-ordered next hop (X then Y). When both directions of a ring are
/// equally short, `queue_len(dir)` decides; ties go to East/North.
template <class QueueLen>
Direction route(const Torus& t, std::uint32_t src, std::uint32_t dst, QueueLen&& queue_len) {
  if (src == dst) return Direction::Local;
  auto pick = [&](std::uint32_t from, std::uint32_t to, std::uint32_t n, Direction plus, Direction minus) {
    const std::uint32_t fwd = (to + n - from) % n;
    const std::uint32_t back = n - fwd;
    if (fwd < back) return plus;
    if (back < fwd) return minus;
    return queue_len(minus) < queue_len(plus) ? minus : plus;
  };
  if (t.x(src) != t.x(dst)) return pick(t.x(src), t.x(dst), t.width, Direction::East, Direction::West);
  return pick(t.y(src), t.y(dst), t.height, Direction::North, Direction::South);
}

inline Direction route(const Torus& t, std::uint32_t src, std::uint32_t dst) {
  return route(t, src, dst, [](Direction) { return 0u; });
}

enum class UnitKind : std::uint8_t { Core, Mem, Mc };

struct UnitRef {
  UnitKind kind = UnitKind::Core;
  std::uint32_t index = 0;

  friend bool operator==(const UnitRef&, const UnitRef&) = default;
};

struct Attachment {
  UnitRef unit;
  std::uint32_t first_port = 0;  // router input/output port of the unit's port 0
  std::uint32_t n_ports = 0;
};

/// Structural instance: where every component sits on the torus.
struct Chip {
  ChipConfig config;
  Torus torus;
  std::vector<std::uint32_t> core_router;
  std::vector<std::uint32_t> mem_router;
  std::vector<std::uint32_t> mc_router;
  std::vector<std::uint32_t> core_tile;
  std::vector<std::uint32_t> mem_tile;
  /// Units attached to each router, in port order. Ports 0..3 are the mesh
  /// directions; local ports follow.
  std::vector<std::vector<Attachment>> attachments;

  std::uint32_t n_cores() const noexcept { return static_cast<std::uint32_t>(core_router.size()); }
  std::uint32_t n_mems() const noexcept { return static_cast<std::uint32_t>(mem_router.size()); }
  std::uint32_t n_mcs() const noexcept { return static_cast<std::uint32_t>(mc_router.size()); }
  std::uint32_t n_routers() const noexcept { return torus.size(); }
  std::uint32_t router_ports(std::uint32_t r) const;
  const Attachment& attachment(UnitRef u) const;
  std::uint64_t total_pipelines() const noexcept { return std::uint64_t{n_cores()} * config.core.n_pipelines; }
  std::uint64_t hashpad_bytes() const noexcept { return std::uint64_t{n_mems()} * config.mem.hashlines * config.mem.hashline_bytes; }
};

Chip build_chip(const ChipConfig& cfg);

// --- Packets -----------------------------------------------------------------

enum class VNet : std::uint8_t { Req = 0, Hacc = 1, Wb = 2, Resp = 3 };
inline constexpr std::size_t kVNets = 4;

struct Packet {
  VNet vnet = VNet::Req;
  std::uint32_t dst_router = 0;
  UnitRef dst;
  UnitRef src;
  Cycle injected = 0;
  std::uint32_t hops = 0;
  bool dim_y = false;  // currently travelling in Y (bubble rule)

  // Req / Resp
  std::uint64_t addr = 0;
  std::uint32_t req_id = 0;
  // Hacc / Wb
  isa::HaccInstr hacc;
  std::uint32_t window = 0;
  Index row = 0;
  Index col = 0;
};

// --- Statistics helpers ------------------------------------------------------

/// Exact CPI histogram: cycles -> count.
struct CpiHistogram {
  std::map<Cycle, std::uint64_t> buckets;
  std::uint64_t count = 0;
  std::uint64_t total = 0;

  void add(Cycle c) {
    ++buckets[c];
    ++count;
    total += c;
  }
  void merge(const CpiHistogram& o) {
    for (const auto& [c, n] : o.buckets) buckets[c] += n;
    count += o.count;
    total += o.total;
  }
  double mean() const noexcept { return count ? static_cast<double>(total) / static_cast<double>(count) : 0.0; }
};

// --- Memory channel ----------------------------------------------------------

/// Fixed latency, bandwidth cap and bounded number of outstanding
/// transactions. A transaction occupies the channel for bytes/bandwidth
/// cycles and completes `fixed_latency` cycles after it starts.
class MemChannelModel {
public:
  explicit MemChannelModel(const ChannelConfig& cfg) : cfg_(cfg) {}

  bool can_accept(Cycle now) const noexcept;
  /// Returns the completion cycle.
  Cycle submit(std::uint32_t bytes, Cycle now);
  std::uint32_t outstanding(Cycle now) const noexcept;
  bool idle(Cycle now) const noexcept { return outstanding(now) == 0; }

  std::uint64_t bytes_served() const noexcept { return bytes_; }
  std::uint64_t transactions() const noexcept { return txns_; }
  const ChannelConfig& config() const noexcept { return cfg_; }

private:
  void retire(Cycle now) const;

  ChannelConfig cfg_;
  Cycle next_free_ = 0;
  mutable std::deque<Cycle> in_flight_;  // completion cycles, nondecreasing
  std::uint64_t bytes_ = 0;
  std::uint64_t txns_ = 0;
};

// --- Components ----------------------------------------------------------------

struct CoreStats {
  std::uint64_t accepted = 0;
  std::uint64_t retired = 0;
  std::uint64_t haccs_emitted = 0;
  std::uint64_t mem_requests = 0;
  std::uint64_t stall_reg = 0;
  std::uint64_t stall_operand = 0;
  std::uint64_t stall_port = 0;
  CpiHistogram cpi_full;    // 4x4 tiles
  CpiHistogram cpi_ragged;  // masked tiles
};

/// HACC waiting in a core for its target NeuraMem (assigned by the mapper).
struct PendingHacc {
  isa::HaccInstr hacc;
  std::uint32_t window = 0;
};

/// Quad-pipeline in-order core. One MMH4 accepted per cycle into a
/// round-robin pipeline; decode, register allocation, address generation,
/// operand wait, multiply, then HACC emission through the ports.
class NeuraCore {
public:
  NeuraCore(std::uint32_t id, const CoreConfig& cfg, const isa::Program* program, const isa::TagLayout* layout,
            std::uint32_t granule_bytes);

  bool can_accept() const noexcept;
  void accept(const isa::Mmh4Instr& instr, std::uint32_t window, Cycle now);

  /// Evaluate phase: advance pipelines. Reads only own state and the
  /// (read-only) program image.
  void step(Cycle now);

  /// Operand response for request `req_id`.
  void deliver_response(std::uint32_t req_id);

  /// Memory requests produced this cycle (granule addresses).
  std::deque<std::pair<std::uint32_t, std::uint64_t>>& request_queue() noexcept { return requests_; }
  /// HACCs produced this cycle, awaiting mapping.
  std::vector<PendingHacc>& staged_haccs() noexcept { return staged_; }
  /// Per-port outbound packets.
  std::vector<std::deque<Packet>>& ports() noexcept { return ports_; }
  std::uint32_t port_free(std::uint32_t p) const noexcept;

  bool idle() const noexcept;
  std::uint32_t id() const noexcept { return id_; }
  std::uint32_t outstanding_requests() const noexcept { return static_cast<std::uint32_t>(req_owner_.size()); }
  const CoreStats& stats() const noexcept { return stats_; }
  bool progressed() const noexcept { return progressed_; }

private:
  enum class Stage : std::uint8_t { Decode, RegAlloc, AddrGen, Operands, Multiply, Emit };

  struct Slot {
    isa::Mmh4Instr instr;
    std::uint32_t window = 0;
    Stage stage = Stage::Decode;
    Cycle accepted = 0;
    Cycle ready_at = 0;  // earliest cycle the current stage may finish
    bool has_regs = false;
    std::vector<std::uint64_t> granules;
    std::size_t next_granule = 0;
    std::uint32_t pending = 0;
    std::vector<isa::HaccInstr> haccs;
    std::size_t next_hacc = 0;
  };

  struct Pipeline {
    std::deque<std::uint32_t> slots;  // indices into slots_, program order
    std::uint32_t free_regs = 0;
  };

  std::uint32_t alloc_slot();
  void collect_granules(Slot& s) const;

  std::uint32_t id_;
  CoreConfig cfg_;
  const isa::Program* program_;
  const isa::TagLayout* layout_;
  std::uint32_t granule_bytes_;
  std::vector<Pipeline> pipelines_;
  std::vector<Slot> slots_;
  std::vector<std::uint32_t> free_slots_;
  std::uint32_t rr_accept_ = 0;
  std::uint32_t rr_emit_ = 0;
  std::uint32_t rr_agen_ = 0;
  bool accepted_this_cycle_ = false;
  std::uint32_t next_req_id_ = 0;
  std::unordered_map<std::uint32_t, std::uint32_t> req_owner_;  // req id -> slot
  std::deque<std::pair<std::uint32_t, std::uint64_t>> requests_;
  std::vector<PendingHacc> staged_;
  std::vector<std::deque<Packet>> ports_;
  CoreStats stats_;
  bool progressed_ = false;
};

struct MemStats {
  std::uint64_t haccs = 0;
  std::uint64_t inserts = 0;
  std::uint64_t updates = 0;
  std::uint64_t evictions = 0;
  std::uint64_t probes = 0;
  std::uint64_t stall_wb = 0;
  std::uint64_t max_occupancy = 0;
  CpiHistogram cpi;
};

/// Write-back record produced by an eviction.
struct Writeback {
  Index row = 0;
  Index col = 0;
  double value = 0.0;
  std::uint32_t window = 0;
};

/// Hash engines over a HashPad with rolling (counter) or barrier eviction.
class NeuraMem {
public:
  NeuraMem(std::uint32_t id, const MemConfig& cfg, const isa::TagLayout* layout, bool barrier_eviction);

  std::uint32_t inbox_free() const noexcept;
  void deliver(const Packet& p, Cycle now);

  void step(Cycle now);

  /// Barrier mode: start writing back every line of `window`.
  void begin_flush(std::uint32_t window);
  bool flushing() const noexcept { return flush_window_.has_value(); }

  std::deque<Writeback>& writebacks() noexcept { return wb_out_; }
  std::uint64_t occupancy() const noexcept { return live_; }
  /// Applied HACC count per window since the last query.
  std::map<std::uint32_t, std::uint64_t> take_applied();
  std::uint64_t lines_of_window(std::uint32_t w) const;

  bool idle() const noexcept;
  const MemStats& stats() const noexcept { return stats_; }
  bool progressed() const noexcept { return progressed_; }
  std::uint32_t engine_of(isa::Tag32 tag) const noexcept;

private:
  struct Line {
    isa::Tag32 tag = 0;
    double data = 0.0;
    std::uint32_t counter = 0;
    std::uint32_t window = 0;
    bool used = false;
  };

  struct Queued {
    isa::HaccInstr hacc;
    std::uint32_t window = 0;
    Cycle accepted = 0;
  };

  struct Engine {
    std::uint32_t first_line = 0;
    std::uint32_t n_lines = 0;
    std::uint64_t prime = 2;
    Cycle busy_until = 0;
    std::optional<Queued> current;
    std::optional<Writeback> pending_wb;
    std::uint32_t flush_cursor = 0;
  };

  /// Applies the HACC to the pad; returns probes used.
  std::uint32_t apply(Engine& e, const Queued& q, std::optional<Writeback>& wb);

  std::uint32_t id_;
  MemConfig cfg_;
  const isa::TagLayout* layout_;
  bool barrier_;
  std::vector<Line> pad_;
  std::vector<Engine> engines_;
  std::deque<Queued> inbox_;
  std::deque<Writeback> wb_out_;
  std::optional<std::uint32_t> flush_window_;
  std::uint64_t live_ = 0;
  std::map<std::uint32_t, std::uint64_t> applied_;
  std::map<std::uint32_t, std::uint64_t> live_per_window_;
  MemStats stats_;
  bool progressed_ = false;
};

struct McStats {
  std::uint64_t read_requests = 0;
  std::uint64_t read_transactions = 0;
  std::uint64_t coalesced = 0;
  std::uint64_t write_transactions = 0;
  std::uint64_t writebacks = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
};

/// Granule-coalescing memory controller in front of one channel.
class MemoryController {
public:
  MemoryController(std::uint32_t id, const ChannelConfig& cfg);

  std::uint32_t read_free() const noexcept;
  std::uint32_t wb_free() const noexcept;
  /// `addr` is a byte address; reads are tracked per granule.
  void deliver_read(UnitRef src, std::uint32_t req_id, std::uint64_t addr, Cycle now);
  void deliver_writeback(const Writeback& wb);

  void step(Cycle now);
  /// Flush the partially filled write-combine line.
  void drain() { draining_ = true; }

  /// Completed reads to answer: (requester, req id).
  std::deque<std::pair<UnitRef, std::uint32_t>>& responses() noexcept { return resp_out_; }
  const std::vector<Writeback>& written() const noexcept { return written_; }
  bool idle(Cycle now) const noexcept;
  const McStats& stats() const noexcept { return stats_; }
  const MemChannelModel& channel() const noexcept { return channel_; }
  std::uint32_t outstanding(Cycle now) const noexcept;
  bool progressed() const noexcept { return progressed_; }

private:
  struct Read {
    UnitRef src;
    std::uint32_t req_id = 0;
    std::uint64_t granule = 0;
  };
  struct Txn {
    Cycle done = 0;
    std::vector<std::pair<UnitRef, std::uint32_t>> waiters;
  };

  std::uint32_t id_;
  ChannelConfig cfg_;
  MemChannelModel channel_;
  std::deque<Read> reads_;
  std::deque<Writeback> wb_in_;
  std::vector<Writeback> combine_;
  std::uint32_t pending_line_writes_ = 0;
  std::deque<Txn> txns_;
  std::deque<std::pair<UnitRef, std::uint32_t>> resp_out_;
  std::vector<Writeback> written_;
  bool draining_ = false;
  McStats stats_;
  bool progressed_ = false;
};

/// Input-buffered torus router with one flit per output port per cycle,
/// dimension-ordered routing and bubble flow control per virtual network.
class Router {
public:
  Router(std::uint32_t id, std::uint32_t n_ports, std::uint32_t depth);

  std::uint32_t id() const noexcept { return id_; }
  std::uint32_t n_ports() const noexcept { return static_cast<std::uint32_t>(in_.size()); }
  std::deque<Packet>& input(std::uint32_t port, VNet v) { return in_[port][static_cast<std::size_t>(v)]; }
  const std::deque<Packet>& input(std::uint32_t port, VNet v) const { return in_[port][static_cast<std::size_t>(v)]; }
  std::uint32_t depth() const noexcept { return depth_; }
  std::uint32_t occupancy() const noexcept { return occupancy_; }

  struct Move {
    std::uint32_t in_port;
    VNet vnet;
    std::uint32_t out_port;
  };
  std::vector<Move>& moves() noexcept { return moves_; }

  /// Bookkeeping used by the engine when moving flits.
  void pushed() noexcept { ++occupancy_; }
  void popped() noexcept { --occupancy_; }
  std::uint32_t& rr(std::uint32_t out_port) { return rr_[out_port]; }

private:
  std::uint32_t id_;
  std::uint32_t depth_;
  std::vector<std::array<std::deque<Packet>, kVNets>> in_;
  std::vector<std::uint32_t> rr_;
  std::vector<Move> moves_;
  std::uint32_t occupancy_ = 0;
};

}  // namespace neura::uarch
