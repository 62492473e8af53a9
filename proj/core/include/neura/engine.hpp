#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "neura/isa.hpp"
#include "neura/mapping.hpp"
#include "neura/matio.hpp"
#include "neura/oracle.hpp"
#include "neura/uarch.hpp"

namespace neura::engine {

enum class EvictionMode { Rolling, Barrier };

std::string to_string(EvictionMode m);

struct SimOptions {
  EvictionMode eviction = EvictionMode::Rolling;
  /// Host worker threads for the evaluate phases. Results never depend on it.
  unsigned host_threads = 1;
  /// Time-series sampling period in cycles.
  Cycle sample_interval = 256;
  /// Window budget as a fraction of the chip's HashPad lines. At most two
  /// windows are in flight, so 0.25 keeps the live set under half the pad.
  double spad_fraction = 0.25;
  /// 0 = derived from the topology and stage latencies.
  Cycle deadlock_cycles = 0;
  /// Hard stop; exceeding it is a simulation error. 0 = unlimited.
  Cycle max_cycles = 0;
};

struct Sample {
  Cycle cycle = 0;
  std::uint64_t inflight_reads = 0;
  std::uint64_t hashpad_occupancy = 0;
  std::uint64_t flits_in_network = 0;
  std::uint64_t mmh4_retired = 0;
  std::uint64_t haccs_applied = 0;
};

struct SimStats {
  std::string config;
  std::string mapper;
  std::string eviction;
  std::uint64_t seed = 0;

  Cycle cycles = 0;
  std::uint64_t mmh4_total = 0;
  std::uint64_t mmh4_retired = 0;
  std::uint64_t haccs_emitted = 0;
  std::uint64_t haccs_applied = 0;
  std::uint64_t inserts = 0;
  std::uint64_t updates = 0;
  std::uint64_t evictions = 0;
  std::uint64_t probes = 0;
  std::uint64_t writebacks_received = 0;
  std::uint64_t mapper_assignments = 0;
  std::uint64_t total_fma = 0;
  std::uint64_t total_out_nnz = 0;
  std::uint32_t windows = 0;

  std::uint64_t stall_reg = 0;
  std::uint64_t stall_operand = 0;
  std::uint64_t stall_port = 0;
  std::uint64_t stall_wb = 0;
  std::uint64_t stall_dispatch = 0;
  std::uint64_t stall_window = 0;

  std::uint64_t hashpad_peak = 0;       // chip-wide live lines, max over cycles
  std::uint64_t hashpad_peak_unit = 0;  // max over NeuraMems
  std::uint64_t hashpad_final = 0;

  std::uint64_t flits = 0;
  std::uint64_t hops_total = 0;
  std::uint32_t hops_max = 0;

  std::uint64_t mem_read_requests = 0;
  std::uint64_t mem_read_transactions = 0;
  std::uint64_t mem_coalesced = 0;
  std::uint64_t mem_write_transactions = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;

  uarch::CpiHistogram cpi_mmh4_full;
  uarch::CpiHistogram cpi_mmh4_ragged;
  uarch::CpiHistogram cpi_hacc;

  std::vector<std::uint64_t> core_haccs;
  std::vector<std::uint64_t> core_mmh4;
  std::vector<std::uint64_t> mem_haccs;
  std::vector<Sample> series;
};

struct SimResult {
  SimStats stats;
  matio::CsrMatrix c;
  mapping::Heatmap heatmap;
  mapping::GammaState gamma;
  /// MMH4 index -> core, in dispatch order.
  std::vector<std::uint32_t> dispatch_log;
  double wall_seconds = 0.0;
};

/// One simulation: a chip, a lowered program and a mapper.
class SimRun {
public:
  SimRun(const uarch::ChipConfig& chip, const isa::Program& program, const mapping::MapperConfig& mapper,
         const SimOptions& options = {});
  ~SimRun();
  SimRun(const SimRun&) = delete;
  SimRun& operator=(const SimRun&) = delete;

  /// Advances until every instruction retired and every eviction reached
  /// memory; checks the conservation laws on exit.
  SimResult run_to_completion();

  Cycle cycle() const noexcept;
  const uarch::Chip& chip() const noexcept;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Symbolic pass, window planning and lowering for C = A * B on `chip`.
isa::Program prepare_spgemm(const matio::CsrMatrix& a, const matio::CsrMatrix& b, const uarch::ChipConfig& chip,
                            const SimOptions& options = {});

SimResult simulate_spgemm(const matio::CsrMatrix& a, const matio::CsrMatrix& b, const uarch::ChipConfig& chip,
                          const mapping::MapperConfig& mapper, const SimOptions& options = {});

/// Deadlock threshold: 10 x (network diameter + longest stage latency).
Cycle deadlock_threshold(const uarch::Chip& chip);

// --- Reports -----------------------------------------------------------------

/// Deterministic JSON; no wall-clock fields.
std::string stats_json(const SimStats& s);
/// "cycles,count" rows in increasing cycle order.
std::string cpi_csv(const uarch::CpiHistogram& h);
std::string series_csv(const std::vector<Sample>& series);
/// Wall time and KCPS; the only non-deterministic output.
std::string run_log_json(const SimResult& r);

/// Writes stats.json, heatmap.csv, cpi_<kind>.csv, timeseries.csv and the
/// run_log.json sidecar into `dir` (created if needed).
void write_outputs(const SimResult& r, const std::string& dir);

// --- Memory channel probe ----------------------------------------------------

struct ChannelProbe {
  double bytes_per_cycle = 0.0;
  Cycle isolated_latency = 0;
  std::uint64_t transactions = 0;
  Cycle cycles = 0;
};

/// Drives one memory controller with a saturating stream of distinct
/// granule reads, then times a single read on an idle channel.
ChannelProbe probe_channel(const uarch::ChannelConfig& cfg, std::uint64_t requests);

}  // namespace neura::engine
