#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "neura/matio.hpp"
#include "neura/oracle.hpp"

namespace neura::smash {

using matio::CsrMatrix;
using matio::MapCsrMatrix;

/// Host-kernel tag: (row << 32) | col.
constexpr std::uint64_t pack_tag(Index row, Index col) noexcept {
  return (static_cast<std::uint64_t>(row) << 32) | col;
}
constexpr Index tag_row(std::uint64_t tag) noexcept { return static_cast<Index>(tag >> 32); }
constexpr Index tag_col(std::uint64_t tag) noexcept { return static_cast<Index>(tag & 0xffffffffu); }

enum class HashOutcome { Inserted, Updated, Probed };

struct ProbeResult {
  HashOutcome outcome = HashOutcome::Inserted;
  std::uint32_t probes = 0;  // i of the quadratic step that resolved the insert
  std::uint64_t slot = 0;
};

/// Scratchpad hashtable with prime-modulo hashing and quadratic probing.
/// Cells are updated with atomic compare-and-swap, so any number of workers
/// may insert concurrently. A `direct` table maps column j to slot j (the
/// 1:1 layout used for dense rows).
class ScratchpadHashTable {
public:
  static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};

  explicit ScratchpadHashTable(std::uint64_t capacity, bool direct = false,
                               std::optional<std::uint64_t> probe_limit = std::nullopt);

  ScratchpadHashTable(ScratchpadHashTable&&) noexcept = default;
  ScratchpadHashTable& operator=(ScratchpadHashTable&&) noexcept = default;

  /// Throws OverflowError when no slot is found within the probe limit.
  ProbeResult insert(std::uint64_t tag, double value);

  std::uint64_t capacity() const noexcept { return capacity_; }
  std::uint64_t probe_limit() const noexcept { return probe_limit_; }
  bool direct() const noexcept { return direct_; }
  std::uint64_t tag_at(std::uint64_t slot) const noexcept { return tags_[slot].load(std::memory_order_acquire); }
  double value_at(std::uint64_t slot) const noexcept { return vals_[slot].load(std::memory_order_acquire); }
  std::uint64_t occupancy() const noexcept;

private:
  void accumulate(std::uint64_t slot, double value) noexcept;

  std::uint64_t capacity_ = 0;
  std::uint64_t probe_limit_ = 0;
  bool direct_ = false;
  std::unique_ptr<std::atomic<std::uint64_t>[]> tags_;
  std::unique_ptr<std::atomic<double>[]> vals_;
};

ProbeResult hash_probe_insert(ScratchpadHashTable& table, std::uint64_t tag, double value);

enum class SmashVersion { Base, V1, V2, V3 };

std::string to_string(SmashVersion v);
SmashVersion parse_smash_version(const std::string& s);

struct SmashConfig {
  SmashVersion version = SmashVersion::V2;
  unsigned n_workers = 4;
  std::uint64_t spad_capacity = 1u << 16;  // hash lines
  double cf = 4.0;
  double ef = 1.5;
  std::optional<double> threshold;

  void validate() const;
};

enum class TokenHalf { Even, Odd };

struct Token {
  Index row = 0;
  TokenHalf half = TokenHalf::Even;
};

/// Split point of a row's A-entries: EVEN takes [0, ceil(len/2)), ODD the rest.
constexpr std::size_t even_half_length(std::size_t len) noexcept { return (len + 1) / 2; }

/// Per-phase work units (elements copied, partial products hashed, slots
/// drained) and the pipeline step log used to witness overlap.
struct PhaseLedger {
  std::uint64_t prefetch_units = 0;
  std::uint64_t hash_units = 0;
  std::uint64_t writeback_units = 0;

  struct Step {
    long prefetch_window = -1;
    long hash_window = -1;
    long writeback_window = -1;
  };
  std::vector<Step> steps;

  bool all_phases_overlapped() const;
  double prefetch_fraction() const;
  double hash_fraction() const;
  double writeback_fraction() const;
};

struct TokenAudit {
  std::vector<std::uint64_t> tokens_per_worker;
  std::uint64_t tokens_issued = 0;
  std::uint64_t tokens_consumed = 0;
  /// Tokens consumed a number of times other than exactly once.
  std::uint64_t violations = 0;
};

struct SmashResult {
  CsrMatrix c;
  oracle::WindowPlan windows;
  PhaseLedger ledger;
  TokenAudit tokens;
};

/// A-operand source: plain CSR, or MAP-CSR where the ODD token half (and
/// the second worker of a row in V1) reads the replica copy.
struct SmashInput {
  const CsrMatrix* csr = nullptr;
  const MapCsrMatrix* map_csr = nullptr;

  Index n_rows() const noexcept;
  Index n_cols() const noexcept;
  matio::SparseVectorView row(Index r, bool prefer_replica) const noexcept;
};

SmashResult smash_run(const SmashInput& a, const CsrMatrix& b, const SmashConfig& cfg);

/// Phase-pipelined execution over a precomputed window plan: prefetch of
/// window w+1, hashing of w and write-back of w-1 run concurrently on two
/// scratchpad halves.
SmashResult run_pipelined(const oracle::WindowPlan& windows, const SmashInput& a, const CsrMatrix& b,
                          const SmashConfig& cfg);

CsrMatrix smash_spgemm(const CsrMatrix& a, const CsrMatrix& b, const SmashConfig& cfg);
CsrMatrix smash_spgemm(const MapCsrMatrix& a, const CsrMatrix& b, const SmashConfig& cfg);

/// Hashes one window with the token scheme: two tokens per row, polled by
/// `n_workers` threads. `tables[r]` is the hashtable of window row r.
/// Returns per-worker token counts; `consumed` receives per-token use counts.
std::vector<std::uint64_t> run_tokenized_window(const oracle::Window& window, const SmashInput& a,
                                                const CsrMatrix& b, std::vector<ScratchpadHashTable>& tables,
                                                unsigned n_workers, std::vector<std::uint32_t>* consumed = nullptr);

}  // namespace neura::smash
