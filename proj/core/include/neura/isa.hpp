#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "neura/matio.hpp"
#include "neura/oracle.hpp"

namespace neura::isa {

using Tag32 = std::uint32_t;

/// Row index in the high `row_bits`, column index in the low `col_bits`.
struct TagLayout {
  unsigned row_bits = 16;
  unsigned col_bits = 16;

  void validate() const;
  /// 16/16 when it fits, otherwise the narrowest row field that holds
  /// n_rows. Throws LoweringError if no 32-bit split fits both dimensions.
  static TagLayout for_dims(Index n_rows, Index n_cols);

  friend bool operator==(const TagLayout&, const TagLayout&) = default;
};

Tag32 encode_tag(Index i, Index j, const TagLayout& layout);
std::pair<Index, Index> decode_tag(Tag32 t, const TagLayout& layout);

enum class Opcode : std::uint8_t { Mmh4 = 0x01, Hacc = 0x02 };

/// Multiply a tile of up to 4 A-column elements by up to 4 B-row elements.
/// Addresses are byte offsets from `base_addr`. The remaining fields are
/// lowering metadata: the output rows of the A lanes, the lane masks and
/// the scratchpad window the tile belongs to.
struct Mmh4Instr {
  std::uint64_t base_addr = 0;
  std::uint64_t a_data_addr = 0;
  std::uint64_t b_col_ind_addr = 0;
  std::uint64_t b_data_addr = 0;
  std::uint64_t roll_counter_addr = 0;

  std::array<Index, 4> a_rows{};
  std::uint8_t n_a = 0;
  std::uint8_t n_b = 0;
  std::uint32_t window = 0;
  Index k = 0;

  std::size_t lanes() const noexcept { return std::size_t{n_a} * n_b; }
  friend bool operator==(const Mmh4Instr&, const Mmh4Instr&) = default;
};

struct HaccInstr {
  Tag32 tag = 0;
  double data = 0.0;
  std::uint32_t counter = 0;

  friend bool operator==(const HaccInstr&, const HaccInstr&) = default;
};

// --- Memory image ----------------------------------------------------------

struct Region {
  std::string name;
  std::uint64_t base = 0;
  std::vector<std::uint8_t> bytes;

  std::uint64_t end() const noexcept { return base + bytes.size(); }
  friend bool operator==(const Region&, const Region&) = default;
};

/// Byte-addressed simulated memory made of named, non-overlapping regions.
class MemoryImage {
public:
  static constexpr std::uint64_t kFirstBase = 0x10000;
  static constexpr std::uint64_t kRegionAlign = 0x1000;

  /// Appends a zero-filled region after the last one; returns its base.
  std::uint64_t add_region(const std::string& name, std::size_t size);

  const Region* find(const std::string& name) const noexcept;
  const std::vector<Region>& regions() const noexcept { return regions_; }

  double read_f64(std::uint64_t addr) const;
  std::uint32_t read_u32(std::uint64_t addr) const;
  void write_f64(std::uint64_t addr, double v);
  void write_u32(std::uint64_t addr, std::uint32_t v);

  /// JSON manifest: region names, bases and sizes.
  std::string manifest_json() const;

  friend bool operator==(const MemoryImage&, const MemoryImage&) = default;

private:
  std::uint8_t* locate(std::uint64_t addr, std::size_t n);
  const std::uint8_t* locate(std::uint64_t addr, std::size_t n) const;

  std::vector<Region> regions_;
};

struct Program {
  Index n_rows = 0;
  Index n_cols = 0;
  TagLayout layout;
  MemoryImage memory;
  std::vector<Mmh4Instr> instrs;
  std::uint64_t total_fma = 0;
  std::uint64_t total_out_nnz = 0;
  std::uint32_t n_windows = 1;
};

/// Emits one HACC per active lane, row-major over (A lane, B lane).
std::vector<HaccInstr> expand_mmh4(const Mmh4Instr& instr, const MemoryImage& mem, const TagLayout& layout);

/// Tiled Gustavson lowering. For every window and every k, the A column k
/// restricted to the window's rows is chunked by 4 and multiplied against
/// B row k chunked by 4. Roll counters hold contributions - 1 for every
/// lane (see HaccPad). Without a window plan all rows form one window.
Program lower_spgemm(const matio::CscMatrix& a, const matio::CsrMatrix& b, const oracle::SymbolicPlan& plan,
                     const TagLayout& layout, const oracle::WindowPlan* windows = nullptr);

// --- Functional semantics --------------------------------------------------

/// Timing-free HashPad. insert stores COUNTER; an update accumulates and
/// decrements; a line whose counter is 0 after the operation is evicted.
class HaccPad {
public:
  struct Eviction {
    Tag32 tag = 0;
    double data = 0.0;
  };

  /// Returns the eviction produced by this HACC, if any.
  std::optional<Eviction> apply(const HaccInstr& h);

  std::size_t live() const noexcept { return lines_.size(); }
  std::size_t max_live() const noexcept { return max_live_; }
  /// Drains remaining lines in tag order (barrier flush).
  std::vector<Eviction> flush();

private:
  struct Line {
    double data;
    std::uint32_t counter;
  };
  std::unordered_map<Tag32, Line> lines_;
  std::size_t max_live_ = 0;
};

struct ReplayResult {
  matio::CsrMatrix c;
  std::uint64_t mmh4_count = 0;
  std::uint64_t hacc_count = 0;
  std::uint64_t evictions = 0;
  std::size_t max_live = 0;
  std::size_t final_live = 0;
};

ReplayResult replay(const Program& program);

// --- Traces ----------------------------------------------------------------

inline constexpr int kTraceVersion = 1;

/// Text trace: "NEURATRACE 1" header, layout/dims/windows lines, one
/// "mmh4 ..." record per line and an "end <count>" trailer.
void write_trace(std::ostream& out, const Program& program);
/// Reads a text trace into `program`'s header fields and instruction list;
/// the memory image is left untouched.
void read_trace(std::istream& in, Program& program);

/// Fixed-width binary records. MMH4 = 8-bit opcode, five 64-bit address
/// fields, four 32-bit A rows, 8-bit lane counts, 32-bit window and k.
/// HACC = 8-bit opcode, 32-bit TAG, 64-bit DATA, 32-bit COUNTER.
inline constexpr std::size_t kMmh4RecordBytes = 1 + 5 * 8 + 4 * 4 + 2 + 4 + 4;
inline constexpr std::size_t kHaccRecordBytes = 1 + 4 + 8 + 4;

std::array<std::uint8_t, kMmh4RecordBytes> encode_mmh4(const Mmh4Instr& instr);
Mmh4Instr decode_mmh4(std::span<const std::uint8_t> record);
std::array<std::uint8_t, kHaccRecordBytes> encode_hacc(const HaccInstr& instr);
HaccInstr decode_hacc(std::span<const std::uint8_t> record);

void write_binary_trace(std::ostream& out, const Program& program);
void read_binary_trace(std::istream& in, Program& program);

}  // namespace neura::isa
