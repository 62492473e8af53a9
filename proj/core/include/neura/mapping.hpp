#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "neura/isa.hpp"

namespace neura::mapping {

using isa::Tag32;

enum class Strategy { Ring, Modular, DrhmLow, DrhmHigh, RandomTable };

std::string to_string(Strategy s);
/// Accepts the CLI spellings: ring, modular, drhm-low, drhm-high, random.
Strategy parse_strategy(const std::string& s);

/// Fixed multiplier of the MODULAR strategy (Knuth's golden-ratio prime).
inline constexpr std::uint64_t kModularPrime = 2654435761ull;

struct MapperConfig {
  Strategy strategy = Strategy::DrhmLow;
  std::uint32_t n_targets = 1;
  unsigned k = 16;
  /// true: a fresh gamma for every output row. false: reseed every
  /// `reseed_interval` mapped items (0 = never).
  bool reseed_per_row = true;
  std::uint64_t reseed_interval = 0;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

struct GammaState {
  std::uint32_t gamma = 1;
  std::uint64_t epoch = 0;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> seed_log;  // epoch -> gamma
};

// Pure formulas. Shifts act on the 32-bit tag, so bits pushed out are lost.
std::uint32_t modular_target(Tag32 tag, std::uint64_t multiplier, std::uint32_t n);
std::uint32_t drhm_low(Tag32 tag, unsigned k, std::uint32_t gamma, std::uint32_t n);
std::uint32_t drhm_high(Tag32 tag, unsigned k, std::uint32_t gamma, std::uint32_t n);

/// Odd multiplier for a given (seed, epoch), from a counter-based splitmix64.
std::uint32_t gamma_for(std::uint64_t seed, std::uint64_t epoch);

/// Stateful tag -> target assignment. Within an epoch every strategy is a
/// pure function of the tag. In per-row mode the epoch is the tag's row,
/// so all HACCs of one output element reach the same target. In interval
/// mode a tag keeps the target of its first arrival until its last
/// contribution has been mapped.
class Mapper {
public:
  Mapper(MapperConfig cfg, isa::TagLayout layout);

  /// `contributions` is the total number of HACCs the tag will receive
  /// (COUNTER + 1); 0 means unknown, in which case pins are never released.
  std::uint32_t map(Tag32 tag, std::uint32_t contributions = 0);

  /// Advances to the next epoch and appends to the seed log.
  void reseed();

  const MapperConfig& config() const noexcept { return cfg_; }
  const GammaState& state() const noexcept { return state_; }
  std::uint64_t mapped() const noexcept { return mapped_; }
  std::size_t table_size() const noexcept { return memo_.size(); }

private:
  std::uint32_t compute(Tag32 tag);
  std::uint32_t row_gamma(Index row);

  struct Pin {
    std::uint32_t target;
    std::uint32_t remaining;
  };

  MapperConfig cfg_;
  isa::TagLayout layout_;
  GammaState state_;
  std::uint64_t mapped_ = 0;
  std::uint64_t ring_next_ = 0;
  std::mt19937_64 rng_;
  std::unordered_map<Tag32, Pin> memo_;
  std::unordered_map<Index, std::uint32_t> row_gammas_;
};

struct LoadHistogram {
  std::vector<std::uint64_t> counts;
  double cv = 0.0;
  double max_over_mean = 0.0;
  std::uint64_t total = 0;
};

/// Population coefficient of variation and max/mean of the tallies.
LoadHistogram load_stats(std::span<const std::uint64_t> counts);

/// core x mem traffic tallies.
class Heatmap {
public:
  Heatmap() = default;
  Heatmap(std::uint32_t cores, std::uint32_t mems) : cores_(cores), mems_(mems), cells_(std::size_t{cores} * mems, 0) {}

  void add(std::uint32_t core, std::uint32_t mem, std::uint64_t n = 1) { cells_[std::size_t{core} * mems_ + mem] += n; }
  std::uint64_t at(std::uint32_t core, std::uint32_t mem) const { return cells_[std::size_t{core} * mems_ + mem]; }
  std::uint32_t cores() const noexcept { return cores_; }
  std::uint32_t mems() const noexcept { return mems_; }
  std::span<const std::uint64_t> cells() const noexcept { return cells_; }

  std::vector<std::uint64_t> core_loads() const;
  std::vector<std::uint64_t> mem_loads() const;

  /// Header "core,mem0,...,memN-1", then one line per core.
  std::string to_csv() const;
  static Heatmap from_csv(const std::string& text);

  friend bool operator==(const Heatmap&, const Heatmap&) = default;

private:
  std::uint32_t cores_ = 0;
  std::uint32_t mems_ = 0;
  std::vector<std::uint64_t> cells_;
};

/// Builds the grid from per-item (core, mem) assignments.
Heatmap export_heatmap(std::span<const std::uint32_t> core_of_item, std::span<const std::uint32_t> mem_of_item,
                       std::uint32_t n_cores, std::uint32_t n_mems);

/// JSON array of {"epoch", "gamma"} objects.
std::string seed_log_json(const GammaState& state);

}  // namespace neura::mapping
