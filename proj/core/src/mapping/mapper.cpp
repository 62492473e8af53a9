#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "neura/mapping.hpp"

namespace neura::mapping {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::Ring: return "ring";
    case Strategy::Modular: return "modular";
    case Strategy::DrhmLow: return "drhm-low";
    case Strategy::DrhmHigh: return "drhm-high";
    case Strategy::RandomTable: return "random";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "ring") return Strategy::Ring;
  if (s == "modular") return Strategy::Modular;
  if (s == "drhm-low") return Strategy::DrhmLow;
  if (s == "drhm-high") return Strategy::DrhmHigh;
  if (s == "random") return Strategy::RandomTable;
  throw ConfigError("unknown mapper '" + s + "' (expected ring, modular, drhm-low, drhm-high or random)");
}

void MapperConfig::validate() const {
  if (n_targets < 1) throw ConfigError("mapper needs at least one target");
  if (k >= 32) throw ConfigError("mapper shift k must be below 32");
}

std::uint32_t modular_target(Tag32 tag, std::uint64_t multiplier, std::uint32_t n) {
  // tag < 2^32 and multiplier < 2^32, so the product is exact in 64 bits.
  return static_cast<std::uint32_t>((std::uint64_t{tag} * (multiplier & 0xffffffffu)) % n);
}

std::uint32_t drhm_low(Tag32 tag, unsigned k, std::uint32_t gamma, std::uint32_t n) {
  const Tag32 masked = static_cast<Tag32>(tag << k) >> k;
  return static_cast<std::uint32_t>((std::uint64_t{masked} * gamma) % n);
}

std::uint32_t drhm_high(Tag32 tag, unsigned k, std::uint32_t gamma, std::uint32_t n) {
  const Tag32 masked = static_cast<Tag32>((tag >> k) << k);
  return static_cast<std::uint32_t>((std::uint64_t{masked} * gamma) % n);
}

std::uint32_t gamma_for(std::uint64_t seed, std::uint64_t epoch) {
  std::uint64_t z = seed + (epoch + 1) * 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return static_cast<std::uint32_t>(z >> 32) | 1u;
}

Mapper::Mapper(MapperConfig cfg, isa::TagLayout layout) : cfg_(cfg), layout_(layout), rng_(cfg.rng_seed) {
  cfg_.validate();
  state_.gamma = gamma_for(cfg_.rng_seed, 0);
  state_.seed_log.emplace_back(0, state_.gamma);
}

void Mapper::reseed() {
  ++state_.epoch;
  state_.gamma = gamma_for(cfg_.rng_seed, state_.epoch);
  state_.seed_log.emplace_back(state_.epoch, state_.gamma);
}

std::uint32_t Mapper::row_gamma(Index row) {
  auto it = row_gammas_.find(row);
  if (it != row_gammas_.end()) return it->second;
  // Row r always uses epoch r + 1 (epoch 0 is the initial seed), so the
  // mapping of a tag never depends on arrival order.
  const std::uint32_t g = gamma_for(cfg_.rng_seed, std::uint64_t{row} + 1);
  row_gammas_.emplace(row, g);
  state_.epoch = std::uint64_t{row} + 1;
  state_.gamma = g;
  state_.seed_log.emplace_back(state_.epoch, g);
  return g;
}

std::uint32_t Mapper::compute(Tag32 tag) {
  const auto n = cfg_.n_targets;
  switch (cfg_.strategy) {
    case Strategy::Ring: return static_cast<std::uint32_t>(ring_next_++ % n);
    case Strategy::Modular: return modular_target(tag, kModularPrime, n);
    case Strategy::RandomTable: return static_cast<std::uint32_t>(std::uniform_int_distribution<std::uint32_t>(0, n - 1)(rng_));
    case Strategy::DrhmLow:
    case Strategy::DrhmHigh: {
      const std::uint32_t g =
          cfg_.reseed_per_row ? row_gamma(isa::decode_tag(tag, layout_).first) : state_.gamma;
      return cfg_.strategy == Strategy::DrhmLow ? drhm_low(tag, cfg_.k, g, n) : drhm_high(tag, cfg_.k, g, n);
    }
  }
  return 0;
}

std::uint32_t Mapper::map(Tag32 tag, std::uint32_t contributions) {
  ++mapped_;
  const bool stateless = cfg_.strategy == Strategy::Modular ||
                         ((cfg_.strategy == Strategy::DrhmLow || cfg_.strategy == Strategy::DrhmHigh) &&
                          (cfg_.reseed_per_row || cfg_.reseed_interval == 0));
  std::uint32_t target;
  if (stateless) {
    target = compute(tag);
  } else {
    auto it = memo_.find(tag);
    if (it != memo_.end()) {
      target = it->second.target;
      if (it->second.remaining > 0 && --it->second.remaining == 0) memo_.erase(it);
    } else {
      target = compute(tag);
      // RANDOM_TABLE keeps every entry: it is the lookup table being modeled.
      const bool release = cfg_.strategy != Strategy::RandomTable && contributions > 0;
      if (!release) {
        memo_.emplace(tag, Pin{target, 0});
      } else if (contributions > 1) {
        memo_.emplace(tag, Pin{target, contributions - 1});
      }
    }
  }
  if (!cfg_.reseed_per_row && cfg_.reseed_interval > 0 && mapped_ % cfg_.reseed_interval == 0 &&
      (cfg_.strategy == Strategy::DrhmLow || cfg_.strategy == Strategy::DrhmHigh)) {
    reseed();
  }
  return target;
}

LoadHistogram load_stats(std::span<const std::uint64_t> counts) {
  if (counts.empty()) throw UndefinedMetricError("load statistics need at least one target");
  LoadHistogram h;
  h.counts.assign(counts.begin(), counts.end());
  h.total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (h.total == 0) throw UndefinedMetricError("load statistics of an empty assignment");
  const double n = static_cast<double>(counts.size());
  const double mean = static_cast<double>(h.total) / n;
  double var = 0.0;
  for (const auto c : counts) {
    const double d = static_cast<double>(c) - mean;
    var += d * d;
  }
  var /= n;
  h.cv = std::sqrt(var) / mean;
  h.max_over_mean = static_cast<double>(*std::max_element(counts.begin(), counts.end())) / mean;
  return h;
}

std::vector<std::uint64_t> Heatmap::core_loads() const {
  std::vector<std::uint64_t> out(cores_, 0);
  for (std::uint32_t c = 0; c < cores_; ++c) {
    for (std::uint32_t m = 0; m < mems_; ++m) out[c] += at(c, m);
  }
  return out;
}

std::vector<std::uint64_t> Heatmap::mem_loads() const {
  std::vector<std::uint64_t> out(mems_, 0);
  for (std::uint32_t c = 0; c < cores_; ++c) {
    for (std::uint32_t m = 0; m < mems_; ++m) out[m] += at(c, m);
  }
  return out;
}

std::string Heatmap::to_csv() const {
  std::ostringstream out;
  out << "core";
  for (std::uint32_t m = 0; m < mems_; ++m) out << ",mem" << m;
  out << '\n';
  for (std::uint32_t c = 0; c < cores_; ++c) {
    out << c;
    for (std::uint32_t m = 0; m < mems_; ++m) out << ',' << at(c, m);
    out << '\n';
  }
  return out.str();
}

Heatmap Heatmap::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || line.rfind("core", 0) != 0) throw ParseError(lineno, "heatmap header must start with 'core'");
  const auto mems = static_cast<std::uint32_t>(std::count(line.begin(), line.end(), ','));
  std::vector<std::vector<std::uint64_t>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::uint64_t> row;
    std::getline(ls, cell, ',');
    if (std::stoul(cell) != rows.size()) throw ParseError(lineno, "core rows out of order");
    while (std::getline(ls, cell, ',')) row.push_back(std::stoull(cell));
    if (row.size() != mems) throw ParseError(lineno, "expected " + std::to_string(mems) + " mem columns");
    rows.push_back(std::move(row));
  }
  Heatmap h(static_cast<std::uint32_t>(rows.size()), mems);
  for (std::uint32_t c = 0; c < rows.size(); ++c) {
    for (std::uint32_t m = 0; m < mems; ++m) h.add(c, m, rows[c][m]);
  }
  return h;
}

Heatmap export_heatmap(std::span<const std::uint32_t> core_of_item, std::span<const std::uint32_t> mem_of_item,
                       std::uint32_t n_cores, std::uint32_t n_mems) {
  if (core_of_item.size() != mem_of_item.size()) throw DimensionError("heatmap: assignment lists differ in length");
  if (core_of_item.empty()) throw UndefinedMetricError("heatmap of an empty assignment");
  Heatmap h(n_cores, n_mems);
  for (std::size_t i = 0; i < core_of_item.size(); ++i) {
    if (core_of_item[i] >= n_cores || mem_of_item[i] >= n_mems) throw DimensionError("heatmap: assignment out of range");
    h.add(core_of_item[i], mem_of_item[i]);
  }
  return h;
}

std::string seed_log_json(const GammaState& state) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& [epoch, gamma] : state.seed_log) j.push_back({{"epoch", epoch}, {"gamma", gamma}});
  return j.dump(2);
}

}  // namespace neura::mapping
