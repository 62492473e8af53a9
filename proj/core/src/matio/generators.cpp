#include <cmath>
#include <random>

#include "neura/matio.hpp"

namespace neura::matio {

void RmatParams::validate() const {
  if (scale < 1 || scale > 31) throw ConfigError("RMAT scale must be in [1, 31]");
  if (a < 0 || b < 0 || c < 0 || d < 0) throw ConfigError("RMAT probabilities must be non-negative");
  if (std::abs(a + b + c + d - 1.0) > 1e-12) throw ConfigError("RMAT probabilities must sum to 1");
}

namespace {

// 53-bit uniform in [0, 1); fixed formula so instances match across standard libraries.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

CooMatrix generate_rmat(const RmatParams& p) {
  p.validate();
  const Index n = Index{1} << p.scale;
  const std::uint64_t edges = static_cast<std::uint64_t>(p.edge_factor) << p.scale;

  std::mt19937_64 rng(p.seed);
  const double ab = p.a + p.b;
  const double abc = ab + p.c;

  CooMatrix m;
  m.n_rows = m.n_cols = n;
  m.entries.reserve(edges);
  for (std::uint64_t e = 0; e < edges; ++e) {
    Index row = 0;
    Index col = 0;
    for (unsigned level = 0; level < p.scale; ++level) {
      const double u = unit(rng);
      const Index bit = Index{1} << (p.scale - 1 - level);
      if (u < p.a) {
      } else if (u < ab) {
        col |= bit;
      } else if (u < abc) {
        row |= bit;
      } else {
        row |= bit;
        col |= bit;
      }
    }
    m.entries.push_back({row, col, 1.0});
  }
  m.normalize();
  for (auto& e : m.entries) e.value = 1.0;
  return m;
}

CooMatrix generate_banded(Index n, Index half_bandwidth) {
  CooMatrix m;
  m.n_rows = m.n_cols = n;
  for (Index i = 0; i < n; ++i) {
    const Index lo = i > half_bandwidth ? i - half_bandwidth : 0;
    const Index hi = std::min<std::uint64_t>(std::uint64_t{i} + half_bandwidth, n - 1);
    for (Index j = lo; j <= hi; ++j) m.entries.push_back({i, j, 1.0});
  }
  return m;
}

void assign_values(CooMatrix& m, ValueMode mode, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& e : m.entries) {
    switch (mode) {
      case ValueMode::Ones: e.value = 1.0; break;
      case ValueMode::SmallIntegers: e.value = static_cast<double>(1 + rng() % 8); break;
      case ValueMode::Real: e.value = 0.5 + unit(rng); break;
    }
  }
}

}  // namespace neura::matio
