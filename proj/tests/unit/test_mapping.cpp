#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "neura/mapping.hpp"

using namespace neura;
using namespace neura::mapping;

namespace {

MapperConfig make(Strategy s, std::uint32_t n) {
  MapperConfig c;
  c.strategy = s;
  c.n_targets = n;
  return c;
}

}  // namespace

TEST(Drhm, WorkedExample) {
  EXPECT_EQ(drhm_low(0xABCD1234u, 16, 7, 128), 108u);
}

TEST(Drhm, HighVariantKeepsUpperBits) {
  EXPECT_EQ(drhm_high(0xABCD1234u, 16, 1, 1u << 31), 0xABCD0000u % (1u << 31));
}

TEST(Drhm, FixedGammaEqualsModular) {
  std::mt19937_64 rng(5);
  for (int n = 0; n < 1000; ++n) {
    const auto tag = static_cast<Tag32>(rng());
    const auto g = static_cast<std::uint32_t>(rng()) | 1u;
    const auto targets = static_cast<std::uint32_t>(rng() % 1000 + 1);
    EXPECT_EQ(drhm_low(tag, 0, g, targets), modular_target(tag, g, targets));
  }
}

TEST(Mapper, RingSequence) {
  Mapper m(make(Strategy::Ring, 4), isa::TagLayout{});
  std::vector<std::uint32_t> got;
  for (Tag32 t = 1; t <= 5; ++t) got.push_back(m.map(t * 1000));
  EXPECT_EQ(got, (std::vector<std::uint32_t>{0, 1, 2, 3, 0}));
}

TEST(Mapper, RandomTableConsistent) {
  Mapper m(make(Strategy::RandomTable, 17), isa::TagLayout{});
  const auto first = m.map(0x10002);
  for (int i = 0; i < 5; ++i) m.map(0x20000 + i);
  EXPECT_EQ(m.map(0x10002), first);
  EXPECT_LE(m.table_size(), 6u);
}

TEST(Mapper, TagConsistentWithinRow) {
  for (auto s : {Strategy::Ring, Strategy::Modular, Strategy::DrhmLow, Strategy::DrhmHigh, Strategy::RandomTable}) {
    Mapper m(make(s, 32), isa::TagLayout{});
    const Tag32 t = isa::encode_tag(5, 9, isa::TagLayout{});
    const auto first = m.map(t, 3);
    m.map(isa::encode_tag(6, 1, isa::TagLayout{}), 1);
    EXPECT_EQ(m.map(t, 3), first) << to_string(s);
    EXPECT_EQ(m.map(t, 3), first) << to_string(s);
  }
}

TEST(Mapper, OutputInRange) {
  std::mt19937_64 rng(9);
  for (auto s : {Strategy::Ring, Strategy::Modular, Strategy::DrhmLow, Strategy::DrhmHigh, Strategy::RandomTable}) {
    Mapper m(make(s, 13), isa::TagLayout{});
    for (int i = 0; i < 5000; ++i) EXPECT_LT(m.map(static_cast<Tag32>(rng()), 1), 13u);
  }
}

TEST(Mapper, SeedLogDeterministic) {
  auto cfg = make(Strategy::DrhmLow, 64);
  cfg.reseed_per_row = false;
  cfg.reseed_interval = 10;
  cfg.rng_seed = 42;
  Mapper a(cfg, isa::TagLayout{});
  Mapper b(cfg, isa::TagLayout{});
  for (Tag32 t = 0; t < 200; ++t) {
    EXPECT_EQ(a.map(t, 1), b.map(t, 1));
  }
  EXPECT_EQ(a.state().seed_log, b.state().seed_log);
  EXPECT_EQ(seed_log_json(a.state()), seed_log_json(b.state()));
}

TEST(Mapper, ThousandReseedsAllOdd) {
  Mapper m(make(Strategy::DrhmLow, 8), isa::TagLayout{});
  const auto before = m.state().seed_log.size();
  for (int i = 0; i < 1000; ++i) m.reseed();
  ASSERT_EQ(m.state().seed_log.size(), before + 1000);
  for (const auto& [epoch, g] : m.state().seed_log) EXPECT_EQ(g & 1u, 1u);
}

TEST(Mapper, NoReseedIsModularWithInitialGamma) {
  auto cfg = make(Strategy::DrhmLow, 32);
  cfg.reseed_per_row = false;
  cfg.reseed_interval = 0;
  cfg.k = 16;
  cfg.rng_seed = 3;
  Mapper m(cfg, isa::TagLayout{});
  const auto g0 = gamma_for(3, 0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    const auto t = static_cast<Tag32>(rng());
    EXPECT_EQ(m.map(t, 1), modular_target(t & 0xFFFFu, g0, 32));
  }
}

TEST(Mapper, InvalidConfig) {
  EXPECT_THROW(parse_strategy("hash"), ConfigError);
  MapperConfig c;
  c.n_targets = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.n_targets = 4;
  c.k = 40;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(LoadStats, AllOnOne) {
  const std::vector<std::uint64_t> c{10, 0, 0, 0};
  auto h = load_stats(c);
  EXPECT_NEAR(h.cv, std::sqrt(3.0), 1e-12);
  EXPECT_DOUBLE_EQ(h.max_over_mean, 4.0);
  EXPECT_EQ(h.total, 10u);
}

TEST(LoadStats, Uniform) {
  const std::vector<std::uint64_t> c(8, 125);
  EXPECT_EQ(load_stats(c).cv, 0.0);
}

TEST(LoadStats, EmptyIsError) {
  EXPECT_THROW(load_stats(std::vector<std::uint64_t>{}), Error);
}

TEST(Heatmap, CsvRoundTripAndMargins) {
  const std::vector<std::uint32_t> core{0, 0, 1, 2, 2, 2};
  const std::vector<std::uint32_t> mem{1, 1, 0, 3, 0, 1};
  auto h = export_heatmap(core, mem, 3, 4);
  EXPECT_EQ(h.at(0, 1), 2u);
  EXPECT_EQ(h.core_loads(), (std::vector<std::uint64_t>{2, 1, 3}));
  EXPECT_EQ(h.mem_loads(), (std::vector<std::uint64_t>{2, 3, 0, 1}));
  auto csv = h.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "core,mem0,mem1,mem2,mem3");
  EXPECT_EQ(Heatmap::from_csv(csv), h);
}
