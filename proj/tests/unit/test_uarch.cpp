#include <gtest/gtest.h>

#include <random>

#include "neura/engine.hpp"
#include "neura/uarch.hpp"
#include "test_util.hpp"

using namespace neura;
using namespace neura::uarch;

namespace {

constexpr std::uint64_t kMiB = 1u << 20;

Packet hacc_packet(isa::Tag32 tag, double data, std::uint32_t counter) {
  Packet p;
  p.vnet = VNet::Hacc;
  p.hacc = {tag, data, counter};
  return p;
}

/// Steps the mem for `cycles` cycles starting at `from`.
void run_mem(NeuraMem& m, Cycle from, Cycle cycles) {
  for (Cycle c = from; c < from + cycles; ++c) m.step(c);
}

}  // namespace

TEST(Config, ChipTotalsMatchTable) {
  struct Row {
    const char* name;
    std::uint32_t cores, routers, pipelines;
    double mib;
  };
  for (const Row r : {Row{"tile4", 32, 64, 64, 1.5}, Row{"tile16", 128, 256, 512, 3.0},
                      Row{"tile64", 512, 1024, 4096, 12.0}}) {
    auto chip = build_chip(named_config(r.name));
    EXPECT_EQ(chip.n_cores(), r.cores) << r.name;
    EXPECT_EQ(chip.n_mems(), r.cores) << r.name;
    EXPECT_EQ(chip.n_routers(), r.routers) << r.name;
    EXPECT_EQ(chip.total_pipelines(), r.pipelines) << r.name;
    EXPECT_EQ(chip.hashpad_bytes(), static_cast<std::uint64_t>(r.mib * kMiB)) << r.name;
    EXPECT_EQ(chip.n_mcs(), 8u) << r.name;
  }
}

TEST(Config, JsonRoundTripAndValidation) {
  auto cfg = named_config("tile16");
  auto back = config_from_json(config_to_json(cfg));
  EXPECT_EQ(config_to_json(back), config_to_json(cfg));
  cfg.mems_per_tile = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(build_chip(cfg), ConfigError);
  EXPECT_THROW(named_config("tile8"), ConfigError);
}

TEST(Config, EveryUnitAttached) {
  for (const auto& name : config_names()) {
    auto chip = build_chip(named_config(name));
    for (std::uint32_t c = 0; c < chip.n_cores(); ++c) {
      const auto& at = chip.attachment({UnitKind::Core, c});
      EXPECT_GE(at.first_port, 4u);
      EXPECT_LT(at.first_port + at.n_ports - 1, chip.router_ports(chip.core_router[c]));
    }
  }
}

TEST(Torus, Distances) {
  Torus t{4, 4};
  EXPECT_EQ(t.distance(5, 5), 0u);
  EXPECT_EQ(route(t, 5, 5), Direction::Local);
  EXPECT_EQ(t.distance(t.at(0, 0), t.at(0, 2)), 2u);
  EXPECT_EQ(t.distance(t.at(0, 0), t.at(3, 0)), 1u);
  EXPECT_EQ(route(t, t.at(0, 0), t.at(3, 0)), Direction::West);
  // Tie: both ways are 2 hops, the shorter queue wins.
  EXPECT_EQ(route(t, t.at(0, 0), t.at(0, 2), [](Direction d) { return d == Direction::North ? 3u : 1u; }),
            Direction::South);
}

TEST(Torus, WalkReachesDestinationWithinDiameter) {
  std::mt19937_64 rng(2);
  for (const Torus t : {Torus{8, 8}, Torus{8, 4}, Torus{32, 32}, Torus{1, 1}}) {
    for (int n = 0; n < 2000; ++n) {
      const auto src = static_cast<std::uint32_t>(rng() % t.size());
      const auto dst = static_cast<std::uint32_t>(rng() % t.size());
      std::uint32_t at = src;
      std::uint32_t hops = 0;
      while (at != dst) {
        at = t.neighbor(at, route(t, at, dst));
        ++hops;
        ASSERT_LE(hops, t.diameter());
      }
      EXPECT_EQ(hops, t.distance(src, dst));
    }
  }
}

TEST(Channel, BandwidthAndLatency) {
  ChannelConfig cfg;
  auto p = engine::probe_channel(cfg, 20000);
  EXPECT_NEAR(p.bytes_per_cycle, cfg.bytes_per_cycle, 0.01 * cfg.bytes_per_cycle);
  EXPECT_EQ(p.isolated_latency, cfg.fixed_latency);
}

TEST(Channel, BoundedOutstanding) {
  ChannelConfig cfg;
  cfg.queue_depth = 2;
  MemChannelModel ch(cfg);
  ch.submit(64, 0);
  ch.submit(64, 0);
  EXPECT_FALSE(ch.can_accept(0));
  EXPECT_EQ(ch.outstanding(0), 2u);
}

TEST(MemCtrl, OneGranuleOneTransaction) {
  MemoryController mc(0, ChannelConfig{});
  for (std::uint32_t i = 0; i < 4; ++i) mc.deliver_read({UnitKind::Core, 0}, i, 8u * i, 0);
  std::size_t answered = 0;
  for (Cycle c = 0; c < 500 && answered < 4; ++c) {
    mc.step(c);
    answered += mc.responses().size();
    mc.responses().clear();
  }
  EXPECT_EQ(answered, 4u);
  EXPECT_EQ(mc.stats().read_transactions, 1u);
  EXPECT_EQ(mc.stats().coalesced, 3u);
}

TEST(MemCtrl, ReorderMergesRepeatedGranule) {
  MemoryController mc(0, ChannelConfig{});
  mc.deliver_read({UnitKind::Core, 0}, 0, 0, 0);
  mc.deliver_read({UnitKind::Core, 1}, 1, 64, 0);
  mc.deliver_read({UnitKind::Core, 2}, 2, 8, 0);
  std::size_t answered = 0;
  for (Cycle c = 0; c < 500 && answered < 3; ++c) {
    mc.step(c);
    answered += mc.responses().size();
    mc.responses().clear();
  }
  EXPECT_EQ(answered, 3u);
  EXPECT_EQ(mc.stats().read_transactions, 2u);
}

TEST(MemCtrl, WritebacksCombineAndDrain) {
  MemoryController mc(0, ChannelConfig{});
  for (Index i = 0; i < 5; ++i) mc.deliver_writeback({i, i, 1.0, 0});
  mc.step(0);
  mc.drain();
  for (Cycle c = 1; c < 1000 && !mc.idle(c); ++c) mc.step(c);
  EXPECT_EQ(mc.stats().write_transactions, 2u);
  EXPECT_EQ(mc.written().size(), 5u);
}

TEST(NeuraMem, InsertUpdateEvict) {
  isa::TagLayout layout;
  NeuraMem m(0, MemConfig{}, &layout, false);
  const auto tag = isa::encode_tag(3, 4, layout);
  m.deliver(hacc_packet(tag, 5.0, 2), 0);
  run_mem(m, 1, 4);
  EXPECT_EQ(m.occupancy(), 1u);
  EXPECT_EQ(m.stats().inserts, 1u);
  m.deliver(hacc_packet(tag, 3.0, 0), 5);
  m.deliver(hacc_packet(tag, 3.0, 0), 5);
  run_mem(m, 6, 10);
  ASSERT_EQ(m.writebacks().size(), 1u);
  const auto wb = m.writebacks().front();
  EXPECT_EQ(wb.row, 3u);
  EXPECT_EQ(wb.col, 4u);
  EXPECT_EQ(wb.value, 11.0);
  EXPECT_EQ(m.occupancy(), 0u);
  EXPECT_EQ(m.stats().updates, 2u);
  EXPECT_EQ(m.stats().evictions, 1u);
}

TEST(NeuraMem, IsolatedHaccCpiIsCompareplusAccumulate) {
  for (Cycle cmp : {1u, 3u}) {
    MemConfig cfg;
    cfg.compare_latency = cmp;
    cfg.accumulate_latency = 1;
    isa::TagLayout layout;
    NeuraMem m(0, cfg, &layout, false);
    m.deliver(hacc_packet(isa::encode_tag(1, 1, layout), 2.0, 0), 0);
    for (Cycle c = 1; c < 20; ++c) m.step(c);
    ASSERT_EQ(m.stats().cpi.count, 1u);
    EXPECT_EQ(m.stats().cpi.buckets.begin()->first, cmp + cfg.accumulate_latency);
  }
}

TEST(NeuraMem, BarrierHoldsUntilFlush) {
  isa::TagLayout layout;
  NeuraMem m(0, MemConfig{}, &layout, true);
  m.deliver(hacc_packet(isa::encode_tag(0, 1, layout), 1.0, 0), 0);
  m.deliver(hacc_packet(isa::encode_tag(0, 2, layout), 2.0, 0), 0);
  for (Cycle c = 1; c < 10; ++c) m.step(c);
  EXPECT_EQ(m.occupancy(), 2u);
  EXPECT_TRUE(m.writebacks().empty());
  m.begin_flush(0);
  for (Cycle c = 10; c < 20; ++c) m.step(c);
  EXPECT_EQ(m.writebacks().size(), 2u);
  EXPECT_FALSE(m.flushing());
  EXPECT_EQ(m.occupancy(), 0u);
}

TEST(NeuraMem, OverflowIsSimulationError) {
  MemConfig cfg;
  cfg.hashlines = 8;
  cfg.hash_engines = 1;
  isa::TagLayout layout;
  NeuraMem m(0, cfg, &layout, false);
  for (Index j = 0; j < 9; ++j) m.deliver(hacc_packet(isa::encode_tag(0, j, layout), 1.0, 5), 0);
  EXPECT_THROW(
      {
        for (Cycle c = 1; c < 100; ++c) m.step(c);
      },
      SimulationError);
}

class CoreTest : public ::testing::Test {
protected:
  void SetUp() override {
    auto a = test::csr_from_dense({{1}, {2}, {3}, {4}});
    auto b = test::csr_from_dense({{1, 1, 1, 1}});
    auto plan = oracle::symbolic_pass(a, b);
    program = isa::lower_spgemm(matio::csr_to_csc(a), b, plan, isa::TagLayout{});
  }
  isa::Program program;
};

TEST_F(CoreTest, SingleMmh4LatencyFromStages) {
  CoreConfig cfg;
  NeuraCore core(0, cfg, &program, &program.layout, 64);
  core.accept(program.instrs[0], 0, 0);
  std::size_t requests = 0;
  Cycle first_emit = 0;
  for (Cycle c = 1; c < 100 && first_emit == 0; ++c) {
    core.step(c);
    for (const auto& [rid, g] : core.request_queue()) {
      core.deliver_response(rid);
      ++requests;
    }
    core.request_queue().clear();
    if (!core.staged_haccs().empty()) first_emit = c;
  }
  ASSERT_GT(requests, 0u);
  const Cycle agen_cycles = (requests + cfg.n_addr_generators - 1) / cfg.n_addr_generators;
  EXPECT_EQ(first_emit, cfg.decode_latency + cfg.reg_alloc_latency + cfg.addr_gen_latency + agen_cycles +
                            cfg.multiply_latency);
}

TEST_F(CoreTest, NoRegistersStalls) {
  CoreConfig cfg;
  cfg.regs_per_pipeline = 0;
  NeuraCore core(0, cfg, &program, &program.layout, 64);
  core.accept(program.instrs[0], 0, 0);
  for (Cycle c = 1; c < 10; ++c) core.step(c);
  EXPECT_GT(core.stats().stall_reg, 0u);
  EXPECT_TRUE(core.request_queue().empty());
}

TEST_F(CoreTest, OneAcceptPerCycle) {
  NeuraCore core(0, CoreConfig{}, &program, &program.layout, 64);
  ASSERT_TRUE(core.can_accept());
  core.accept(program.instrs[0], 0, 0);
  EXPECT_FALSE(core.can_accept());
  core.step(1);
  EXPECT_TRUE(core.can_accept());
}

TEST_F(CoreTest, RetiresInOrderAndEmitsAll) {
  NeuraCore core(0, CoreConfig{}, &program, &program.layout, 64);
  core.accept(program.instrs[0], 0, 0);
  std::size_t emitted = 0;
  for (Cycle c = 1; c < 100; ++c) {
    core.step(c);
    for (const auto& [rid, g] : core.request_queue()) core.deliver_response(rid);
    core.request_queue().clear();
    emitted += core.staged_haccs().size();
    core.staged_haccs().clear();
  }
  EXPECT_EQ(emitted, 16u);
  EXPECT_EQ(core.stats().retired, 1u);
  EXPECT_EQ(core.stats().cpi_full.count, 1u);
  EXPECT_TRUE(core.idle());
}
