#include <benchmark/benchmark.h>

#include <random>

#include "neura/engine.hpp"
#include "neura/smash.hpp"

using namespace neura;

namespace {

matio::CsrMatrix rmat(unsigned scale, unsigned ef) {
  matio::RmatParams p;
  p.scale = scale;
  p.edge_factor = ef;
  p.seed = 7;
  auto coo = matio::generate_rmat(p);
  matio::assign_values(coo, matio::ValueMode::Real, 8);
  return matio::to_csr(coo);
}

void BM_Gustavson(benchmark::State& state) {
  const auto a = rmat(static_cast<unsigned>(state.range(0)), 8);
  for (auto _ : state) benchmark::DoNotOptimize(oracle::spgemm_gustavson(a, a));
}
BENCHMARK(BM_Gustavson)->Arg(8)->Arg(10)->Arg(12);

void BM_SymbolicPass(benchmark::State& state) {
  const auto a = rmat(static_cast<unsigned>(state.range(0)), 8);
  for (auto _ : state) benchmark::DoNotOptimize(oracle::symbolic_pass(a, a));
}
BENCHMARK(BM_SymbolicPass)->Arg(10)->Arg(12);

void BM_Smash(benchmark::State& state) {
  const auto a = rmat(10, 8);
  smash::SmashConfig cfg;
  cfg.version = static_cast<smash::SmashVersion>(state.range(0));
  cfg.n_workers = 4;
  state.SetLabel(smash::to_string(cfg.version));
  for (auto _ : state) benchmark::DoNotOptimize(smash::smash_spgemm(a, a, cfg));
}
BENCHMARK(BM_Smash)->DenseRange(0, 3);

void BM_HashProbeInsert(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::vector<std::uint64_t> tags(4096);
  for (auto& t : tags) t = smash::pack_tag(static_cast<Index>(rng() % 512), static_cast<Index>(rng() % 512));
  for (auto _ : state) {
    smash::ScratchpadHashTable table(oracle::next_prime(8192));
    for (auto t : tags) benchmark::DoNotOptimize(smash::hash_probe_insert(table, t, 1.0));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(tags.size()));
}
BENCHMARK(BM_HashProbeInsert);

void BM_Mapper(benchmark::State& state) {
  mapping::MapperConfig cfg;
  cfg.strategy = static_cast<mapping::Strategy>(state.range(0));
  cfg.n_targets = 128;
  mapping::Mapper m(cfg, isa::TagLayout{});
  state.SetLabel(mapping::to_string(cfg.strategy));
  isa::Tag32 t = 0;
  for (auto _ : state) benchmark::DoNotOptimize(m.map(t++ * 2654435761u, 1));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Mapper)->DenseRange(0, 4);

void BM_SimulateTile4(benchmark::State& state) {
  const auto a = rmat(static_cast<unsigned>(state.range(0)), 4);
  const auto chip = uarch::named_config("tile4");
  const auto prog = engine::prepare_spgemm(a, a, chip);
  mapping::MapperConfig m;
  m.strategy = mapping::Strategy::DrhmLow;
  std::uint64_t cycles = 0;
  for (auto _ : state) {
    auto r = engine::SimRun(chip, prog, m).run_to_completion();
    cycles += r.stats.cycles;
  }
  state.counters["kcps"] = benchmark::Counter(static_cast<double>(cycles) / 1000, benchmark::Counter::kIsRate);
}
BENCHMARK(BM_SimulateTile4)->Arg(6)->Arg(7)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
