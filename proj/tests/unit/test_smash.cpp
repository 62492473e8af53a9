#include <gtest/gtest.h>

#include <cmath>

#include "neura/smash.hpp"
#include "test_util.hpp"

using namespace neura;
using namespace neura::smash;

namespace {

double max_rel(const CsrMatrix& got, const CsrMatrix& want) {
  auto g = matio::to_dense(got);
  auto w = matio::to_dense(want);
  double m = 0;
  for (std::size_t i = 0; i < g.data().size(); ++i) {
    m = std::max(m, std::abs(g.data()[i] - w.data()[i]) / std::max(std::abs(w.data()[i]), 1e-300));
  }
  return m;
}

}  // namespace

TEST(HashTable, InsertAtHome) {
  ScratchpadHashTable t(7);
  auto r = hash_probe_insert(t, 5, 1.0);
  EXPECT_EQ(r.outcome, HashOutcome::Inserted);
  EXPECT_EQ(r.slot, 5u);
}

TEST(HashTable, UpdateAccumulates) {
  ScratchpadHashTable t(7);
  hash_probe_insert(t, 5, 2.0);
  auto r = hash_probe_insert(t, 5, 3.0);
  EXPECT_EQ(r.outcome, HashOutcome::Updated);
  EXPECT_EQ(t.value_at(r.slot), 5.0);
  EXPECT_EQ(t.occupancy(), 1u);
}

TEST(HashTable, QuadraticProbe) {
  ScratchpadHashTable t(7);
  hash_probe_insert(t, 3, 1.0);
  auto r = hash_probe_insert(t, 10, 1.0);
  EXPECT_EQ(r.outcome, HashOutcome::Probed);
  EXPECT_EQ(r.probes, 1u);
  EXPECT_EQ(r.slot, 4u);
}

TEST(HashTable, OverflowIsReported) {
  ScratchpadHashTable t(3);
  hash_probe_insert(t, 0, 1.0);
  hash_probe_insert(t, 1, 1.0);
  hash_probe_insert(t, 2, 1.0);
  EXPECT_THROW(hash_probe_insert(t, 3, 1.0), OverflowError);
}

TEST(HashTable, DirectLayout) {
  ScratchpadHashTable t(8, true);
  auto r = hash_probe_insert(t, pack_tag(3, 6), 1.0);
  EXPECT_EQ(r.slot, 6u);
}

TEST(Smash, BaseSingleWorkerIdentity) {
  auto b = test::random_csr(32, 32, 100, 4, matio::ValueMode::Real);
  SmashConfig cfg;
  cfg.version = SmashVersion::Base;
  cfg.n_workers = 1;
  EXPECT_EQ(smash_spgemm(test::identity(32), b, cfg), b);
}

TEST(Smash, V2EightWorkersRmat) {
  auto a = test::rmat_csr(8, 8, 3, matio::ValueMode::Real);
  SmashConfig cfg;
  cfg.version = SmashVersion::V2;
  cfg.n_workers = 8;
  cfg.spad_capacity = 1 << 14;
  auto r = smash_run({&a, nullptr}, a, cfg);
  EXPECT_LE(max_rel(r.c, oracle::spgemm_gustavson(a, a)), 1e-9);
  EXPECT_EQ(r.tokens.violations, 0u);
  EXPECT_EQ(r.tokens.tokens_issued, r.tokens.tokens_consumed);
  EXPECT_EQ(r.tokens.tokens_issued, 2u * a.n_rows);
}

TEST(Smash, IntegerModeBitwiseEveryVersion) {
  auto a = test::rmat_csr(7, 8, 5);
  auto want = oracle::spgemm_gustavson(a, a);
  for (auto v : {SmashVersion::Base, SmashVersion::V1, SmashVersion::V2, SmashVersion::V3}) {
    for (unsigned w : {1u, 3u, 8u}) {
      SmashConfig cfg;
      cfg.version = v;
      cfg.n_workers = w;
      cfg.spad_capacity = 2048;
      EXPECT_EQ(smash_spgemm(a, a, cfg), want) << to_string(v) << " workers=" << w;
    }
  }
}

TEST(Smash, MapCsrBackedEqualsCsr) {
  auto a = test::rmat_csr(7, 8, 8);
  std::vector<Index> rep;
  for (Index r = 0; r < a.n_rows; r += 3) rep.push_back(r);
  auto mc = matio::build_map_csr(a, 16, rep);
  for (auto v : {SmashVersion::V1, SmashVersion::V2, SmashVersion::V3}) {
    SmashConfig cfg;
    cfg.version = v;
    cfg.spad_capacity = 2048;
    EXPECT_EQ(smash_spgemm(mc, a, cfg), smash_spgemm(a, a, cfg));
  }
}

TEST(Tokens, HalvingRule) {
  EXPECT_EQ(even_half_length(1), 1u);
  EXPECT_EQ(even_half_length(4), 2u);
  EXPECT_EQ(even_half_length(5), 3u);
}

TEST(Tokens, SingleEntryRowUnchanged) {
  auto a = test::csr_from_dense({{0, 2, 0}});
  auto b = test::csr_from_dense({{1, 1}, {3, 4}, {5, 6}});
  SmashConfig cfg;
  cfg.version = SmashVersion::V2;
  cfg.n_workers = 2;
  EXPECT_EQ(smash_spgemm(a, b, cfg), oracle::spgemm_gustavson(a, b));
}

TEST(Tokens, LoadBalanceAudit) {
  auto a = test::random_csr(64, 64, 64 * 6, 21);
  auto plan = oracle::symbolic_pass(a, a);
  oracle::Window win;
  std::vector<ScratchpadHashTable> tables;
  for (Index r = 0; r < 64; ++r) {
    win.rows.push_back(r);
    win.classification.push_back(oracle::RowClass::Sparse);
    const auto cap = oracle::next_prime(std::max<std::uint64_t>(plan.fma_per_row[r] * 2, 2));
    win.hash_capacity.push_back(cap);
    tables.emplace_back(cap);
  }
  std::vector<std::uint32_t> consumed;
  auto per_worker = run_tokenized_window(win, {&a, nullptr}, a, tables, 8, &consumed);
  ASSERT_EQ(per_worker.size(), 8u);
  std::uint64_t total = 0;
  for (auto n : per_worker) total += n;
  EXPECT_EQ(total, 128u);
  const double mean = static_cast<double>(total) / 8;
  for (auto n : per_worker) {
    EXPECT_LE(static_cast<double>(n), 2 * mean);
    EXPECT_GE(static_cast<double>(n), mean / 2);
  }
  for (auto c : consumed) EXPECT_EQ(c, 1u);
}

TEST(Tokens, WindowTablesMatchContribCounters) {
  auto a = test::rmat_csr(7, 8, 2, matio::ValueMode::Ones);
  auto plan = oracle::symbolic_pass(a, a);
  oracle::Window win;
  std::vector<ScratchpadHashTable> tables;
  for (Index r = 0; r < a.n_rows; ++r) {
    win.rows.push_back(r);
    win.classification.push_back(oracle::RowClass::Sparse);
    const auto cap = oracle::next_prime(std::max<std::uint64_t>(plan.fma_per_row[r] * 3 / 2, 2));
    win.hash_capacity.push_back(cap);
    tables.emplace_back(cap);
  }
  run_tokenized_window(win, {&a, nullptr}, a, tables, 6);
  for (Index r = 0; r < a.n_rows; ++r) {
    const auto& t = tables[r];
    std::uint64_t cells = 0;
    for (std::uint64_t s = 0; s < t.capacity(); ++s) {
      if (t.tag_at(s) == ScratchpadHashTable::kEmpty) continue;
      ++cells;
      EXPECT_EQ(tag_row(t.tag_at(s)), r);
      EXPECT_EQ(t.value_at(s), static_cast<double>(plan.contributions(r, tag_col(t.tag_at(s)))));
    }
    EXPECT_EQ(cells, plan.out_nnz_per_row[r]);
  }
}

TEST(Pipeline, SingleWindowEqualsV2) {
  auto a = test::rmat_csr(6, 4, 9);
  SmashConfig v2;
  v2.version = SmashVersion::V2;
  v2.spad_capacity = 1 << 16;
  SmashConfig v3 = v2;
  v3.version = SmashVersion::V3;
  auto r3 = smash_run({&a, nullptr}, a, v3);
  EXPECT_EQ(r3.windows.windows.size(), 1u);
  EXPECT_EQ(r3.c, smash_spgemm(a, a, v2));
}

TEST(Pipeline, ThreePhasesOverlap) {
  auto a = test::rmat_csr(8, 8, 6);
  SmashConfig cfg;
  cfg.version = SmashVersion::V3;
  cfg.spad_capacity = 1024;
  auto r = smash_run({&a, nullptr}, a, cfg);
  ASSERT_GE(r.windows.windows.size(), 3u);
  EXPECT_TRUE(r.ledger.all_phases_overlapped());
  EXPECT_EQ(r.c, oracle::spgemm_gustavson(a, a));
  const double sum = r.ledger.prefetch_fraction() + r.ledger.hash_fraction() + r.ledger.writeback_fraction();
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Smash, InvalidConfig) {
  SmashConfig cfg;
  cfg.n_workers = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(parse_smash_version("v9"), ConfigError);
}
