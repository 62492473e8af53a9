#include <gtest/gtest.h>

#include <cmath>

#include "neura/oracle.hpp"
#include "test_util.hpp"

using namespace neura;
using namespace neura::oracle;
using matio::to_dense;

namespace {

double max_rel(const DenseMatrix& x, const DenseMatrix& y) {
  double m = 0;
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    const double d = std::abs(x.data()[i] - y.data()[i]);
    m = std::max(m, d / std::max(std::abs(y.data()[i]), 1e-300));
  }
  return m;
}

}  // namespace

TEST(DenseOracle, IdentityTimesB) {
  auto b = to_dense(test::random_csr(3, 3, 6, 1, matio::ValueMode::Real));
  EXPECT_EQ(spgemm_dense_oracle(DenseMatrix::identity(3), b), b);
}

TEST(DenseOracle, HandExample) {
  auto a = to_dense(test::csr_from_dense({{1, 2}, {0, 3}}));
  auto b = to_dense(test::csr_from_dense({{4, 0}, {1, 5}}));
  auto c = spgemm_dense_oracle(a, b);
  EXPECT_EQ(c, to_dense(test::csr_from_dense({{6, 10}, {3, 15}})));
}

TEST(Gustavson, MatchesDenseOnRandom) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto a = test::random_csr(32, 32, 120, seed, matio::ValueMode::Real);
    auto b = test::random_csr(32, 32, 120, seed + 100, matio::ValueMode::Real);
    auto c = spgemm_gustavson(a, b);
    c.validate();
    EXPECT_LE(max_rel(to_dense(c), spgemm_dense_oracle(to_dense(a), to_dense(b))), 1e-12);
  }
}

TEST(Gustavson, IdentityReproducesB) {
  auto b = test::random_csr(20, 15, 40, 4, matio::ValueMode::Real);
  EXPECT_EQ(spgemm_gustavson(test::identity(20), b), b);
}

TEST(Gustavson, OneByOne) {
  auto c = spgemm_gustavson(test::csr_from_dense({{2}}), test::csr_from_dense({{3}}));
  ASSERT_EQ(c.nnz(), 1u);
  EXPECT_EQ(c.values[0], 6.0);
}

TEST(Gustavson, RmatSquaredMatchesDense) {
  auto a = test::rmat_csr(6, 8, 2, matio::ValueMode::Real);
  EXPECT_LE(max_rel(to_dense(spgemm_gustavson(a, a)), spgemm_dense_oracle(to_dense(a), to_dense(a))), 1e-12);
}

TEST(Gustavson, CancellationKeepsStructuralZero) {
  auto a = test::csr_from_dense({{1, 1}});
  auto b = test::csr_from_dense({{1}, {-1}});
  auto c = spgemm_gustavson(a, b);
  ASSERT_EQ(c.nnz(), 1u);
  EXPECT_EQ(c.values[0], 0.0);
}

TEST(Gustavson, DimensionMismatch) {
  EXPECT_THROW(spgemm_gustavson(test::identity(3), test::identity(4)), DimensionError);
}

TEST(Symbolic, IdentityTimesB) {
  auto b = test::random_csr(16, 16, 40, 9);
  auto plan = symbolic_pass(test::identity(16), b);
  EXPECT_EQ(plan.total_fma, b.nnz());
  for (Index i = 0; i < b.n_rows; ++i) {
    for (auto j : b.row(i).indices) EXPECT_EQ(plan.contributions(i, j), 1u);
  }
}

TEST(Symbolic, HandCount) {
  auto plan = symbolic_pass(test::csr_from_dense({{1, 1}, {0, 1}}), test::csr_from_dense({{1, 1}, {1, 1}}));
  EXPECT_EQ(plan.fma_per_row, (std::vector<std::uint64_t>{4, 2}));
  EXPECT_EQ(plan.contributions(0, 0), 2u);
  EXPECT_EQ(plan.contributions(0, 1), 2u);
  EXPECT_EQ(plan.contributions(1, 0), 1u);
  EXPECT_EQ(plan.contributions(1, 1), 1u);
}

TEST(Symbolic, AgreesWithBruteForce) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto a = test::random_csr(40, 30, 150, seed);
    auto b = test::random_csr(30, 50, 150, seed + 50);
    auto plan = symbolic_pass(a, b);
    auto da = to_dense(a);
    auto db = to_dense(b);
    std::uint64_t sum = 0;
    std::uint64_t out = 0;
    for (Index i = 0; i < 40; ++i) {
      for (Index j = 0; j < 50; ++j) {
        std::uint32_t n = 0;
        for (Index k = 0; k < 30; ++k) n += da(i, k) != 0 && db(k, j) != 0;
        EXPECT_EQ(plan.contributions(i, j), n);
        EXPECT_EQ(plan.position(i, j).has_value(), n > 0);
        sum += n;
        out += n > 0;
      }
    }
    EXPECT_EQ(plan.total_fma, sum);
    EXPECT_EQ(plan.total_out_nnz, out);
    std::uint64_t counted = 0;
    for (auto c : plan.counter_counts) counted += c;
    EXPECT_EQ(counted, plan.total_fma);
  }
}

TEST(Bloat, DirectFormula) {
  SymbolicPlan plan;
  plan.total_fma = 305;
  plan.total_out_nnz = 100;
  EXPECT_DOUBLE_EQ(bloat_report(plan).bloat_percent, 205.0);
  plan.total_out_nnz = 0;
  EXPECT_THROW(bloat_report(plan), UndefinedMetricError);
}

TEST(Bloat, DiagonalIsZero) {
  auto d = test::identity(50);
  EXPECT_EQ(bloat_report(symbolic_pass(d, d)).bloat_percent, 0.0);
}

TEST(Primes, Basics) {
  EXPECT_EQ(next_prime(12), 13u);
  EXPECT_EQ(next_prime(13), 13u);
  EXPECT_EQ(next_prime(0), 2u);
  EXPECT_EQ(prev_prime(512), 509u);
  EXPECT_EQ(prev_prime(1), 0u);
  EXPECT_TRUE(is_prime(2654435761ull));
}

TEST(Windows, AllSparseBelowThreshold) {
  auto a = test::random_csr(64, 64, 200, 2);
  auto plan = symbolic_pass(a, a);
  WindowParams p;
  p.threshold = 1e9;
  p.spad_budget = 1u << 20;
  auto w = plan_windows(plan, p);
  for (const auto& win : w.windows) {
    for (auto c : win.classification) EXPECT_EQ(c, RowClass::Sparse);
  }
}

TEST(Windows, SparseCapacityIsNextPrime) {
  // One row with 10 FMAs: 10 * 1.2 = 12 -> 13.
  auto a = test::csr_from_dense({{1, 1, 1, 1, 1, 1, 1, 1, 1, 1}});
  matio::DenseMatrix bd(10, 10);
  for (int i = 0; i < 10; ++i) bd(i, i) = 1;
  auto plan = symbolic_pass(a, matio::dense_to_csr(bd));
  ASSERT_EQ(plan.fma_per_row[0], 10u);
  WindowParams p;
  p.ef = 1.2;
  p.threshold = 1e9;
  auto w = plan_windows(plan, p);
  ASSERT_EQ(w.windows.size(), 1u);
  EXPECT_EQ(w.windows[0].hash_capacity[0], 13u);
}

TEST(Windows, RandomPlanProperties) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto a = test::rmat_csr(8, 8, seed + 1);
    auto plan = symbolic_pass(a, a);
    WindowParams p;
    p.spad_budget = 4096;
    auto w = plan_windows(plan, p);
    std::vector<int> seen(plan.n_rows, 0);
    for (const auto& win : w.windows) {
      EXPECT_LE(win.total_capacity(), p.spad_budget);
      for (auto r : win.rows) ++seen[r];
    }
    for (auto s : seen) EXPECT_EQ(s, 1);
  }
}

TEST(Windows, RowTooLargeNamesRow) {
  auto a = test::csr_from_dense({{1, 1, 1, 1}});
  auto plan = symbolic_pass(a, test::identity(4));
  WindowParams p;
  p.spad_budget = 2;
  p.threshold = 1e9;
  try {
    plan_windows(plan, p);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("row 0"), std::string::npos) << e.what();
  }
}

TEST(Gcn, IdentityGraphAndWeight) {
  matio::DenseMatrix x(4, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) x(i, j) = static_cast<double>(i + j);
  }
  auto w = gcn_layer_workload(test::identity(4), x, DenseMatrix::identity(3));
  EXPECT_EQ(w.reference, x);
}

TEST(Gcn, PathGraph) {
  matio::DenseMatrix x(2, 1);
  x(0, 0) = 1;
  x(1, 0) = 2;
  matio::DenseMatrix w(1, 1, 1.0);
  auto job = gcn_layer_workload(test::csr_from_dense({{0, 1}, {1, 0}}), x, w);
  EXPECT_EQ(job.reference(0, 0), 2.0);
  EXPECT_EQ(job.reference(1, 0), 1.0);
  auto chained = gcn_combine(spgemm_gustavson(job.adjacency, job.features), job.weight);
  EXPECT_EQ(max_relative_error(chained, job.reference), 0.0);
}

TEST(Gcn, ReluClampsNegative) {
  matio::DenseMatrix x(1, 1, 1.0);
  matio::DenseMatrix w(1, 1, -2.0);
  auto job = gcn_layer_workload(test::identity(1), x, w);
  EXPECT_EQ(job.reference(0, 0), 0.0);
}

TEST(Gcn, DimensionMismatch) {
  EXPECT_THROW(gcn_layer_workload(test::identity(3), matio::DenseMatrix(2, 2), DenseMatrix::identity(2)),
               DimensionError);
}
