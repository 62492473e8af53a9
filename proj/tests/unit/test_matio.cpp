#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "neura/matio.hpp"
#include "test_util.hpp"

using namespace neura;
using namespace neura::matio;

TEST(MatrixMarket, SymmetricPatternExpands) {
  auto m = parse_matrix_market("%%MatrixMarket matrix coordinate pattern symmetric\n2 2 1\n2 1\n");
  m.normalize();
  ASSERT_EQ(m.nnz(), 2u);
  EXPECT_EQ(m.entries[0], (CooEntry{0, 1, 1.0}));
  EXPECT_EQ(m.entries[1], (CooEntry{1, 0, 1.0}));
}

TEST(MatrixMarket, EmptyEntryList) {
  auto m = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n3 3 0\n");
  EXPECT_EQ(m.n_rows, 3u);
  EXPECT_EQ(m.n_cols, 3u);
  EXPECT_EQ(m.nnz(), 0u);
}

TEST(MatrixMarket, MalformedInputReportsLine) {
  try {
    parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n"), Error);
}

TEST(MatrixMarket, WriteReadRoundTrip) {
  auto a = to_coo(test::random_csr(12, 9, 30, 5, ValueMode::Real));
  std::ostringstream os;
  write_matrix_market(os, a);
  auto b = parse_matrix_market(os.str());
  b.normalize();
  EXPECT_EQ(a.entries, b.entries);
}

TEST(MatrixMarket, DuplicatesAreSummed) {
  auto m = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.5\n1 1 2.0\n2 2 1\n");
  m.normalize();
  ASSERT_EQ(m.nnz(), 2u);
  EXPECT_DOUBLE_EQ(m.entries[0].value, 3.5);
}

TEST(EdgeList, SymmetrizeAndComments) {
  std::istringstream in("# comment\n0 1\n1 2\n");
  auto m = read_edge_list(in, true);
  m.normalize();
  EXPECT_EQ(m.n_rows, 3u);
  EXPECT_EQ(m.nnz(), 4u);
}

TEST(Convert, CooToCsrOffsets) {
  CooMatrix m{2, 2, {{0, 0, 1.0}, {1, 1, 2.0}}};
  auto csr = to_csr(m);
  EXPECT_EQ(csr.row_offsets, (std::vector<Offset>{0, 1, 2}));
  EXPECT_EQ(csr.col_indices, (std::vector<Index>{0, 1}));
}

TEST(Convert, IdentityCsrCscArraysEqual) {
  auto csr = test::identity(4);
  auto csc = csr_to_csc(csr);
  EXPECT_EQ(csc.col_offsets, csr.row_offsets);
  EXPECT_EQ(csc.row_indices, csr.col_indices);
  EXPECT_EQ(csc.values, csr.values);
}

TEST(Convert, RandomRoundTrips) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto csr = test::random_csr(16, 16, 20, seed, ValueMode::Real);
    csr.validate();
    auto coo = to_coo(csr);
    EXPECT_TRUE(coo.is_normalized());
    EXPECT_EQ(to_csr(coo), csr);
    auto csc = to_csc(coo);
    csc.validate();
    EXPECT_EQ(to_coo(csc).entries, coo.entries);
    EXPECT_EQ(to_dense(csc), to_dense(csr));
    EXPECT_EQ(transpose(transpose(csr)), csr);
  }
}

TEST(Convert, ValidateRejectsBadOffsets) {
  CsrMatrix m;
  m.n_rows = 1;
  m.n_cols = 2;
  m.row_offsets = {0, 2};
  m.col_indices = {1, 0};
  m.values = {1, 1};
  EXPECT_THROW(m.validate(), Error);
}

TEST(MapCsr, NoReplicationRatioIsOne) {
  auto m = test::random_csr(10, 10, 30, 3);
  auto mc = build_map_csr(m, 1, {});
  EXPECT_EQ(replication_ratio(mc), 1.0);
  EXPECT_EQ(to_csr(mc), m);
}

TEST(MapCsr, WorkedRatioExample) {
  // Row 0 holds 4 nonzeros, row 1 holds 6. With bank width 4 the replica of
  // row 0 starts at slot 12, leaving 2 pad zeros: (10 + 4 + 2) / 10.
  auto m = test::csr_from_dense({{1, 1, 1, 1, 0, 0}, {1, 1, 1, 1, 1, 1}});
  const std::vector<Index> rep{0};
  auto mc = build_map_csr(m, 4, rep);
  EXPECT_EQ(mc.nnz(), 10u);
  EXPECT_EQ(mc.replica_nnz, 4u);
  EXPECT_EQ(mc.pad_count, 2u);
  EXPECT_DOUBLE_EQ(replication_ratio(mc), 1.6);
  ASSERT_TRUE(mc.has_replica(0));
  EXPECT_TRUE(std::equal(mc.row(0).indices.begin(), mc.row(0).indices.end(), mc.replica_row(0).indices.begin()));
  EXPECT_EQ(to_csr(mc), m);
}

TEST(MapCsr, AllRowsReplicatedRatioAtLeastTwo) {
  auto m = test::rmat_csr(9, 8, 4);
  std::vector<Index> all(m.n_rows);
  for (Index i = 0; i < m.n_rows; ++i) all[i] = i;
  auto mc = build_map_csr(m, 16, all);
  EXPECT_GE(replication_ratio(mc), 2.0);
  for (Index r = 0; r < m.n_rows; ++r) {
    EXPECT_EQ(mc.row_offsets[r] % 16, 0u);
    EXPECT_EQ(mc.replica_offsets[r] % 16, 0u);
  }
}

TEST(MapCsr, EmptyMatrixRatioUndefined) {
  CsrMatrix m;
  m.n_rows = 2;
  m.n_cols = 2;
  m.row_offsets = {0, 0, 0};
  EXPECT_THROW(replication_ratio(build_map_csr(m, 1, {})), UndefinedMetricError);
}

TEST(MapCsr, BadPlacementIsConfigError) {
  auto m = test::identity(3);
  const std::vector<Index> missing{0, 1};
  EXPECT_THROW(build_map_csr(m, 1, {}, missing), ConfigError);
  const std::vector<Index> rep{1};
  const std::vector<Index> once{0, 1, 2};
  EXPECT_THROW(build_map_csr(m, 1, rep, once), ConfigError);
  const std::vector<Index> twice{1, 0, 2, 1};
  EXPECT_NO_THROW(build_map_csr(m, 1, rep, twice));
}

TEST(Rmat, Deterministic) {
  RmatParams p;
  p.scale = 3;
  p.edge_factor = 2;
  p.seed = 7;
  EXPECT_EQ(generate_rmat(p).entries, generate_rmat(p).entries);
}

TEST(Rmat, UniformQuadrantsWithinFourSigma) {
  RmatParams p;
  p.scale = 8;
  p.edge_factor = 8;
  p.a = p.b = p.c = p.d = 0.25;
  p.seed = 11;
  auto m = generate_rmat(p);
  const Index half = 1u << 7;
  std::array<double, 4> q{};
  for (const auto& e : m.entries) q[(e.row >= half) * 2 + (e.col >= half)] += 1;
  const double n = static_cast<double>(m.nnz());
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  for (double c : q) EXPECT_LE(std::abs(c - n / 4), 4 * sigma);
}

TEST(Rmat, SkewPresent) {
  RmatParams p;
  p.scale = 10;
  p.seed = 3;
  auto csr = to_csr(generate_rmat(p));
  std::size_t max_len = 0;
  for (Index r = 0; r < csr.n_rows; ++r) max_len = std::max(max_len, csr.row_length(r));
  const double mean = static_cast<double>(csr.nnz()) / csr.n_rows;
  EXPECT_GT(static_cast<double>(max_len) / mean, 5.0);
}

TEST(Rmat, InvalidProbabilities) {
  RmatParams p;
  p.a = 0.9;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Banded, Shape) {
  auto m = generate_banded(10, 2);
  for (const auto& e : m.entries) EXPECT_LE(e.row > e.col ? e.row - e.col : e.col - e.row, 2u);
  EXPECT_EQ(m.nnz(), 10u * 5 - 2 * 3);
}
