#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>

#include "neura/isa.hpp"
#include "test_util.hpp"

using namespace neura;
using namespace neura::isa;

namespace {

Program lower(const matio::CsrMatrix& a, const matio::CsrMatrix& b) {
  auto plan = oracle::symbolic_pass(a, b);
  return lower_spgemm(matio::csr_to_csc(a), b, plan, TagLayout::for_dims(a.n_rows, b.n_cols));
}

}  // namespace

TEST(Tag, Concatenation) {
  TagLayout l;
  EXPECT_EQ(encode_tag(0xABCD, 0x1234, l), 0xABCD1234u);
  EXPECT_EQ(encode_tag(0, 0, l), 0u);
}

TEST(Tag, RoundTrip) {
  std::mt19937_64 rng(1);
  for (const TagLayout l : {TagLayout{16, 16}, TagLayout{12, 20}, TagLayout{20, 12}}) {
    for (int n = 0; n < 100000; ++n) {
      const Index i = static_cast<Index>(rng() & ((1u << l.row_bits) - 1));
      const Index j = static_cast<Index>(rng() & ((1u << l.col_bits) - 1));
      ASSERT_EQ(decode_tag(encode_tag(i, j, l), l), std::make_pair(i, j));
    }
  }
}

TEST(Tag, Overflow) {
  EXPECT_THROW(encode_tag(1u << 16, 0, TagLayout{}), LoweringError);
  EXPECT_THROW(TagLayout::for_dims(1u << 20, 1u << 20), LoweringError);
  EXPECT_EQ(TagLayout::for_dims(100000, 1000).row_bits, 17u);
}

TEST(Expand, FullTile) {
  auto a = test::csr_from_dense({{1}, {2}, {3}, {4}});
  auto b = test::csr_from_dense({{1, 1, 1, 1}});
  auto p = lower(a, b);
  ASSERT_EQ(p.instrs.size(), 1u);
  auto h = expand_mmh4(p.instrs[0], p.memory, p.layout);
  ASSERT_EQ(h.size(), 16u);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(h[i * 4 + j].data, static_cast<double>(i + 1));
      EXPECT_EQ(h[i * 4 + j].tag, encode_tag(static_cast<Index>(i), static_cast<Index>(j), p.layout));
      EXPECT_EQ(h[i * 4 + j].counter, 0u);
    }
  }
}

TEST(Expand, RaggedTile) {
  auto a = test::csr_from_dense({{1}, {2}});
  auto b = test::csr_from_dense({{1, 2, 3}});
  auto p = lower(a, b);
  ASSERT_EQ(p.instrs.size(), 1u);
  EXPECT_EQ(p.instrs[0].lanes(), 6u);
  EXPECT_EQ(expand_mmh4(p.instrs[0], p.memory, p.layout).size(), 6u);
}

TEST(Expand, UnmappedAddressFaults) {
  auto p = lower(test::identity(4), test::identity(4));
  auto bad = p.instrs[0];
  bad.base_addr = 0x1;
  EXPECT_THROW(expand_mmh4(bad, p.memory, p.layout), MemoryFault);
}

TEST(Lower, IdentityReplay) {
  auto p = lower(test::identity(4), test::identity(4));
  EXPECT_EQ(p.instrs.size(), 4u);
  auto r = replay(p);
  EXPECT_EQ(r.c, test::identity(4));
  EXPECT_EQ(r.evictions, 4u);
}

TEST(Lower, DenseTwoByTwo) {
  auto d = test::csr_from_dense({{1, 2}, {3, 4}});
  auto p = lower(d, d);
  EXPECT_EQ(p.total_fma, 8u);
  std::map<Tag32, int> per_tag;
  for (const auto& in : p.instrs) {
    for (const auto& h : expand_mmh4(in, p.memory, p.layout)) ++per_tag[h.tag];
  }
  ASSERT_EQ(per_tag.size(), 4u);
  for (const auto& [t, n] : per_tag) EXPECT_EQ(n, 2);
}

TEST(Lower, RmatReplayExactAndConserved) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto a = test::rmat_csr(7, 8, seed);
    auto plan = oracle::symbolic_pass(a, a);
    auto p = lower_spgemm(matio::csr_to_csc(a), a, plan, TagLayout::for_dims(a.n_rows, a.n_cols));
    std::map<Tag32, std::uint32_t> per_tag;
    std::uint64_t haccs = 0;
    for (const auto& in : p.instrs) {
      auto hs = expand_mmh4(in, p.memory, p.layout);
      EXPECT_LE(hs.size(), 16u);
      haccs += hs.size();
      for (const auto& h : hs) ++per_tag[h.tag];
    }
    EXPECT_EQ(haccs, plan.total_fma);
    for (const auto& [t, n] : per_tag) {
      const auto [i, j] = decode_tag(t, p.layout);
      EXPECT_EQ(n, plan.contributions(i, j));
    }
    auto r = replay(p);
    EXPECT_EQ(r.c, oracle::spgemm_gustavson(a, a));
    EXPECT_EQ(r.evictions, plan.total_out_nnz);
    EXPECT_EQ(r.final_live, 0u);
  }
}

TEST(Lower, WindowedReplay) {
  auto a = test::rmat_csr(7, 8, 3);
  auto plan = oracle::symbolic_pass(a, a);
  oracle::WindowParams wp;
  wp.spad_budget = 512;
  auto windows = oracle::plan_windows(plan, wp);
  ASSERT_GT(windows.windows.size(), 1u);
  auto p = lower_spgemm(matio::csr_to_csc(a), a, plan, TagLayout{}, &windows);
  EXPECT_EQ(p.n_windows, windows.windows.size());
  EXPECT_EQ(replay(p).c, oracle::spgemm_gustavson(a, a));
}

TEST(HaccPad, InsertUpdateEvict) {
  HaccPad pad;
  EXPECT_FALSE(pad.apply({7, 5.0, 2}));
  EXPECT_EQ(pad.live(), 1u);
  EXPECT_FALSE(pad.apply({7, 3.0, 0}));
  auto ev = pad.apply({7, 3.0, 0});
  ASSERT_TRUE(ev);
  EXPECT_EQ(ev->data, 11.0);
  EXPECT_EQ(pad.live(), 0u);
}

TEST(HaccPad, SingleContributionEvictsOnInsert) {
  HaccPad pad;
  auto ev = pad.apply({9, 4.0, 0});
  ASSERT_TRUE(ev);
  EXPECT_EQ(ev->data, 4.0);
  EXPECT_EQ(pad.max_live(), 0u);
}

TEST(Trace, TextRoundTrip) {
  auto a = test::rmat_csr(6, 4, 2);
  auto p = lower(a, a);
  std::stringstream ss;
  write_trace(ss, p);
  Program q;
  read_trace(ss, q);
  EXPECT_EQ(q.instrs, p.instrs);
  EXPECT_EQ(q.layout, p.layout);
  EXPECT_EQ(q.n_rows, p.n_rows);
  EXPECT_EQ(q.n_windows, p.n_windows);
}

TEST(Trace, BinaryRoundTrip) {
  auto a = test::rmat_csr(6, 4, 3);
  auto p = lower(a, a);
  std::stringstream ss;
  write_binary_trace(ss, p);
  Program q;
  read_binary_trace(ss, q);
  EXPECT_EQ(q.instrs, p.instrs);
  HaccInstr h{0xDEADBEEF, -2.5, 17};
  EXPECT_EQ(decode_hacc(encode_hacc(h)), h);
}

TEST(Trace, EmptyStreamIsHeaderOnly) {
  Program p;
  std::stringstream ss;
  write_trace(ss, p);
  std::string line;
  std::size_t mmh4_lines = 0;
  while (std::getline(ss, line)) mmh4_lines += line.rfind("mmh4", 0) == 0;
  EXPECT_EQ(mmh4_lines, 0u);
  ss.clear();
  ss.seekg(0);
  Program q;
  read_trace(ss, q);
  EXPECT_TRUE(q.instrs.empty());
}

TEST(Trace, CorruptedRecordNamesIt) {
  auto p = lower(test::identity(8), test::identity(8));
  std::stringstream ss;
  write_trace(ss, p);
  std::string text = ss.str();
  const auto pos = text.find("mmh4", text.find("mmh4") + 1);
  text.replace(pos, 4, "mmhX");
  std::istringstream in(text);
  Program q;
  try {
    read_trace(in, q);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos) << e.what();
  }
}

TEST(Trace, VersionMismatchAndTruncation) {
  auto p = lower(test::identity(8), test::identity(8));
  std::stringstream ss;
  write_trace(ss, p);
  std::string text = ss.str();
  {
    std::string v = text;
    v.replace(0, v.find('\n'), "NEURATRACE 99");
    std::istringstream in(v);
    Program q;
    EXPECT_THROW(read_trace(in, q), ParseError);
  }
  {
    std::istringstream in(text.substr(0, text.rfind("end")));
    Program q;
    EXPECT_THROW(read_trace(in, q), ParseError);
  }
  {
    std::stringstream bs;
    write_binary_trace(bs, p);
    std::string bin = bs.str();
    std::istringstream in(bin.substr(0, bin.size() - 5));
    Program q;
    EXPECT_THROW(read_binary_trace(in, q), ParseError);
  }
}
