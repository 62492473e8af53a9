#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli/neurasim.hpp"
#include "test_util.hpp"

using namespace neura;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "neurasim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_mtx(const fs::path& p, const matio::CsrMatrix& m) { matio::write_matrix_market(p.string(), matio::to_coo(m)); }

}  // namespace

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(run({"run", "--matrix", "/nonexistent/a.mtx"}).code, cli::kIo);
  EXPECT_EQ(run({"run", "--rmat", "4:4", "--config", "tile8"}).code, cli::kUsage);
  EXPECT_EQ(run({"run", "--rmat", "4:4", "--mapper", "nope"}).code, cli::kUsage);
  EXPECT_EQ(run({"run", "--rmat", "4:4", "--matrix", "x.mtx"}).code, cli::kUsage);
  EXPECT_EQ(run({"bloat", "/nonexistent/facebook.txt"}).code, cli::kIo);
}

TEST(Cli, ParseRmat) {
  auto p = cli::parse_rmat("5:3", 9);
  EXPECT_EQ(p.scale, 5u);
  EXPECT_EQ(p.edge_factor, 3u);
  EXPECT_EQ(p.seed, 9u);
  auto q = cli::parse_rmat("4:2:0.25:0.25:0.25:0.25", 1);
  EXPECT_EQ(q.a, 0.25);
  EXPECT_THROW(cli::parse_rmat("4", 1), ConfigError);
}

TEST(Cli, RunWritesOutputs) {
  auto dir = test::temp_dir("cli_run");
  auto r = run({"run", "--rmat", "5:4", "--integer-mode", "--out", dir.string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  for (const char* f : {"stats.json", "heatmap.csv", "cpi_mmh4_full.csv", "cpi_hacc_re.csv", "run_log.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  auto stats = nlohmann::json::parse(slurp(dir / "stats.json"));
  EXPECT_EQ(stats["config"], "tile4");
  EXPECT_FALSE(stats.contains("wall_seconds"));
}

TEST(Cli, VerifyIdentityPasses) {
  auto dir = test::temp_dir("cli_verify_id");
  write_mtx(dir / "id.mtx", test::identity(16));
  auto r = run({"verify", "--matrix", (dir / "id.mtx").string()});
  EXPECT_EQ(r.code, cli::kOk) << r.out << r.err;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
}

TEST(Cli, VerifyPathsBitwiseOnRmat) {
  auto a = test::rmat_csr(6, 8, 2);
  cli::VerifyOptions opt;
  auto rep = cli::verify_paths(a, a, opt);
  EXPECT_TRUE(rep.ok());
  EXPECT_GE(rep.paths.size(), 7u);
  for (const auto& p : rep.paths) EXPECT_TRUE(p.pass) << p.path << ": " << p.detail;
}

TEST(Cli, CorruptedTraceReportsDivergence) {
  auto dir = test::temp_dir("cli_trace");
  auto a = test::rmat_csr(5, 4, 3);
  write_mtx(dir / "a.mtx", a);
  const auto trace = (dir / "a.trace").string();
  ASSERT_EQ(run({"verify", "--matrix", (dir / "a.mtx").string(), "--no-sim", "--write-trace", trace}).code, cli::kOk);

  // Point the first MMH4 at a different output row.
  std::string text = slurp(trace);
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  bool done = false;
  while (std::getline(in, line)) {
    if (!done && line.rfind("mmh4", 0) == 0) {
      std::istringstream ls(line);
      std::vector<std::string> tok;
      for (std::string t; ls >> t;) tok.push_back(t);
      // mmh4 base a_data b_col b_data roll k window n_a n_b a_row0 ...
      tok[10] = std::to_string(std::stoul(tok[10]) + 1);
      line.clear();
      for (std::size_t i = 0; i < tok.size(); ++i) line += (i ? " " : "") + tok[i];
      done = true;
    }
    out << line << '\n';
  }
  ASSERT_TRUE(done);
  std::ofstream(trace, std::ios::binary) << out.str();

  auto r = run({"verify", "--matrix", (dir / "a.mtx").string(), "--no-sim", "--trace", trace});
  EXPECT_EQ(r.code, cli::kVerifyFailed);
  EXPECT_NE(r.out.find("FAIL trace: first divergence at ("), std::string::npos) << r.out;
}

TEST(Cli, FirstDivergence) {
  auto a = test::csr_from_dense({{1, 0}, {0, 2}});
  auto b = test::csr_from_dense({{1, 0}, {3, 2}});
  auto d = cli::first_divergence(a, b, 0.0);
  ASSERT_TRUE(d);
  EXPECT_EQ(d->row, 1u);
  EXPECT_EQ(d->col, 0u);
  EXPECT_EQ(d->expected, 3.0);
  EXPECT_FALSE(cli::first_divergence(a, a, 0.0));
}

TEST(Cli, SweepGridAndDeterminism) {
  auto d1 = test::temp_dir("cli_sweep1");
  auto d2 = test::temp_dir("cli_sweep2");
  const std::vector<std::string> base{"sweep", "--rmat", "4:4", "--rmat", "5:2"};
  auto args1 = base;
  args1.insert(args1.end(), {"--out", d1.string()});
  auto args2 = base;
  args2.insert(args2.end(), {"--out", d2.string(), "--jobs", "3"});
  auto r1 = run(args1);
  ASSERT_EQ(r1.code, cli::kOk) << r1.err;
  ASSERT_EQ(run(args2).code, cli::kOk);
  std::size_t stats_files = 0;
  for (const auto& e : fs::recursive_directory_iterator(d1)) stats_files += e.path().filename() == "stats.json";
  EXPECT_EQ(stats_files, 24u);
  EXPECT_EQ(slurp(d1 / "summary.csv"), slurp(d2 / "summary.csv"));
  EXPECT_NE(slurp(d1 / "summary.csv").find("speedup_vs_tile4"), std::string::npos);
}

TEST(Cli, EmptySweepIsUsageError) {
  auto dir = test::temp_dir("cli_sweep_empty");
  EXPECT_EQ(run({"sweep", "--out", dir.string()}).code, cli::kUsage);
}

TEST(Cli, BloatDiagonalIsZero) {
  auto dir = test::temp_dir("cli_bloat");
  {
    std::ofstream f(dir / "ring.txt");
    for (int i = 0; i < 10; ++i) f << i << ' ' << i << '\n';
  }
  auto r = run({"bloat", (dir / "ring.txt").string(), "--out", dir.string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  auto row = cli::bloat_of((dir / "ring.txt").string());
  EXPECT_EQ(row.bloat_percent, 0.0);
  EXPECT_TRUE(fs::exists(dir / "bloat.csv"));
  EXPECT_TRUE(fs::exists(dir / "bloat.json"));
  EXPECT_EQ(cli::paper_bloat("facebook_combined"), 2872.80);
  EXPECT_EQ(cli::paper_bloat("wiki-Vote"), 148.09);
}

TEST(Cli, SmashCommand) {
  auto dir = test::temp_dir("cli_smash");
  for (const char* v : {"base", "v1", "v2", "v3"}) {
    auto r = run({"smash", "--rmat", "6:4", "--smash-version", v, "--workers", "3", "--out", dir.string()});
    EXPECT_EQ(r.code, cli::kOk) << v << r.err;
  }
  EXPECT_EQ(run({"smash", "--rmat", "6:4", "--map-csr"}).code, cli::kOk);
}

TEST(Cli, GcnCommand) {
  auto dir = test::temp_dir("cli_gcn");
  auto r = run({"gcn", "--nodes", "64", "--features", "16", "--hidden", "4", "--out", dir.string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  auto j = nlohmann::json::parse(slurp(dir / "gcn.json"));
  EXPECT_LE(j["max_relative_error"].get<double>(), 1e-9);
}

TEST(Cli, GcnIdentityGraph) {
  auto dir = test::temp_dir("cli_gcn_id");
  write_mtx(dir / "id.mtx", test::identity(12));
  cli::GcnSpec spec;
  spec.graph_path = (dir / "id.mtx").string();
  spec.features = 6;
  spec.hidden = 3;
  auto o = cli::run_gcn(spec, uarch::named_config("tile4"), {});
  EXPECT_LE(o.max_relative_error, 1e-12);
}
