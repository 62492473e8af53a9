#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "neurasim.hpp"
#include "neura/isa.hpp"

namespace neura::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
  std::optional<std::string> matrix;
  std::optional<std::string> matrix_b;
  std::optional<std::string> rmat;
  std::string config = "tile4";
  std::string mapper = "drhm-low";
  unsigned k = 16;
  std::string reseed = "row";
  std::uint64_t seed = 1;
  std::string out;
  bool integer_mode = false;
  std::string eviction = "rolling";
  unsigned threads = 1;
};

void add_matrix_flags(CLI::App* app, Common& c) {
  auto* m = app->add_option("--matrix", c.matrix, "Matrix Market file or SNAP edge list (A; B = A unless --matrix-b)");
  auto* r = app->add_option("--rmat", c.rmat, "RMAT operand: scale:ef[:a:b:c:d]");
  m->excludes(r);
  app->add_option("--matrix-b", c.matrix_b, "Right operand file");
  app->add_flag("--integer-mode", c.integer_mode, "Small integer values (exact arithmetic)");
  app->add_option("--seed", c.seed, "Seed for generators and the mapper");
}

void add_sim_flags(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "tile4, tile16, tile64, tile16-gnn or file:PATH");
  app->add_option("--mapper", c.mapper, "ring, modular, drhm-low, drhm-high or random");
  app->add_option("--k", c.k, "DRHM bit width k");
  app->add_option("--reseed", c.reseed, "'row' or a reseed interval in mapped items");
  app->add_option("--eviction", c.eviction, "rolling or barrier")->check(CLI::IsMember({"rolling", "barrier"}));
  app->add_option("--threads", c.threads, "Host threads for the cycle engine")->check(CLI::PositiveNumber);
}

mapping::MapperConfig mapper_of(const Common& c) {
  mapping::MapperConfig m;
  m.strategy = mapping::parse_strategy(c.mapper);
  m.k = c.k;
  m.rng_seed = c.seed;
  apply_reseed(m, c.reseed);
  return m;
}

engine::SimOptions sim_of(const Common& c) {
  engine::SimOptions o;
  o.eviction = c.eviction == "barrier" ? engine::EvictionMode::Barrier : engine::EvictionMode::Rolling;
  o.host_threads = c.threads;
  return o;
}

std::pair<Operand, matio::CsrMatrix> operands(const Common& c) {
  auto a = load_operand(c.matrix, c.rmat, c.seed, c.integer_mode);
  matio::CsrMatrix b = a.matrix;
  if (c.matrix_b) b = load_operand(c.matrix_b, std::nullopt, c.seed + 1, c.integer_mode).matrix;
  return {std::move(a), std::move(b)};
}

void write_text(const fs::path& p, const std::string& text) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("failed writing " + p.string());
}

int cmd_run(const Common& c, std::ostream& out) {
  auto [a, b] = operands(c);
  const auto chip = resolve_config(c.config);
  const auto r = engine::simulate_spgemm(a.matrix, b, chip, mapper_of(c), sim_of(c));
  if (!c.out.empty()) engine::write_outputs(r, c.out);
  out << a.label << " on " << chip.name << " (" << r.stats.mapper << ", " << r.stats.eviction << "): " << r.stats.cycles
      << " cycles, " << r.stats.mmh4_retired << " MMH4, " << r.stats.haccs_applied << " HACC, " << r.stats.evictions
      << " evictions\n";
  return kOk;
}

int cmd_verify(const Common& c, const std::optional<std::string>& trace, const std::optional<std::string>& write_trace,
               double tol, bool no_sim, std::ostream& out) {
  auto [a, b] = operands(c);
  VerifyOptions opt;
  opt.chip = resolve_config(c.config);
  opt.mapper = mapper_of(c);
  opt.sim = sim_of(c);
  opt.tolerance = c.integer_mode ? 0.0 : tol;
  opt.trace_path = trace;
  opt.run_simulation = !no_sim;
  if (write_trace) {
    const auto program = engine::prepare_spgemm(a.matrix, b, opt.chip, opt.sim);
    std::ofstream f(*write_trace, std::ios::binary);
    if (!f) throw IoError("cannot write trace " + *write_trace);
    if (fs::path(*write_trace).extension() == ".bin") {
      isa::write_binary_trace(f, program);
    } else {
      isa::write_trace(f, program);
    }
  }
  const auto report = verify_paths(a.matrix, b, opt);
  json j = json::array();
  for (const auto& p : report.paths) {
    out << (p.pass ? "PASS " : "FAIL ") << p.path << ": " << p.detail << '\n';
    json e = {{"path", p.path}, {"pass", p.pass}, {"detail", p.detail}};
    if (p.divergence) e["divergence"] = {{"row", p.divergence->row}, {"col", p.divergence->col}};
    j.push_back(e);
  }
  if (!c.out.empty()) write_text(fs::path(c.out) / "verify.json", json{{"matrix", a.label}, {"paths", j}}.dump(2) + "\n");
  out << (report.ok() ? "PASS" : "FAIL") << " verify " << a.label << '\n';
  return report.ok() ? kOk : kVerifyFailed;
}

struct SweepArgs {
  std::vector<std::string> configs{"tile4", "tile16", "tile64"};
  std::vector<std::string> mappers{"ring", "modular", "drhm-low", "random"};
  std::vector<std::string> matrices;
  std::vector<std::string> rmats;
  unsigned jobs = 1;
};

int cmd_sweep(const Common& c, const SweepArgs& s, std::ostream& out) {
  if (c.out.empty()) throw ConfigError("sweep needs --out");
  std::vector<Operand> ops;
  for (const auto& m : s.matrices) ops.push_back(load_operand(m, std::nullopt, c.seed, c.integer_mode));
  for (const auto& r : s.rmats) ops.push_back(load_operand(std::nullopt, r, c.seed, c.integer_mode));
  if (ops.empty() || s.configs.empty() || s.mappers.empty()) {
    throw ConfigError("sweep grid is empty: give at least one matrix, config and mapper");
  }
  std::vector<uarch::ChipConfig> chips;
  for (const auto& name : s.configs) chips.push_back(resolve_config(name));
  for (const auto& m : s.mappers) (void)mapping::parse_strategy(m);

  std::vector<SweepPoint> points;
  struct Job {
    std::size_t op, chip, mapper;
  };
  std::vector<Job> jobs;
  for (std::size_t o = 0; o < ops.size(); ++o) {
    for (std::size_t ch = 0; ch < chips.size(); ++ch) {
      for (std::size_t m = 0; m < s.mappers.size(); ++m) {
        jobs.push_back({o, ch, m});
        SweepPoint p;
        p.matrix = ops[o].label;
        p.config = chips[ch].name;
        p.mapper = s.mappers[m];
        points.push_back(p);
      }
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const auto& jb = jobs[i];
      auto& p = points[i];
      try {
        Common pc = c;
        pc.mapper = s.mappers[jb.mapper];
        const auto r = engine::simulate_spgemm(ops[jb.op].matrix, ops[jb.op].matrix, chips[jb.chip], mapper_of(pc),
                                               sim_of(pc));
        engine::write_outputs(r, (fs::path(c.out) / p.matrix / p.config / p.mapper).string());
        p.stats = r.stats;
      } catch (const std::exception& e) {
        p.status = "error";
        p.error = e.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < std::max(1u, s.jobs); ++t) pool.emplace_back(worker);
    worker();
  }
  write_text(fs::path(c.out) / "summary.csv", sweep_summary_csv(points));
  std::size_t failed = 0;
  for (const auto& p : points) {
    if (p.status != "ok") {
      ++failed;
      out << "point " << p.matrix << "/" << p.config << "/" << p.mapper << " failed: " << p.error << '\n';
    }
  }
  out << points.size() << " points, " << failed << " failed; summary in " << (fs::path(c.out) / "summary.csv").string()
      << '\n';
  return failed ? kVerifyFailed : kOk;
}

int cmd_bloat(const std::vector<std::string>& datasets, const std::string& dir, std::ostream& out) {
  if (datasets.empty()) throw ConfigError("bloat needs at least one --dataset");
  std::vector<BloatRow> rows;
  for (const auto& d : datasets) rows.push_back(bloat_of(d));
  const auto csv = bloat_csv(rows);
  out << csv;
  if (!dir.empty()) {
    write_text(fs::path(dir) / "bloat.csv", csv);
    json j = json::array();
    for (const auto& r : rows) {
      json e = {{"dataset", r.name},         {"nodes", r.nodes},
                {"edges", r.edges},          {"nnz", r.nnz},
                {"sparsity_percent", r.sparsity_percent}, {"pp_interim", r.pp_interim},
                {"nnz_output", r.nnz_output}, {"bloat_percent", r.bloat_percent}};
      if (r.paper_bloat) e["paper_bloat_percent"] = *r.paper_bloat;
      j.push_back(e);
    }
    write_text(fs::path(dir) / "bloat.json", j.dump(2) + "\n");
  }
  return kOk;
}

int cmd_smash(const Common& c, const std::string& version, unsigned workers, bool map_csr, std::ostream& out) {
  auto [a, b] = operands(c);
  smash::SmashConfig cfg;
  cfg.version = smash::parse_smash_version(version);
  cfg.n_workers = workers;
  smash::SmashResult r;
  matio::MapCsrMatrix m;
  if (map_csr) {
    m = matio::build_map_csr(a.matrix, 16, {});
    r = smash::smash_run(smash::SmashInput{nullptr, &m}, b, cfg);
  } else {
    r = smash::smash_run(smash::SmashInput{&a.matrix, nullptr}, b, cfg);
  }
  const auto ref = oracle::spgemm_gustavson(a.matrix, b);
  const auto div = first_divergence(r.c, ref, c.integer_mode ? 0.0 : 1e-9);
  json j = {{"matrix", a.label},
            {"version", smash::to_string(cfg.version)},
            {"workers", workers},
            {"map_csr", map_csr},
            {"windows", r.windows.windows.size()},
            {"nnz", r.c.nnz()},
            {"phases",
             {{"prefetch_units", r.ledger.prefetch_units},
              {"hash_units", r.ledger.hash_units},
              {"writeback_units", r.ledger.writeback_units},
              {"prefetch_fraction", r.ledger.prefetch_fraction()},
              {"hash_fraction", r.ledger.hash_fraction()},
              {"writeback_fraction", r.ledger.writeback_fraction()},
              {"all_overlapped", r.ledger.all_phases_overlapped()}}},
            {"tokens",
             {{"issued", r.tokens.tokens_issued},
              {"consumed", r.tokens.tokens_consumed},
              {"violations", r.tokens.violations},
              {"per_worker", r.tokens.tokens_per_worker}}},
            {"matches_gustavson", !div}};
  if (div) j["divergence"] = {{"row", div->row}, {"col", div->col}};
  if (!c.out.empty()) write_text(fs::path(c.out) / "smash.json", j.dump(2) + "\n");
  out << "SMASH " << smash::to_string(cfg.version) << " on " << a.label << ": " << r.c.nnz() << " nonzeros, "
      << r.windows.windows.size() << " windows, " << (div ? "MISMATCH" : "matches Gustavson") << '\n';
  if (div) {
    out << "first divergence at (" << div->row << ", " << div->col << ")\n";
    return kVerifyFailed;
  }
  return kOk;
}

int cmd_gcn(const Common& c, GcnSpec spec, bool cora, std::ostream& out) {
  if (cora) {
    const auto graph = spec.graph_path;
    spec = cora_spec(c.seed);
    spec.graph_path = graph;
  }
  spec.seed = c.seed;
  spec.integer_mode = c.integer_mode;
  const auto chip = resolve_config(c.config);
  const auto r = run_gcn(spec, chip, mapper_of(c), sim_of(c));
  const double tol = c.integer_mode ? 0.0 : 1e-9;
  const bool ok = r.max_relative_error <= tol;
  if (!c.out.empty()) {
    engine::write_outputs(r.sim, c.out);
    json j = {{"nodes", r.workload.adjacency.n_rows},
              {"features", r.workload.features.n_cols},
              {"hidden", r.workload.weight.cols()},
              {"adjacency_nnz", r.workload.adjacency.nnz()},
              {"feature_nnz", r.workload.features.nnz()},
              {"max_relative_error", r.max_relative_error},
              {"tolerance", tol},
              {"pass", ok}};
    write_text(fs::path(c.out) / "gcn.json", j.dump(2) + "\n");
  }
  out << std::setprecision(6) << "GCN " << r.workload.adjacency.n_rows << "x" << r.workload.features.n_cols << " h="
      << r.workload.weight.cols() << " on " << chip.name << ": " << r.sim.stats.cycles << " cycles, max relative error "
      << r.max_relative_error << (ok ? " PASS" : " FAIL") << '\n';
  return ok ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"NeuraChip simulator and sparse-kernel toolkit", "neurasim"};
  app.require_subcommand(1);

  Common run_c, ver_c, sw_c, sm_c, gcn_c;

  auto* run = app.add_subcommand("run", "Simulate C = A * B and write stats.json, heatmap.csv and CPI histograms");
  add_matrix_flags(run, run_c);
  add_sim_flags(run, run_c);
  run->add_option("--out", run_c.out, "Output directory");

  auto* ver = app.add_subcommand("verify", "Check replay, SMASH and the simulation against the oracles");
  add_matrix_flags(ver, ver_c);
  add_sim_flags(ver, ver_c);
  ver->add_option("--out", ver_c.out, "Output directory for verify.json");
  std::optional<std::string> trace, write_trace;
  double tol = 1e-9;
  bool no_sim = false;
  ver->add_option("--trace", trace, "Replay this MMH4 trace instead of trusting the lowering");
  ver->add_option("--write-trace", write_trace, "Write the lowered program's trace (.bin = binary)");
  ver->add_option("--tolerance", tol, "Relative tolerance outside integer mode");
  ver->add_flag("--no-sim", no_sim, "Skip the cycle simulation");

  auto* sw = app.add_subcommand("sweep", "Simulate every (config, mapper, matrix) point");
  SweepArgs sa;
  sw->add_option("--matrix", sa.matrices, "Matrix file (repeatable)");
  sw->add_option("--rmat", sa.rmats, "RMAT operand (repeatable)");
  sw->add_option("--configs", sa.configs, "Chip configs")->delimiter(',');
  sw->add_option("--mappers", sa.mappers, "Mapping strategies")->delimiter(',');
  sw->add_option("--jobs", sa.jobs, "Points simulated in parallel")->check(CLI::PositiveNumber);
  sw->add_flag("--integer-mode", sw_c.integer_mode, "Small integer values");
  sw->add_option("--seed", sw_c.seed, "Seed");
  sw->add_option("--k", sw_c.k, "DRHM bit width k");
  sw->add_option("--reseed", sw_c.reseed, "'row' or a reseed interval");
  sw->add_option("--eviction", sw_c.eviction, "rolling or barrier")->check(CLI::IsMember({"rolling", "barrier"}));
  sw->add_option("--out", sw_c.out, "Output directory")->required();

  auto* bl = app.add_subcommand("bloat", "Bloat table for C = A * A over local SNAP datasets");
  std::vector<std::string> datasets;
  std::string bloat_out;
  bl->add_option("--dataset,datasets", datasets, "Dataset files (edge list or Matrix Market)");
  bl->add_option("--out", bloat_out, "Output directory for bloat.csv / bloat.json");

  auto* sm = app.add_subcommand("smash", "Run the SMASH host kernel");
  add_matrix_flags(sm, sm_c);
  std::string version = "v2";
  unsigned workers = 4;
  bool map_csr = false;
  sm->add_option("--smash-version", version, "base, v1, v2 or v3");
  sm->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  sm->add_flag("--map-csr", map_csr, "Read A from MAP-CSR storage");
  sm->add_option("--out", sm_c.out, "Output directory for smash.json");

  auto* gc = app.add_subcommand("gcn", "One GCN layer: aggregation on the simulator, combination functionally");
  GcnSpec gspec;
  bool cora = false;
  gcn_c.config = "tile16-gnn";
  add_sim_flags(gc, gcn_c);
  gc->add_option("--graph", gspec.graph_path, "Adjacency file instead of a random graph");
  gc->add_option("--nodes", gspec.nodes, "Random graph size");
  gc->add_option("--degree", gspec.avg_degree, "Random graph average degree");
  gc->add_option("--features", gspec.features, "Feature width");
  gc->add_option("--hidden", gspec.hidden, "Hidden width h");
  gc->add_option("--feature-density", gspec.feature_density, "Fraction of nonzero features");
  gc->add_flag("--cora", cora, "Cora-shaped instance (2708 x 1433, h = 16)");
  gc->add_flag("--integer-mode", gcn_c.integer_mode, "Small integer values (exact)");
  gc->add_option("--seed", gcn_c.seed, "Seed");
  gc->add_option("--out", gcn_c.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return cmd_run(run_c, out);
    if (*ver) return cmd_verify(ver_c, trace, write_trace, tol, no_sim, out);
    if (*sw) return cmd_sweep(sw_c, sa, out);
    if (*bl) return cmd_bloat(datasets, bloat_out, out);
    if (*sm) return cmd_smash(sm_c, version, workers, map_csr, out);
    if (*gc) return cmd_gcn(gcn_c, gspec, cora, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kVerifyFailed;
  }
  return kUsage;
}

}  // namespace neura::cli
