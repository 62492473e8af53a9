#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "neurasim.hpp"
#include "neura/isa.hpp"
#include "neura/oracle.hpp"

namespace neura::cli {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dataset_name(const std::string& path) {
  std::string name = std::filesystem::path(path).filename().string();
  for (const char* ext : {".gz", ".txt", ".mtx", ".tsv", ".edges"}) {
    const std::string e(ext);
    if (name.size() > e.size() && name.compare(name.size() - e.size(), e.size(), e) == 0) {
      name.erase(name.size() - e.size());
    }
  }
  return name;
}

}  // namespace

matio::RmatParams parse_rmat(const std::string& text, std::uint64_t seed) {
  const auto f = split(text, ':');
  if (f.size() != 2 && f.size() != 6) throw ConfigError("--rmat expects scale:ef or scale:ef:a:b:c:d, got '" + text + "'");
  matio::RmatParams p;
  try {
    p.scale = static_cast<unsigned>(std::stoul(f[0]));
    p.edge_factor = static_cast<unsigned>(std::stoul(f[1]));
    if (f.size() == 6) {
      p.a = std::stod(f[2]);
      p.b = std::stod(f[3]);
      p.c = std::stod(f[4]);
      p.d = std::stod(f[5]);
    }
  } catch (const std::logic_error&) {
    throw ConfigError("--rmat: cannot parse '" + text + "'");
  }
  p.seed = seed;
  p.validate();
  return p;
}

Operand load_operand(const std::optional<std::string>& path, const std::optional<std::string>& rmat,
                     std::uint64_t seed, bool integer_mode) {
  if (path.has_value() == rmat.has_value()) throw ConfigError("give exactly one of --matrix and --rmat");
  Operand op;
  matio::CooMatrix coo;
  if (path) {
    if (!std::filesystem::exists(*path)) throw IoError("matrix file not found: " + *path);
    coo = matio::load_matrix(*path);
    op.label = dataset_name(*path);
    if (integer_mode) matio::assign_values(coo, matio::ValueMode::SmallIntegers, seed);
  } else {
    const auto p = parse_rmat(*rmat, seed);
    coo = matio::generate_rmat(p);
    matio::assign_values(coo, integer_mode ? matio::ValueMode::SmallIntegers : matio::ValueMode::Real, seed);
    op.label = "rmat" + std::to_string(p.scale) + "x" + std::to_string(p.edge_factor) + "s" + std::to_string(seed);
  }
  op.matrix = matio::to_csr(coo);
  return op;
}

uarch::ChipConfig resolve_config(const std::string& spec) {
  if (spec.rfind("file:", 0) == 0) return uarch::config_from_json(read_text(spec.substr(5)));
  return uarch::named_config(spec);
}

void apply_reseed(mapping::MapperConfig& cfg, const std::string& reseed) {
  if (reseed == "row") {
    cfg.reseed_per_row = true;
    cfg.reseed_interval = 0;
    return;
  }
  try {
    std::size_t used = 0;
    const auto n = std::stoull(reseed, &used);
    if (used != reseed.size()) throw std::invalid_argument(reseed);
    cfg.reseed_per_row = false;
    cfg.reseed_interval = n;
  } catch (const std::logic_error&) {
    throw ConfigError("--reseed expects 'row' or an item count, got '" + reseed + "'");
  }
}

std::optional<Divergence> first_divergence(const matio::CsrMatrix& got, const matio::CsrMatrix& expected, double tol) {
  if (got.n_rows != expected.n_rows || got.n_cols != expected.n_cols) {
    throw DimensionError("result is " + std::to_string(got.n_rows) + "x" + std::to_string(got.n_cols) +
                         " but the reference is " + std::to_string(expected.n_rows) + "x" +
                         std::to_string(expected.n_cols));
  }
  auto differs = [&](double g, double e) {
    if (tol == 0.0) return g != e;
    return std::abs(g - e) > tol * std::max(std::abs(e), 1.0);
  };
  for (Index i = 0; i < got.n_rows; ++i) {
    std::map<Index, std::pair<double, double>> cells;
    const auto gr = got.row(i);
    const auto er = expected.row(i);
    for (std::size_t p = 0; p < gr.size(); ++p) cells[gr.indices[p]].first += gr.values[p];
    for (std::size_t p = 0; p < er.size(); ++p) cells[er.indices[p]].second += er.values[p];
    for (const auto& [j, v] : cells) {
      if (differs(v.first, v.second)) return Divergence{i, j, v.first, v.second};
    }
  }
  return std::nullopt;
}

std::optional<double> paper_bloat(const std::string& name) {
  static const std::map<std::string, double> table = {
      {"facebook", 2872.80},        {"facebook_combined", 2872.80}, {"wiki-Vote", 148.09},
      {"Wiki-Vote", 148.09},        {"p2p-Gnutella31", 10.21},
  };
  const auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

BloatRow bloat_of(const std::string& path) {
  if (!std::filesystem::exists(path)) throw IoError("dataset not found: " + path);
  auto coo = matio::load_matrix(path, true);
  matio::assign_values(coo, matio::ValueMode::Ones, 0);
  auto a = matio::symmetrize_pattern(matio::to_csr(coo));
  if (a.n_rows != a.n_cols) throw DimensionError("bloat needs a square adjacency matrix: " + path);

  BloatRow row;
  row.name = dataset_name(path);
  row.nodes = a.n_rows;
  row.nnz = a.nnz();
  std::uint64_t diag = 0;
  for (Index i = 0; i < a.n_rows; ++i) {
    const auto r = a.row(i);
    diag += std::count(r.indices.begin(), r.indices.end(), i);
  }
  row.edges = (row.nnz - diag) / 2 + diag;
  const double cells = static_cast<double>(a.n_rows) * static_cast<double>(a.n_cols);
  row.sparsity_percent = cells > 0 ? 100.0 * (1.0 - static_cast<double>(row.nnz) / cells) : 100.0;
  const auto rep = oracle::bloat_report(oracle::symbolic_pass(a, a));
  row.pp_interim = rep.pp_interim;
  row.nnz_output = rep.nnz_output;
  row.bloat_percent = rep.bloat_percent;
  row.paper_bloat = paper_bloat(row.name);
  return row;
}

std::string bloat_csv(const std::vector<BloatRow>& rows) {
  std::ostringstream os;
  os << "dataset,nodes,edges,nnz,sparsity_percent,pp_interim,nnz_output,bloat_percent,paper_bloat_percent,"
        "deviation_percent,within_1pct\n";
  os << std::setprecision(10);
  for (const auto& r : rows) {
    os << r.name << ',' << r.nodes << ',' << r.edges << ',' << r.nnz << ',' << r.sparsity_percent << ','
       << r.pp_interim << ',' << r.nnz_output << ',' << r.bloat_percent << ',';
    if (r.paper_bloat) {
      const double dev = 100.0 * (r.bloat_percent - *r.paper_bloat) / *r.paper_bloat;
      os << *r.paper_bloat << ',' << dev << ',' << (std::abs(dev) <= 1.0 ? "yes" : "no");
    } else {
      os << ",,";
    }
    os << '\n';
  }
  return os.str();
}

std::string sweep_summary_csv(const std::vector<SweepPoint>& points) {
  std::map<std::pair<std::string, std::string>, Cycle> tile4;
  for (const auto& p : points) {
    if (p.config == "tile4" && p.status == "ok") tile4[{p.matrix, p.mapper}] = p.stats.cycles;
  }
  std::ostringstream os;
  os << std::setprecision(10);
  os << "matrix,config,mapper,status,cycles,mmh4,haccs,evictions,hashpad_peak,cpi_hacc_mean,cpi_mmh4_mean,"
        "mem_load_cv,cycles_norm_tile4,speedup_vs_tile4,error\n";
  for (const auto& p : points) {
    os << p.matrix << ',' << p.config << ',' << p.mapper << ',' << p.status << ',';
    if (p.status == "ok") {
      const auto& s = p.stats;
      uarch::CpiHistogram mmh4 = s.cpi_mmh4_full;
      mmh4.merge(s.cpi_mmh4_ragged);
      double cv = 0.0;
      if (s.haccs_applied > 0) cv = mapping::load_stats(s.mem_haccs).cv;
      os << s.cycles << ',' << s.mmh4_retired << ',' << s.haccs_applied << ',' << s.evictions << ',' << s.hashpad_peak
         << ',' << s.cpi_hacc.mean() << ',' << mmh4.mean() << ',' << cv << ',';
      const auto it = tile4.find({p.matrix, p.mapper});
      if (it != tile4.end() && s.cycles > 0 && it->second > 0) {
        os << static_cast<double>(s.cycles) / static_cast<double>(it->second) << ','
           << static_cast<double>(it->second) / static_cast<double>(s.cycles) << ',';
      } else {
        os << ",,";
      }
    } else {
      os << ",,,,,,,,,,";
    }
    std::string err = p.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << err << '\n';
  }
  return os.str();
}

bool VerifyReport::ok() const {
  return !paths.empty() && std::all_of(paths.begin(), paths.end(), [](const PathResult& p) { return p.pass; });
}

VerifyReport verify_paths(const matio::CsrMatrix& a, const matio::CsrMatrix& b, const VerifyOptions& opt) {
  VerifyReport report;
  if (a.n_cols != b.n_rows) {
    throw DimensionError("A is " + std::to_string(a.n_rows) + "x" + std::to_string(a.n_cols) + " but B is " +
                         std::to_string(b.n_rows) + "x" + std::to_string(b.n_cols));
  }
  const bool small = std::uint64_t{a.n_rows} * b.n_cols <= (1u << 24);
  const matio::CsrMatrix reference =
      small ? matio::dense_to_csr(oracle::spgemm_dense_oracle(matio::to_dense(a), matio::to_dense(b)))
            : oracle::spgemm_gustavson(a, b);
  const std::string ref_name = small ? "dense oracle" : "Gustavson";

  auto check = [&](const std::string& name, auto&& produce) {
    PathResult r;
    r.path = name;
    try {
      const matio::CsrMatrix got = produce();
      r.divergence = first_divergence(got, reference, opt.tolerance);
      r.pass = !r.divergence;
      if (r.divergence) {
        std::ostringstream os;
        os << std::setprecision(17) << "first divergence at (" << r.divergence->row << ", " << r.divergence->col
           << "): got " << r.divergence->got << ", " << ref_name << " has " << r.divergence->expected;
        r.detail = os.str();
      } else {
        r.detail = "matches the " + ref_name;
      }
    } catch (const Error& e) {
      r.pass = false;
      r.detail = e.what();
    }
    report.paths.push_back(std::move(r));
  };

  const auto program = engine::prepare_spgemm(a, b, opt.chip, opt.sim);
  check("replay", [&] { return isa::replay(program).c; });
  if (opt.trace_path) {
    check("trace", [&] {
      std::ifstream in(*opt.trace_path, std::ios::binary);
      if (!in) throw IoError("cannot open trace " + *opt.trace_path);
      char magic[8] = {};
      in.read(magic, 8);
      in.clear();
      in.seekg(0);
      isa::Program traced = program;
      if (std::string(magic, 8) == "NEURABIN") {
        isa::read_binary_trace(in, traced);
      } else {
        isa::read_trace(in, traced);
      }
      return isa::replay(traced).c;
    });
  }

  for (const auto v : {smash::SmashVersion::Base, smash::SmashVersion::V1, smash::SmashVersion::V2,
                       smash::SmashVersion::V3}) {
    check("smash-" + smash::to_string(v), [&] {
      smash::SmashConfig cfg;
      cfg.version = v;
      return smash::smash_spgemm(a, b, cfg);
    });
  }
  check("smash-map-csr", [&] {
    // Replicate the heaviest rows so the ODD token halves read replicas.
    std::vector<Index> heavy;
    const double mean = a.n_rows ? static_cast<double>(a.nnz()) / a.n_rows : 0.0;
    for (Index r = 0; r < a.n_rows; ++r) {
      if (static_cast<double>(a.row_offsets[r + 1] - a.row_offsets[r]) > 2.0 * mean) heavy.push_back(r);
    }
    const auto m = matio::build_map_csr(a, 16, heavy);
    smash::SmashConfig cfg;
    cfg.version = smash::SmashVersion::V2;
    return smash::smash_spgemm(m, b, cfg);
  });
  if (opt.run_simulation) {
    check("simulation-" + opt.chip.name, [&] {
      engine::SimRun run(opt.chip, program, opt.mapper, opt.sim);
      return run.run_to_completion().c;
    });
  }
  return report;
}

GcnSpec cora_spec(std::uint64_t seed) {
  GcnSpec s;
  s.nodes = 2708;
  s.avg_degree = 3.9;  // 5278 undirected edges
  s.features = 1433;
  s.hidden = 16;
  s.feature_density = 0.0127;
  s.seed = seed;
  return s;
}

namespace {

matio::CsrMatrix random_graph(Index n, double avg_degree, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  matio::CooMatrix coo;
  coo.n_rows = coo.n_cols = n;
  const auto edges = static_cast<std::uint64_t>(std::llround(avg_degree * n / 2.0));
  for (std::uint64_t e = 0; e < edges && n > 1; ++e) {
    const auto u = static_cast<Index>(rng() % n);
    const auto v = static_cast<Index>(rng() % n);
    if (u == v) continue;
    coo.entries.push_back({u, v, 1.0});
  }
  coo.normalize();
  return matio::symmetrize_pattern(matio::to_csr(coo));
}

/// D^-1/2 (A + I) D^-1/2; with integer values the self-looped pattern only.
matio::CsrMatrix gcn_adjacency(const matio::CsrMatrix& pattern, bool integer_mode) {
  matio::CooMatrix coo = matio::to_coo(pattern);
  for (auto& e : coo.entries) e.value = 1.0;
  for (Index i = 0; i < pattern.n_rows; ++i) coo.entries.push_back({i, i, 1.0});
  coo.normalize();
  for (auto& e : coo.entries) e.value = 1.0;
  auto a = matio::to_csr(coo);
  if (integer_mode) return a;
  std::vector<double> scale(a.n_rows);
  for (Index i = 0; i < a.n_rows; ++i) scale[i] = 1.0 / std::sqrt(static_cast<double>(a.row_offsets[i + 1] - a.row_offsets[i]));
  for (Index i = 0; i < a.n_rows; ++i) {
    for (auto p = a.row_offsets[i]; p < a.row_offsets[i + 1]; ++p) a.values[p] = scale[i] * scale[a.col_indices[p]];
  }
  return a;
}

}  // namespace

GcnOutcome run_gcn(const GcnSpec& spec, const uarch::ChipConfig& chip, const mapping::MapperConfig& mapper,
                   const engine::SimOptions& sim) {
  if (spec.features == 0 || spec.hidden == 0) throw ConfigError("gcn: features and hidden width must be positive");
  if (!(spec.feature_density > 0 && spec.feature_density <= 1)) throw ConfigError("gcn: feature density must be in (0, 1]");
  matio::CsrMatrix pattern;
  if (spec.graph_path) {
    if (!std::filesystem::exists(*spec.graph_path)) throw IoError("graph file not found: " + *spec.graph_path);
    auto coo = matio::load_matrix(*spec.graph_path, true);
    pattern = matio::symmetrize_pattern(matio::to_csr(coo));
  } else {
    pattern = random_graph(spec.nodes, spec.avg_degree, spec.seed);
  }
  const auto adj = gcn_adjacency(pattern, spec.integer_mode);
  const Index n = adj.n_rows;

  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  matio::DenseMatrix x(n, spec.features);
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t f = 0; f < spec.features; ++f) {
      if (unit(rng) < spec.feature_density) {
        x(i, f) = spec.integer_mode ? static_cast<double>(1 + rng() % 8) : 0.5 + unit(rng);
        any = true;
      }
    }
    if (!any) x(i, rng() % spec.features) = 1.0;
  }
  matio::DenseMatrix w(spec.features, spec.hidden);
  for (std::size_t f = 0; f < spec.features; ++f) {
    for (std::size_t h = 0; h < spec.hidden; ++h) {
      w(f, h) = spec.integer_mode ? static_cast<double>(static_cast<int>(rng() % 9) - 4) : 2.0 * unit(rng) - 1.0;
    }
  }

  GcnOutcome out;
  out.workload = oracle::gcn_layer_workload(adj, x, w);
  out.sim = engine::simulate_spgemm(out.workload.adjacency, out.workload.features, chip, mapper, sim);
  out.output = oracle::gcn_combine(out.sim.c, out.workload.weight);
  out.max_relative_error = oracle::max_relative_error(out.output, out.workload.reference);
  return out;
}

}  // namespace neura::cli
