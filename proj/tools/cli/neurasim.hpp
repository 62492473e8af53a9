#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "neura/engine.hpp"
#include "neura/mapping.hpp"
#include "neura/oracle.hpp"
#include "neura/matio.hpp"
#include "neura/smash.hpp"
#include "neura/uarch.hpp"

namespace neura::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kUsage = 2, kIo = 3 };

/// Entry point shared by the neurasim binary and the tests.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// --- Building blocks ---------------------------------------------------------

/// "scale:ef[:a:b:c:d]".
matio::RmatParams parse_rmat(const std::string& text, std::uint64_t seed);

struct Operand {
  std::string label;
  matio::CsrMatrix matrix;
};

/// Exactly one of `path` / `rmat` must be set. integer_mode overwrites the
/// values with small integers; RMAT operands otherwise get real values.
Operand load_operand(const std::optional<std::string>& path, const std::optional<std::string>& rmat,
                     std::uint64_t seed, bool integer_mode);

/// tile4, tile16, tile64, tile16-gnn or file:PATH.
uarch::ChipConfig resolve_config(const std::string& spec);

/// "row" or an interval in mapped items.
void apply_reseed(mapping::MapperConfig& cfg, const std::string& reseed);

struct Divergence {
  Index row = 0;
  Index col = 0;
  double got = 0.0;
  double expected = 0.0;
};

/// First (row-major) position where |got - expected| > tol * max(|expected|, 1);
/// tol = 0 demands bitwise-equal values. Absent entries read as zero.
std::optional<Divergence> first_divergence(const matio::CsrMatrix& got, const matio::CsrMatrix& expected,
                                           double tol);

struct BloatRow {
  std::string name;
  Index nodes = 0;
  std::uint64_t edges = 0;
  std::uint64_t nnz = 0;
  double sparsity_percent = 0.0;
  std::uint64_t pp_interim = 0;
  std::uint64_t nnz_output = 0;
  double bloat_percent = 0.0;
  std::optional<double> paper_bloat;
};

/// C = A * A on the symmetrized pattern of the dataset at `path`.
BloatRow bloat_of(const std::string& path);
/// Published bloat percent for a dataset name, if the paper lists it.
std::optional<double> paper_bloat(const std::string& name);
std::string bloat_csv(const std::vector<BloatRow>& rows);

struct SweepPoint {
  std::string matrix;
  std::string config;
  std::string mapper;
  std::string status = "ok";
  std::string error;
  engine::SimStats stats;
};

/// summary.csv with Tile-4 normalized columns.
std::string sweep_summary_csv(const std::vector<SweepPoint>& points);


struct VerifyOptions {
  uarch::ChipConfig chip = uarch::named_config("tile4");
  mapping::MapperConfig mapper;
  engine::SimOptions sim;
  /// 0 = bitwise; otherwise relative tolerance.
  double tolerance = 0.0;
  bool run_simulation = true;
  /// Replay this trace (text or binary) against the lowered memory image.
  std::optional<std::string> trace_path;
};

struct PathResult {
  std::string path;
  bool pass = false;
  std::string detail;
  std::optional<Divergence> divergence;
};

struct VerifyReport {
  std::vector<PathResult> paths;
  bool ok() const;
};

/// Functional replay, SMASH base/v1/v2/v3, MAP-CSR SMASH and the cycle
/// simulation, each diffed against the dense oracle (Gustavson above 16M
/// output cells).
VerifyReport verify_paths(const matio::CsrMatrix& a, const matio::CsrMatrix& b, const VerifyOptions& opt);

struct GcnSpec {
  Index nodes = 256;
  double avg_degree = 4.0;
  Index features = 64;
  Index hidden = 16;
  double feature_density = 0.05;
  bool integer_mode = false;
  std::uint64_t seed = 1;
  /// Adjacency from a file instead of a random graph.
  std::optional<std::string> graph_path;
};

/// Cora-shaped preset: 2708 nodes, 1433 sparse binary-pattern features, h = 16.
GcnSpec cora_spec(std::uint64_t seed);

struct GcnOutcome {
  oracle::GcnWorkload workload;
  engine::SimResult sim;
  matio::DenseMatrix output;
  double max_relative_error = 0.0;
};

/// Aggregation on the simulator, combination on the dense functional path.
GcnOutcome run_gcn(const GcnSpec& spec, const uarch::ChipConfig& chip, const mapping::MapperConfig& mapper,
                   const engine::SimOptions& sim = {});

}  // namespace neura::cli
