#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "neura/matio.hpp"

namespace neura::oracle {

using matio::CscMatrix;
using matio::CsrMatrix;
using matio::DenseMatrix;

/// Output of the Gustavson first pass. `contrib_counter` is stored with the
/// sparsity pattern of C: row i owns entries [counter_offsets[i],
/// counter_offsets[i+1]) of `counter_cols` / `counter_counts`, columns sorted.
struct SymbolicPlan {
  Index n_rows = 0;
  Index n_cols = 0;
  std::vector<std::uint64_t> fma_per_row;
  std::vector<std::uint64_t> out_nnz_per_row;
  std::vector<Offset> counter_offsets{0};
  std::vector<Index> counter_cols;
  std::vector<std::uint32_t> counter_counts;
  std::uint64_t total_fma = 0;
  std::uint64_t total_out_nnz = 0;

  /// Number of k with A[i,k] != 0 and B[k,j] != 0; zero when (i,j) is not in C.
  std::uint32_t contributions(Index i, Index j) const;
  /// Position of (i,j) within the C pattern, if present.
  std::optional<Offset> position(Index i, Index j) const;
};

struct BloatReport {
  std::uint64_t pp_interim = 0;
  std::uint64_t nnz_output = 0;
  double bloat_percent = 0.0;
};

enum class RowClass { Dense, Sparse };

struct Window {
  std::vector<Index> rows;
  std::vector<RowClass> classification;
  std::vector<std::uint64_t> hash_capacity;

  std::uint64_t total_capacity() const;
};

struct WindowParams {
  double cf = 4.0;
  double ef = 1.5;
  /// Classification threshold; unset means spad_budget / 64.
  std::optional<double> threshold;
  std::uint64_t spad_budget = 4096;
};

struct WindowPlan {
  std::vector<Window> windows;
  double cf = 0;
  double ef = 0;
  double threshold = 0;
  std::uint64_t spad_budget = 0;

  /// row -> index into `windows`.
  std::vector<std::uint32_t> window_of_row(Index n_rows) const;
};

// --- Reference kernels ----------------------------------------------------

/// Textbook triple loop; accumulates in increasing k.
DenseMatrix spgemm_dense_oracle(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix gemm(const DenseMatrix& a, const DenseMatrix& b);

/// Row-wise product. Output columns sorted; every (i,j) that receives at
/// least one partial product is a structural nonzero, even if it sums to 0.
CsrMatrix spgemm_gustavson(const CsrMatrix& a, const CsrMatrix& b);

SymbolicPlan symbolic_pass(const CsrMatrix& a, const CsrMatrix& b);

BloatReport bloat_report(const SymbolicPlan& plan);

/// Smallest prime >= n (n <= 1 yields 2).
std::uint64_t next_prime(std::uint64_t n);
/// Largest prime <= n, or 0 when n < 2.
std::uint64_t prev_prime(std::uint64_t n);
bool is_prime(std::uint64_t n);

/// Classifies and packs output rows into scratchpad windows. `placement` is
/// the row order considered by the packer (empty = ascending).
WindowPlan plan_windows(const SymbolicPlan& plan, const WindowParams& params,
                        std::span<const Index> placement = {});

// --- GCN layer ------------------------------------------------------------

struct GcnWorkload {
  CsrMatrix adjacency;       // aggregation left operand
  CsrMatrix features;        // aggregation right operand (X as CSR)
  DenseMatrix weight;        // combination right operand
  DenseMatrix reference;     // relu(A (X W)), computed densely
};

GcnWorkload gcn_layer_workload(const CsrMatrix& adj, const DenseMatrix& x, const DenseMatrix& w);

/// relu(aggregated * W) where `aggregated` is the result of the SpGEMM job.
DenseMatrix gcn_combine(const CsrMatrix& aggregated, const DenseMatrix& w);

/// max |x - y| / max(|y|, floor) over all elements.
double max_relative_error(const DenseMatrix& x, const DenseMatrix& reference, double floor = 1e-300);

}  // namespace neura::oracle
