#include <algorithm>
#include <cmath>

#include "neura/oracle.hpp"

namespace neura::oracle {

namespace {

void require_chain(std::size_t inner_a, std::size_t rows_b, const char* what) {
  if (inner_a != rows_b) {
    throw DimensionError(std::string(what) + ": inner dimensions differ (" + std::to_string(inner_a) + " vs " +
                         std::to_string(rows_b) + ")");
  }
}

}  // namespace

DenseMatrix spgemm_dense_oracle(const DenseMatrix& a, const DenseMatrix& b) {
  require_chain(a.cols(), b.rows(), "spgemm_dense_oracle");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) sum += a(i, k) * b(k, j);
      c(i, j) = sum;
    }
  }
  return c;
}

DenseMatrix gemm(const DenseMatrix& a, const DenseMatrix& b) {
  require_chain(a.cols(), b.rows(), "gemm");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

CsrMatrix spgemm_gustavson(const CsrMatrix& a, const CsrMatrix& b) {
  require_chain(a.n_cols, b.n_rows, "spgemm_gustavson");
  CsrMatrix c;
  c.n_rows = a.n_rows;
  c.n_cols = b.n_cols;
  c.row_offsets.assign(static_cast<std::size_t>(a.n_rows) + 1, 0);

  std::vector<double> acc(b.n_cols, 0.0);
  std::vector<std::uint8_t> touched(b.n_cols, 0);
  std::vector<Index> cols;
  for (Index i = 0; i < a.n_rows; ++i) {
    cols.clear();
    const auto arow = a.row(i);
    for (std::size_t p = 0; p < arow.size(); ++p) {
      const auto brow = b.row(arow.indices[p]);
      const double av = arow.values[p];
      for (std::size_t q = 0; q < brow.size(); ++q) {
        const Index j = brow.indices[q];
        if (!touched[j]) {
          touched[j] = 1;
          cols.push_back(j);
        }
        acc[j] += av * brow.values[q];
      }
    }
    std::sort(cols.begin(), cols.end());
    for (const Index j : cols) {
      c.col_indices.push_back(j);
      c.values.push_back(acc[j]);
      acc[j] = 0.0;
      touched[j] = 0;
    }
    c.row_offsets[i + 1] = c.col_indices.size();
  }
  return c;
}

SymbolicPlan symbolic_pass(const CsrMatrix& a, const CsrMatrix& b) {
  require_chain(a.n_cols, b.n_rows, "symbolic_pass");
  SymbolicPlan plan;
  plan.n_rows = a.n_rows;
  plan.n_cols = b.n_cols;
  plan.fma_per_row.assign(a.n_rows, 0);
  plan.out_nnz_per_row.assign(a.n_rows, 0);
  plan.counter_offsets.assign(static_cast<std::size_t>(a.n_rows) + 1, 0);

  std::vector<std::uint32_t> count(b.n_cols, 0);
  std::vector<Index> cols;
  for (Index i = 0; i < a.n_rows; ++i) {
    cols.clear();
    std::uint64_t fma = 0;
    for (const Index k : a.row(i).indices) {
      const auto brow = b.row(k);
      fma += brow.size();
      for (const Index j : brow.indices) {
        if (count[j]++ == 0) cols.push_back(j);
      }
    }
    std::sort(cols.begin(), cols.end());
    for (const Index j : cols) {
      plan.counter_cols.push_back(j);
      plan.counter_counts.push_back(count[j]);
      count[j] = 0;
    }
    plan.fma_per_row[i] = fma;
    plan.out_nnz_per_row[i] = cols.size();
    plan.total_fma += fma;
    plan.total_out_nnz += cols.size();
    plan.counter_offsets[i + 1] = plan.counter_cols.size();
  }
  return plan;
}

std::optional<Offset> SymbolicPlan::position(Index i, Index j) const {
  if (i >= n_rows) return std::nullopt;
  const auto first = counter_cols.begin() + static_cast<std::ptrdiff_t>(counter_offsets[i]);
  const auto last = counter_cols.begin() + static_cast<std::ptrdiff_t>(counter_offsets[i + 1]);
  const auto it = std::lower_bound(first, last, j);
  if (it == last || *it != j) return std::nullopt;
  return static_cast<Offset>(it - counter_cols.begin());
}

std::uint32_t SymbolicPlan::contributions(Index i, Index j) const {
  const auto pos = position(i, j);
  return pos ? counter_counts[*pos] : 0;
}

BloatReport bloat_report(const SymbolicPlan& plan) {
  if (plan.total_out_nnz == 0) throw UndefinedMetricError("bloat undefined: output has no nonzeros");
  BloatReport r;
  r.pp_interim = plan.total_fma;
  r.nnz_output = plan.total_out_nnz;
  r.bloat_percent = static_cast<double>(r.pp_interim - r.nnz_output) / static_cast<double>(r.nnz_output) * 100.0;
  return r;
}

double max_relative_error(const DenseMatrix& x, const DenseMatrix& reference, double floor) {
  if (x.rows() != reference.rows() || x.cols() != reference.cols()) {
    throw DimensionError("max_relative_error: shape mismatch");
  }
  double worst = 0.0;
  const auto xs = x.data();
  const auto ys = reference.data();
  for (std::size_t p = 0; p < xs.size(); ++p) {
    const double diff = std::abs(xs[p] - ys[p]);
    if (diff == 0.0) continue;
    worst = std::max(worst, diff / std::max(std::abs(ys[p]), floor));
  }
  return worst;
}

}  // namespace neura::oracle
