#include <algorithm>

#include "neura/oracle.hpp"

namespace neura::oracle {

namespace {

void relu_inplace(DenseMatrix& m) {
  for (auto& v : m.data()) v = std::max(v, 0.0);
}

}  // namespace

GcnWorkload gcn_layer_workload(const CsrMatrix& adj, const DenseMatrix& x, const DenseMatrix& w) {
  if (adj.n_cols != x.rows()) throw DimensionError("gcn: adjacency columns must equal feature rows");
  if (x.cols() != w.rows()) throw DimensionError("gcn: feature width must equal weight rows");

  GcnWorkload job;
  job.adjacency = adj;
  job.features = matio::dense_to_csr(x);
  job.weight = w;

  // Reference uses the other association, A (X W), so it shares no
  // intermediate with the (A X) W chain it checks.
  const auto xw = gemm(x, w);
  job.reference = DenseMatrix(adj.n_rows, w.cols());
  for (Index i = 0; i < adj.n_rows; ++i) {
    const auto row = adj.row(i);
    for (std::size_t p = 0; p < row.size(); ++p) {
      const double a = row.values[p];
      for (std::size_t h = 0; h < w.cols(); ++h) job.reference(i, h) += a * xw(row.indices[p], h);
    }
  }
  relu_inplace(job.reference);
  return job;
}

DenseMatrix gcn_combine(const CsrMatrix& aggregated, const DenseMatrix& w) {
  if (aggregated.n_cols != w.rows()) throw DimensionError("gcn: aggregated width must equal weight rows");
  DenseMatrix out(aggregated.n_rows, w.cols());
  for (Index i = 0; i < aggregated.n_rows; ++i) {
    const auto row = aggregated.row(i);
    for (std::size_t p = 0; p < row.size(); ++p) {
      const double v = row.values[p];
      for (std::size_t h = 0; h < w.cols(); ++h) out(i, h) += v * w(row.indices[p], h);
    }
  }
  relu_inplace(out);
  return out;
}

}  // namespace neura::oracle
