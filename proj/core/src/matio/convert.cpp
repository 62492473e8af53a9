#include <algorithm>
#include <numeric>

#include "neura/matio.hpp"

namespace neura::matio {

void CooMatrix::normalize() {
  for (const auto& e : entries) {
    if (e.row >= n_rows || e.col >= n_cols) {
      throw DimensionError("COO entry (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                           ") outside " + std::to_string(n_rows) + "x" + std::to_string(n_cols));
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const CooEntry& x, const CooEntry& y) {
    return x.row != y.row ? x.row < y.row : x.col < y.col;
  });
  std::size_t out = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (out > 0 && entries[out - 1].row == entries[i].row && entries[out - 1].col == entries[i].col) {
      entries[out - 1].value += entries[i].value;
    } else {
      entries[out++] = entries[i];
    }
  }
  entries.resize(out);
}

bool CooMatrix::is_normalized() const {
  for (std::size_t i = 1; i < entries.size(); ++i) {
    const auto& p = entries[i - 1];
    const auto& q = entries[i];
    if (p.row > q.row || (p.row == q.row && p.col >= q.col)) return false;
  }
  return true;
}

namespace {

void validate_compressed(std::size_t outer, std::size_t inner, const std::vector<Offset>& offsets,
                         const std::vector<Index>& idx, std::size_t n_values, const char* kind) {
  const std::string k(kind);
  if (offsets.size() != outer + 1) throw DimensionError(k + ": offsets length mismatch");
  if (offsets.front() != 0) throw DimensionError(k + ": offsets must start at 0");
  if (offsets.back() != idx.size() || idx.size() != n_values) throw DimensionError(k + ": terminal offset != nnz");
  for (std::size_t o = 0; o < outer; ++o) {
    if (offsets[o] > offsets[o + 1]) throw DimensionError(k + ": offsets not monotone");
    for (auto p = offsets[o]; p < offsets[o + 1]; ++p) {
      if (idx[p] >= inner) throw DimensionError(k + ": index out of range");
      if (p > offsets[o] && idx[p - 1] >= idx[p]) throw DimensionError(k + ": indices not strictly increasing");
    }
  }
}

}  // namespace

void CsrMatrix::validate() const {
  validate_compressed(n_rows, n_cols, row_offsets, col_indices, values.size(), "CSR");
}

void CscMatrix::validate() const {
  validate_compressed(n_cols, n_rows, col_offsets, row_indices, values.size(), "CSC");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

CsrMatrix to_csr(const CooMatrix& m) {
  CsrMatrix out;
  out.n_rows = m.n_rows;
  out.n_cols = m.n_cols;
  out.row_offsets.assign(static_cast<std::size_t>(m.n_rows) + 1, 0);
  for (const auto& e : m.entries) ++out.row_offsets[e.row + 1];
  std::partial_sum(out.row_offsets.begin(), out.row_offsets.end(), out.row_offsets.begin());
  out.col_indices.resize(m.entries.size());
  out.values.resize(m.entries.size());
  std::vector<Offset> cursor(out.row_offsets.begin(), out.row_offsets.end() - 1);
  for (const auto& e : m.entries) {
    const auto p = cursor[e.row]++;
    out.col_indices[p] = e.col;
    out.values[p] = e.value;
  }
  return out;
}

CscMatrix to_csc(const CooMatrix& m) {
  CscMatrix out;
  out.n_rows = m.n_rows;
  out.n_cols = m.n_cols;
  out.col_offsets.assign(static_cast<std::size_t>(m.n_cols) + 1, 0);
  for (const auto& e : m.entries) ++out.col_offsets[e.col + 1];
  std::partial_sum(out.col_offsets.begin(), out.col_offsets.end(), out.col_offsets.begin());
  out.row_indices.resize(m.entries.size());
  out.values.resize(m.entries.size());
  std::vector<Offset> cursor(out.col_offsets.begin(), out.col_offsets.end() - 1);
  // Row-major input order keeps rows increasing within each column.
  for (const auto& e : m.entries) {
    const auto p = cursor[e.col]++;
    out.row_indices[p] = e.row;
    out.values[p] = e.value;
  }
  return out;
}

DenseMatrix to_dense(const CooMatrix& m) {
  DenseMatrix d(m.n_rows, m.n_cols);
  for (const auto& e : m.entries) d(e.row, e.col) += e.value;
  return d;
}

CooMatrix to_coo(const CsrMatrix& m) {
  CooMatrix out;
  out.n_rows = m.n_rows;
  out.n_cols = m.n_cols;
  out.entries.reserve(m.nnz());
  for (Index r = 0; r < m.n_rows; ++r) {
    for (auto p = m.row_offsets[r]; p < m.row_offsets[r + 1]; ++p) {
      out.entries.push_back({r, m.col_indices[p], m.values[p]});
    }
  }
  return out;
}

CooMatrix to_coo(const CscMatrix& m) {
  CooMatrix out;
  out.n_rows = m.n_rows;
  out.n_cols = m.n_cols;
  out.entries.reserve(m.nnz());
  for (Index c = 0; c < m.n_cols; ++c) {
    for (auto p = m.col_offsets[c]; p < m.col_offsets[c + 1]; ++p) {
      out.entries.push_back({m.row_indices[p], c, m.values[p]});
    }
  }
  out.normalize();
  return out;
}

DenseMatrix to_dense(const CsrMatrix& m) { return to_dense(to_coo(m)); }
DenseMatrix to_dense(const CscMatrix& m) { return to_dense(to_coo(m)); }

CscMatrix csr_to_csc(const CsrMatrix& m) { return to_csc(to_coo(m)); }

CsrMatrix dense_to_csr(const DenseMatrix& m, bool keep_zeros) {
  CsrMatrix out;
  out.n_rows = static_cast<Index>(m.rows());
  out.n_cols = static_cast<Index>(m.cols());
  out.row_offsets.assign(m.rows() + 1, 0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (keep_zeros || v != 0.0) {
        out.col_indices.push_back(static_cast<Index>(c));
        out.values.push_back(v);
      }
    }
    out.row_offsets[r + 1] = out.col_indices.size();
  }
  return out;
}

CsrMatrix transpose(const CsrMatrix& m) {
  const auto csc = csr_to_csc(m);
  CsrMatrix t;
  t.n_rows = m.n_cols;
  t.n_cols = m.n_rows;
  t.row_offsets = csc.col_offsets;
  t.col_indices = csc.row_indices;
  t.values = csc.values;
  return t;
}

CsrMatrix symmetrize_pattern(const CsrMatrix& m) {
  if (m.n_rows != m.n_cols) throw DimensionError("symmetrize_pattern needs a square matrix");
  CooMatrix coo;
  coo.n_rows = coo.n_cols = m.n_rows;
  coo.entries.reserve(2 * m.nnz());
  for (Index r = 0; r < m.n_rows; ++r) {
    for (auto p = m.row_offsets[r]; p < m.row_offsets[r + 1]; ++p) {
      coo.entries.push_back({r, m.col_indices[p], 1.0});
      coo.entries.push_back({m.col_indices[p], r, 1.0});
    }
  }
  coo.normalize();
  for (auto& e : coo.entries) e.value = 1.0;
  return to_csr(coo);
}

}  // namespace neura::matio
