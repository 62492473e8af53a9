#include <algorithm>
#include <numeric>

#include "neura/matio.hpp"

namespace neura::matio {

std::size_t MapCsrMatrix::nnz() const noexcept {
  return std::accumulate(elems_per_row.begin(), elems_per_row.end(), std::size_t{0});
}

MapCsrMatrix build_map_csr(const CsrMatrix& m, std::size_t bank_width, std::span<const Index> replicate_rows,
                           std::span<const Index> placement) {
  if (bank_width == 0) throw ConfigError("bank_width must be >= 1");

  std::vector<std::uint8_t> wants_replica(m.n_rows, 0);
  for (const Index r : replicate_rows) {
    if (r >= m.n_rows) throw ConfigError("replicated row " + std::to_string(r) + " out of range");
    wants_replica[r] = 1;
  }

  std::vector<Index> order;
  if (placement.empty()) {
    order.resize(m.n_rows);
    std::iota(order.begin(), order.end(), Index{0});
    for (Index r = 0; r < m.n_rows; ++r) {
      if (wants_replica[r]) order.push_back(r);
    }
  } else {
    order.assign(placement.begin(), placement.end());
    std::vector<std::uint32_t> seen(m.n_rows, 0);
    for (const Index r : order) {
      if (r >= m.n_rows) throw ConfigError("placement names row " + std::to_string(r) + " out of range");
      ++seen[r];
    }
    for (Index r = 0; r < m.n_rows; ++r) {
      const std::uint32_t expected = wants_replica[r] ? 2 : 1;
      if (seen[r] != expected) {
        throw ConfigError("placement is not a permutation with replicas: row " + std::to_string(r) + " appears " +
                          std::to_string(seen[r]) + " times, expected " + std::to_string(expected));
      }
    }
  }

  MapCsrMatrix out;
  out.n_rows = m.n_rows;
  out.n_cols = m.n_cols;
  out.bank_width = bank_width;
  out.elems_per_row.resize(m.n_rows);
  out.row_offsets.assign(m.n_rows, MapCsrMatrix::kNoReplica);
  out.replica_offsets.assign(m.n_rows, MapCsrMatrix::kNoReplica);
  for (Index r = 0; r < m.n_rows; ++r) out.elems_per_row[r] = static_cast<Index>(m.row_length(r));

  std::size_t total = 0;
  for (const Index r : order) {
    const std::size_t pad = (bank_width - total % bank_width) % bank_width;
    total += pad + m.row_length(r);
  }
  out.col_indices.reserve(total);
  out.values.reserve(total);

  for (const Index r : order) {
    while (out.col_indices.size() % bank_width != 0) {
      out.col_indices.push_back(MapCsrMatrix::kPadIndex);
      out.values.push_back(0.0);
      ++out.pad_count;
    }
    const Offset start = out.col_indices.size();
    if (out.row_offsets[r] == MapCsrMatrix::kNoReplica) {
      out.row_offsets[r] = start;
    } else {
      out.replica_offsets[r] = start;
      out.replica_nnz += m.row_length(r);
    }
    const auto row = m.row(r);
    out.col_indices.insert(out.col_indices.end(), row.indices.begin(), row.indices.end());
    out.values.insert(out.values.end(), row.values.begin(), row.values.end());
  }
  return out;
}

double replication_ratio(const MapCsrMatrix& m) {
  const auto nnz = m.nnz();
  if (nnz == 0) throw UndefinedMetricError("replication ratio undefined for a matrix with nnz = 0");
  return static_cast<double>(nnz + m.replica_nnz + m.pad_count) / static_cast<double>(nnz);
}

CsrMatrix to_csr(const MapCsrMatrix& m) {
  CsrMatrix out;
  out.n_rows = m.n_rows;
  out.n_cols = m.n_cols;
  out.row_offsets.assign(static_cast<std::size_t>(m.n_rows) + 1, 0);
  for (Index r = 0; r < m.n_rows; ++r) out.row_offsets[r + 1] = out.row_offsets[r] + m.elems_per_row[r];
  out.col_indices.reserve(out.row_offsets.back());
  out.values.reserve(out.row_offsets.back());
  for (Index r = 0; r < m.n_rows; ++r) {
    const auto row = m.row(r);
    out.col_indices.insert(out.col_indices.end(), row.indices.begin(), row.indices.end());
    out.values.insert(out.values.end(), row.values.begin(), row.values.end());
  }
  return out;
}

}  // namespace neura::matio
