#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "neura/common.hpp"

namespace neura::matio {

struct CooEntry {
  Index row = 0;
  Index col = 0;
  double value = 0.0;

  friend bool operator==(const CooEntry&, const CooEntry&) = default;
};

/// Coordinate-list matrix. `normalize()` sorts row-major and sums duplicates;
/// every conversion below expects a normalized matrix.
struct CooMatrix {
  Index n_rows = 0;
  Index n_cols = 0;
  std::vector<CooEntry> entries;

  std::size_t nnz() const noexcept { return entries.size(); }
  void normalize();
  bool is_normalized() const;
};

/// Read-only view of one compressed row (or column).
struct SparseVectorView {
  std::span<const Index> indices;
  std::span<const double> values;

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
};

struct CsrMatrix {
  Index n_rows = 0;
  Index n_cols = 0;
  std::vector<Offset> row_offsets{0};
  std::vector<Index> col_indices;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return col_indices.size(); }
  std::size_t row_length(Index r) const noexcept {
    return static_cast<std::size_t>(row_offsets[r + 1] - row_offsets[r]);
  }
  SparseVectorView row(Index r) const noexcept {
    const auto begin = static_cast<std::size_t>(row_offsets[r]);
    const auto len = row_length(r);
    return {std::span<const Index>(col_indices).subspan(begin, len),
            std::span<const double>(values).subspan(begin, len)};
  }
  /// Checks offsets, bounds and strictly increasing columns per row.
  void validate() const;

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

struct CscMatrix {
  Index n_rows = 0;
  Index n_cols = 0;
  std::vector<Offset> col_offsets{0};
  std::vector<Index> row_indices;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return row_indices.size(); }
  std::size_t col_length(Index c) const noexcept {
    return static_cast<std::size_t>(col_offsets[c + 1] - col_offsets[c]);
  }
  SparseVectorView col(Index c) const noexcept {
    const auto begin = static_cast<std::size_t>(col_offsets[c]);
    const auto len = col_length(c);
    return {std::span<const Index>(row_indices).subspan(begin, len),
            std::span<const double>(values).subspan(begin, len)};
  }
  void validate() const;

  friend bool operator==(const CscMatrix&, const CscMatrix&) = default;
};

/// Row-major dense matrix, used by the oracles and the GCN combination step.
class DenseMatrix {
public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Memory-aligned parallel CSR. Rows live anywhere in the backing arrays,
/// each row start is aligned to `bank_width` elements (zero padding fills the
/// gaps) and selected rows carry a second, identical replica copy.
struct MapCsrMatrix {
  static constexpr Offset kNoReplica = std::numeric_limits<Offset>::max();
  static constexpr Index kPadIndex = std::numeric_limits<Index>::max();

  Index n_rows = 0;
  Index n_cols = 0;
  std::vector<Index> elems_per_row;
  std::vector<Offset> row_offsets;
  std::vector<Offset> replica_offsets;
  std::vector<Index> col_indices;
  std::vector<double> values;
  std::size_t pad_count = 0;
  std::size_t replica_nnz = 0;
  std::size_t bank_width = 16;

  std::size_t nnz() const noexcept;
  bool has_replica(Index r) const noexcept { return replica_offsets[r] != kNoReplica; }
  SparseVectorView row(Index r) const noexcept { return view_at(row_offsets[r], elems_per_row[r]); }
  /// The replica copy when one exists, otherwise the primary copy.
  SparseVectorView replica_row(Index r) const noexcept {
    return view_at(has_replica(r) ? replica_offsets[r] : row_offsets[r], elems_per_row[r]);
  }

private:
  SparseVectorView view_at(Offset begin, Index len) const noexcept {
    const auto b = static_cast<std::size_t>(begin);
    return {std::span<const Index>(col_indices).subspan(b, len),
            std::span<const double>(values).subspan(b, len)};
  }
};

struct RmatParams {
  unsigned scale = 8;
  unsigned edge_factor = 8;
  double a = 0.57;
  double b = 0.19;
  double c = 0.19;
  double d = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

// --- Matrix Market -------------------------------------------------------

CooMatrix parse_matrix_market(std::istream& in);
CooMatrix parse_matrix_market(const std::string& text);
CooMatrix read_matrix_market(const std::string& path);
/// Writes a `coordinate real general` file with shortest round-trip decimals.
void write_matrix_market(std::ostream& out, const CooMatrix& m);
void write_matrix_market(const std::string& path, const CooMatrix& m);

/// Reads a whitespace-separated edge list ("src dst" per line, '#' comments).
/// Node ids are used as given (0-based); the matrix is n x n with
/// n = max id + 1. Every edge gets value 1.
CooMatrix read_edge_list(std::istream& in, bool symmetrize);
CooMatrix read_edge_list(const std::string& path, bool symmetrize);

/// Dispatches on extension: .mtx -> Matrix Market, anything else -> edge list.
CooMatrix load_matrix(const std::string& path, bool symmetrize_edge_lists = true);

// --- Conversions ---------------------------------------------------------

CsrMatrix to_csr(const CooMatrix& m);
CscMatrix to_csc(const CooMatrix& m);
DenseMatrix to_dense(const CooMatrix& m);

CooMatrix to_coo(const CsrMatrix& m);
CooMatrix to_coo(const CscMatrix& m);
DenseMatrix to_dense(const CsrMatrix& m);
DenseMatrix to_dense(const CscMatrix& m);
CscMatrix csr_to_csc(const CsrMatrix& m);
CsrMatrix dense_to_csr(const DenseMatrix& m, bool keep_zeros = false);
CsrMatrix transpose(const CsrMatrix& m);
/// Pattern of A + A^T with unit values (no self-loop removal).
CsrMatrix symmetrize_pattern(const CsrMatrix& m);

// --- MAP-CSR -------------------------------------------------------------

/// `placement` lists row indices in storage order. Each row appears once,
/// except rows in `replicate_rows` which appear exactly twice (the first
/// occurrence is the primary copy). An empty placement means identity order
/// with replicas appended in ascending row order.
MapCsrMatrix build_map_csr(const CsrMatrix& m, std::size_t bank_width,
                           std::span<const Index> replicate_rows,
                           std::span<const Index> placement = {});

/// (nnz + replica_nnz + pad_count) / nnz.
double replication_ratio(const MapCsrMatrix& m);

CsrMatrix to_csr(const MapCsrMatrix& m);

// --- Generators ----------------------------------------------------------

CooMatrix generate_rmat(const RmatParams& p);

/// |i - j| <= half_bandwidth, unit values.
CooMatrix generate_banded(Index n, Index half_bandwidth);

enum class ValueMode { Ones, SmallIntegers, Real };

/// Overwrites every value deterministically from `seed`. SmallIntegers draws
/// from {1..8} so that all partial sums stay exactly representable; Real
/// draws from [0.5, 1.5).
void assign_values(CooMatrix& m, ValueMode mode, std::uint64_t seed);

}  // namespace neura::matio
