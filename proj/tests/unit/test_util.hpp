#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "neura/matio.hpp"

namespace neura::test {

inline matio::CsrMatrix csr_from_dense(std::initializer_list<std::initializer_list<double>> rows) {
  matio::DenseMatrix d(rows.size(), rows.begin()->size());
  std::size_t r = 0;
  for (const auto& row : rows) {
    std::size_t c = 0;
    for (double v : row) d(r, c++) = v;
    ++r;
  }
  return matio::dense_to_csr(d);
}

inline matio::CsrMatrix identity(Index n) { return matio::dense_to_csr(matio::DenseMatrix::identity(n)); }

inline matio::CsrMatrix random_csr(Index rows, Index cols, std::size_t nnz, std::uint64_t seed,
                                   matio::ValueMode mode = matio::ValueMode::SmallIntegers) {
  std::mt19937_64 rng(seed);
  matio::CooMatrix m;
  m.n_rows = rows;
  m.n_cols = cols;
  for (std::size_t k = 0; k < nnz; ++k) {
    m.entries.push_back({static_cast<Index>(rng() % rows), static_cast<Index>(rng() % cols), 1.0});
  }
  m.normalize();
  matio::assign_values(m, mode, seed + 1);
  return matio::to_csr(m);
}

inline matio::CsrMatrix rmat_csr(unsigned scale, unsigned ef, std::uint64_t seed,
                                 matio::ValueMode mode = matio::ValueMode::SmallIntegers) {
  matio::RmatParams p;
  p.scale = scale;
  p.edge_factor = ef;
  p.seed = seed;
  auto coo = matio::generate_rmat(p);
  matio::assign_values(coo, mode, seed * 31 + 7);
  return matio::to_csr(coo);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("neura_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace neura::test
