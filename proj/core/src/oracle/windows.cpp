#include <algorithm>
#include <cmath>
#include <numeric>

#include "neura/oracle.hpp"

namespace neura::oracle {

bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  if (n % 2 == 0) return n == 2;
  if (n % 3 == 0) return n == 3;
  // 6k +/- 1 wheel.
  for (std::uint64_t d = 5; d * d <= n; d += 6) {
    if (n % d == 0 || n % (d + 2) == 0) return false;
  }
  return true;
}

std::uint64_t next_prime(std::uint64_t n) {
  if (n <= 2) return 2;
  std::uint64_t p = n | 1;
  while (!is_prime(p)) p += 2;
  return p;
}

std::uint64_t prev_prime(std::uint64_t n) {
  if (n < 2) return 0;
  if (n == 2) return 2;
  std::uint64_t p = (n % 2 == 0) ? n - 1 : n;
  while (p > 2 && !is_prime(p)) p -= 2;
  return p;
}

std::uint64_t Window::total_capacity() const {
  return std::accumulate(hash_capacity.begin(), hash_capacity.end(), std::uint64_t{0});
}

std::vector<std::uint32_t> WindowPlan::window_of_row(Index n_rows) const {
  std::vector<std::uint32_t> out(n_rows, 0);
  for (std::uint32_t w = 0; w < windows.size(); ++w) {
    for (const Index r : windows[w].rows) out[r] = w;
  }
  return out;
}

namespace {

/// Max-segment tree over window slots answering "leftmost slot with at
/// least `need` remaining". Unopened slots hold the full budget, so the
/// answer is either an open window with room or the next fresh one.
class FirstFitTree {
public:
  FirstFitTree(std::size_t slots, std::uint64_t budget) : size_(1) {
    while (size_ < slots) size_ <<= 1;
    tree_.assign(2 * size_, 0);
    for (std::size_t i = 0; i < slots; ++i) tree_[size_ + i] = budget;
    for (std::size_t i = size_ - 1; i > 0; --i) tree_[i] = std::max(tree_[2 * i], tree_[2 * i + 1]);
  }

  std::size_t leftmost_fit(std::uint64_t need) const {
    std::size_t node = 1;
    while (node < size_) node = tree_[2 * node] >= need ? 2 * node : 2 * node + 1;
    return node - size_;
  }

  void consume(std::size_t slot, std::uint64_t amount) {
    std::size_t node = size_ + slot;
    tree_[node] -= amount;
    for (node /= 2; node > 0; node /= 2) tree_[node] = std::max(tree_[2 * node], tree_[2 * node + 1]);
  }

private:
  std::size_t size_;
  std::vector<std::uint64_t> tree_;
};

}  // namespace

WindowPlan plan_windows(const SymbolicPlan& plan, const WindowParams& params, std::span<const Index> placement) {
  if (!(params.cf > 0)) throw ConfigError("contraction factor must be > 0");
  if (!(params.ef >= 1)) throw ConfigError("expansion factor must be >= 1");
  if (params.spad_budget == 0) throw ConfigError("scratchpad budget must be > 0");

  WindowPlan out;
  out.cf = params.cf;
  out.ef = params.ef;
  out.threshold = params.threshold.value_or(static_cast<double>(params.spad_budget) / 64.0);
  out.spad_budget = params.spad_budget;

  std::vector<Index> order;
  if (placement.empty()) {
    order.resize(plan.n_rows);
    std::iota(order.begin(), order.end(), Index{0});
  } else {
    order.assign(placement.begin(), placement.end());
    std::vector<std::uint8_t> seen(plan.n_rows, 0);
    for (const Index r : order) {
      if (r >= plan.n_rows || seen[r]) throw ConfigError("window placement must be a permutation of the rows");
      seen[r] = 1;
    }
    if (order.size() != plan.n_rows) throw ConfigError("window placement must be a permutation of the rows");
  }

  std::vector<RowClass> cls(plan.n_rows, RowClass::Sparse);
  std::vector<std::uint64_t> cap(plan.n_rows, 0);
  for (Index r = 0; r < plan.n_rows; ++r) {
    const auto fma = plan.fma_per_row[r];
    if (fma == 0) continue;
    const bool dense = static_cast<double>(fma) / params.cf > out.threshold && plan.n_cols <= params.spad_budget;
    if (dense) {
      cls[r] = RowClass::Dense;
      cap[r] = plan.n_cols;
      continue;
    }
    auto need = next_prime(static_cast<std::uint64_t>(std::ceil(static_cast<double>(fma) * params.ef)));
    if (need > params.spad_budget) {
      need = prev_prime(params.spad_budget);
      if (need < plan.out_nnz_per_row[r]) {
        throw CapacityError("row " + std::to_string(r) + " needs " + std::to_string(plan.out_nnz_per_row[r]) +
                            " hash lines but the scratchpad budget is " + std::to_string(params.spad_budget));
      }
    }
    cap[r] = need;
  }

  // Alternate dense and sparse rows so each window carries a mix of both.
  std::vector<Index> dense_rows;
  std::vector<Index> sparse_rows;
  for (const Index r : order) (cls[r] == RowClass::Dense ? dense_rows : sparse_rows).push_back(r);
  std::vector<Index> mixed;
  mixed.reserve(order.size());
  for (std::size_t i = 0; i < std::max(dense_rows.size(), sparse_rows.size()); ++i) {
    if (i < dense_rows.size()) mixed.push_back(dense_rows[i]);
    if (i < sparse_rows.size()) mixed.push_back(sparse_rows[i]);
  }

  FirstFitTree tree(std::max<std::size_t>(mixed.size(), 1), params.spad_budget);
  for (const Index r : mixed) {
    const auto slot = tree.leftmost_fit(cap[r]);
    tree.consume(slot, cap[r]);
    if (slot >= out.windows.size()) out.windows.resize(slot + 1);
    auto& w = out.windows[slot];
    w.rows.push_back(r);
    w.classification.push_back(cls[r]);
    w.hash_capacity.push_back(cap[r]);
  }
  return out;
}

}  // namespace neura::oracle
