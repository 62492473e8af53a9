#include <algorithm>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "neura/smash.hpp"
#include "common/worker_group.hpp"

namespace neura::smash {

std::string to_string(SmashVersion v) {
  switch (v) {
    case SmashVersion::Base: return "base";
    case SmashVersion::V1: return "v1";
    case SmashVersion::V2: return "v2";
    case SmashVersion::V3: return "v3";
  }
  return "?";
}

SmashVersion parse_smash_version(const std::string& s) {
  if (s == "base") return SmashVersion::Base;
  if (s == "v1") return SmashVersion::V1;
  if (s == "v2") return SmashVersion::V2;
  if (s == "v3") return SmashVersion::V3;
  throw ConfigError("unknown SMASH version '" + s + "' (expected base, v1, v2 or v3)");
}

void SmashConfig::validate() const {
  if (n_workers < 1) throw ConfigError("SMASH needs at least one worker");
  if (spad_capacity < 2) throw ConfigError("scratchpad capacity too small");
  if (version == SmashVersion::V3 && spad_capacity % 2 != 0) {
    throw ConfigError("V3 splits the scratchpad into two equal halves; capacity must be even");
  }
}

bool PhaseLedger::all_phases_overlapped() const {
  return std::any_of(steps.begin(), steps.end(), [](const Step& s) {
    return s.prefetch_window >= 0 && s.hash_window >= 0 && s.writeback_window >= 0;
  });
}

namespace {

double fraction(std::uint64_t part, const PhaseLedger& l) {
  const auto total = l.prefetch_units + l.hash_units + l.writeback_units;
  return total == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(total);
}

}  // namespace

double PhaseLedger::prefetch_fraction() const { return fraction(prefetch_units, *this); }
double PhaseLedger::hash_fraction() const { return fraction(hash_units, *this); }
double PhaseLedger::writeback_fraction() const { return fraction(writeback_units, *this); }

Index SmashInput::n_rows() const noexcept { return csr ? csr->n_rows : map_csr->n_rows; }
Index SmashInput::n_cols() const noexcept { return csr ? csr->n_cols : map_csr->n_cols; }

matio::SparseVectorView SmashInput::row(Index r, bool prefer_replica) const noexcept {
  if (csr) return csr->row(r);
  return prefer_replica ? map_csr->replica_row(r) : map_csr->row(r);
}

namespace {

/// Window inputs copied to local memory. Row r of the window owns A-entries
/// [a_begin[r], a_begin[r+1]); the EVEN half ends at a_split[r]. Each A-entry
/// points at a local copy of the B row it multiplies.
struct LocalWindow {
  std::vector<Index> a_k;
  std::vector<double> a_val;
  std::vector<std::size_t> a_begin{0};
  std::vector<std::size_t> a_split;
  std::vector<std::size_t> a_brow;  // index into b_begin
  std::vector<std::size_t> b_begin{0};
  std::vector<Index> b_cols;
  std::vector<double> b_vals;

  void clear() {
    a_k.clear();
    a_val.clear();
    a_begin.assign(1, 0);
    a_split.clear();
    a_brow.clear();
    b_begin.assign(1, 0);
    b_cols.clear();
    b_vals.clear();
  }
};

class Prefetcher {
public:
  Prefetcher(const SmashInput& a, const CsrMatrix& b) : a_(a), b_(b), stamp_(b.n_rows, kUnseen), local_(b.n_rows) {}

  /// Returns the number of elements copied.
  std::uint64_t load(const oracle::Window& w, std::uint64_t window_id, LocalWindow& out) {
    out.clear();
    std::uint64_t copied = 0;
    for (const Index r : w.rows) {
      const std::size_t len = a_.row(r, false).size();
      const std::size_t split = even_half_length(len);
      const auto even = a_.row(r, false);
      const auto odd = a_.row(r, true);
      for (std::size_t p = 0; p < len; ++p) {
        const auto& src = p < split ? even : odd;
        const Index k = src.indices[p];
        out.a_k.push_back(k);
        out.a_val.push_back(src.values[p]);
        out.a_brow.push_back(local_row(k, window_id, out, copied));
      }
      copied += len;
      out.a_split.push_back(out.a_begin.back() + split);
      out.a_begin.push_back(out.a_k.size());
    }
    return copied;
  }

private:
  static constexpr std::uint64_t kUnseen = ~std::uint64_t{0};

  std::size_t local_row(Index k, std::uint64_t window_id, LocalWindow& out, std::uint64_t& copied) {
    if (stamp_[k] == window_id) return local_[k];
    stamp_[k] = window_id;
    const auto brow = b_.row(k);
    out.b_cols.insert(out.b_cols.end(), brow.indices.begin(), brow.indices.end());
    out.b_vals.insert(out.b_vals.end(), brow.values.begin(), brow.values.end());
    out.b_begin.push_back(out.b_cols.size());
    copied += brow.size();
    local_[k] = out.b_begin.size() - 2;
    return local_[k];
  }

  const SmashInput& a_;
  const CsrMatrix& b_;
  std::vector<std::uint64_t> stamp_;
  std::vector<std::size_t> local_;
};

std::vector<ScratchpadHashTable> make_tables(const oracle::Window& w) {
  std::vector<ScratchpadHashTable> tables;
  tables.reserve(w.rows.size());
  for (std::size_t r = 0; r < w.rows.size(); ++r) {
    const bool direct = w.classification[r] == oracle::RowClass::Dense;
    tables.emplace_back(std::max<std::uint64_t>(w.hash_capacity[r], direct ? 1 : 2), direct);
  }
  return tables;
}

/// Multiplies A-entries [from, to) of window row `r` against their B rows.
std::uint64_t hash_range(const oracle::Window& w, std::size_t window_id, const LocalWindow& lw,
                         std::vector<ScratchpadHashTable>& tables, std::size_t r, std::size_t from, std::size_t to) {
  const Index row = w.rows[r];
  std::uint64_t products = 0;
  for (std::size_t p = from; p < to; ++p) {
    const std::size_t br = lw.a_brow[p];
    const double av = lw.a_val[p];
    for (std::size_t q = lw.b_begin[br]; q < lw.b_begin[br + 1]; ++q) {
      try {
        tables[r].insert(pack_tag(row, lw.b_cols[q]), av * lw.b_vals[q]);
      } catch (const OverflowError& e) {
        throw OverflowError("window " + std::to_string(window_id) + ", row " + std::to_string(row) + ": " + e.what());
      }
    }
    products += lw.b_begin[br + 1] - lw.b_begin[br];
  }
  return products;
}

std::uint64_t write_back(const oracle::Window& w, const std::vector<ScratchpadHashTable>& tables,
                         std::vector<std::vector<std::pair<Index, double>>>& out_rows) {
  std::uint64_t units = 0;
  for (std::size_t r = 0; r < w.rows.size(); ++r) {
    auto& dst = out_rows[w.rows[r]];
    const auto& t = tables[r];
    for (std::uint64_t s = 0; s < t.capacity(); ++s) {
      const auto tag = t.tag_at(s);
      if (tag != ScratchpadHashTable::kEmpty) dst.emplace_back(tag_col(tag), t.value_at(s));
    }
    std::sort(dst.begin(), dst.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    units += t.capacity();
  }
  return units;
}

class Kernel {
public:
  Kernel(const SmashInput& a, const CsrMatrix& b, const SmashConfig& cfg)
      : a_(a), b_(b), cfg_(cfg), pool_(cfg.n_workers), out_rows_(a.n_rows()) {}

  /// Hashing phase of one window under the configured version.
  void hash(const oracle::Window& w, std::size_t window_id, const LocalWindow& lw,
            std::vector<ScratchpadHashTable>& tables, SmashResult& res) {
    const unsigned n = cfg_.n_workers;
    std::vector<std::uint64_t> products(n, 0);
    const std::size_t rows = w.rows.size();

    switch (cfg_.version) {
      case SmashVersion::Base:
        pool_.run([&](unsigned worker) {
          for (std::size_t r = worker; r < rows; r += n) {
            products[worker] += hash_range(w, window_id, lw, tables, r, lw.a_begin[r], lw.a_begin[r + 1]);
          }
        });
        break;
      case SmashVersion::V1: {
        // Every worker takes a contiguous slice of the window's A-entries,
        // so one output row is typically shared by several workers.
        const std::size_t total = lw.a_k.size();
        pool_.run([&](unsigned worker) {
          const std::size_t from = total * worker / n;
          const std::size_t to = total * (worker + 1) / n;
          std::size_t r = static_cast<std::size_t>(
              std::upper_bound(lw.a_begin.begin(), lw.a_begin.end(), from) - lw.a_begin.begin() - 1);
          for (std::size_t p = from; p < to && r < rows;) {
            const std::size_t end = std::min(to, lw.a_begin[r + 1]);
            products[worker] += hash_range(w, window_id, lw, tables, r, p, end);
            p = end;
            ++r;
          }
        });
        break;
      }
      case SmashVersion::V2:
      case SmashVersion::V3: {
        const std::size_t n_tokens = 2 * rows;
        std::vector<std::atomic<std::uint32_t>> used(n_tokens);
        std::vector<std::uint64_t> taken(n, 0);
        pool_.run([&](unsigned worker) {
          for (std::size_t t = worker; t < n_tokens; t += n) {
            used[t].fetch_add(1, std::memory_order_relaxed);
            ++taken[worker];
            const std::size_t r = t / 2;
            const bool even = t % 2 == 0;
            const std::size_t from = even ? lw.a_begin[r] : lw.a_split[r];
            const std::size_t to = even ? lw.a_split[r] : lw.a_begin[r + 1];
            products[worker] += hash_range(w, window_id, lw, tables, r, from, to);
          }
        });
        res.tokens.tokens_issued += n_tokens;
        for (std::size_t t = 0; t < n_tokens; ++t) {
          const auto u = used[t].load();
          res.tokens.tokens_consumed += u;
          res.tokens.violations += u != 1;
        }
        for (unsigned k = 0; k < n; ++k) res.tokens.tokens_per_worker[k] += taken[k];
        break;
      }
    }
    for (const auto p : products) res.ledger.hash_units += p;
  }

  SmashResult sequential(const oracle::WindowPlan& plan) {
    SmashResult res;
    res.windows = plan;
    res.tokens.tokens_per_worker.assign(cfg_.n_workers, 0);
    Prefetcher prefetcher(a_, b_);
    LocalWindow lw;
    for (std::size_t wi = 0; wi < plan.windows.size(); ++wi) {
      const auto& w = plan.windows[wi];
      res.ledger.prefetch_units += prefetcher.load(w, wi, lw);
      auto tables = make_tables(w);
      hash(w, wi, lw, tables, res);
      res.ledger.writeback_units += write_back(w, tables, out_rows_);
      res.ledger.steps.push_back({-1, static_cast<long>(wi), -1});
    }
    res.c = assemble();
    return res;
  }

  SmashResult pipelined(const oracle::WindowPlan& plan) {
    SmashResult res;
    res.windows = plan;
    res.tokens.tokens_per_worker.assign(cfg_.n_workers, 0);
    Prefetcher prefetcher(a_, b_);
    LocalWindow local[2];
    std::vector<ScratchpadHashTable> tables[2];
    const long n_windows = static_cast<long>(plan.windows.size());

    for (long step = 0; step < n_windows + 2; ++step) {
      PhaseLedger::Step s;
      const long pf = step;
      const long hs = step - 1;
      const long wb = step - 2;
      s.prefetch_window = pf < n_windows ? pf : -1;
      s.hash_window = hs >= 0 && hs < n_windows ? hs : -1;
      s.writeback_window = wb >= 0 ? wb : -1;
      res.ledger.steps.push_back(s);

      std::exception_ptr side_error;
      std::mutex side_mu;
      auto guarded = [&](auto&& fn) {
        try {
          fn();
        } catch (...) {
          std::lock_guard lock(side_mu);
          if (!side_error) side_error = std::current_exception();
        }
      };

      std::uint64_t pf_units = 0;
      std::uint64_t wb_units = 0;
      std::jthread prefetch_thread;
      std::jthread writeback_thread;
      if (s.prefetch_window >= 0) {
        prefetch_thread = std::jthread([&] {
          guarded([&] { pf_units = prefetcher.load(plan.windows[pf], static_cast<std::uint64_t>(pf), local[pf % 2]); });
        });
      }
      if (s.writeback_window >= 0) {
        writeback_thread = std::jthread([&] {
          guarded([&] { wb_units = write_back(plan.windows[wb], tables[wb % 2], out_rows_); });
        });
      }
      if (s.hash_window >= 0) {
        guarded([&] {
          tables[hs % 2] = make_tables(plan.windows[hs]);
          hash(plan.windows[hs], static_cast<std::size_t>(hs), local[hs % 2], tables[hs % 2], res);
        });
      }
      if (prefetch_thread.joinable()) prefetch_thread.join();
      if (writeback_thread.joinable()) writeback_thread.join();
      if (side_error) std::rethrow_exception(side_error);
      res.ledger.prefetch_units += pf_units;
      res.ledger.writeback_units += wb_units;
    }
    res.c = assemble();
    return res;
  }

private:
  CsrMatrix assemble() {
    CsrMatrix c;
    c.n_rows = a_.n_rows();
    c.n_cols = b_.n_cols;
    c.row_offsets.assign(static_cast<std::size_t>(c.n_rows) + 1, 0);
    for (Index r = 0; r < c.n_rows; ++r) {
      for (const auto& [col, v] : out_rows_[r]) {
        c.col_indices.push_back(col);
        c.values.push_back(v);
      }
      c.row_offsets[r + 1] = c.col_indices.size();
    }
    return c;
  }

  const SmashInput& a_;
  const CsrMatrix& b_;
  SmashConfig cfg_;
  detail::WorkerGroup pool_;
  std::vector<std::vector<std::pair<Index, double>>> out_rows_;
};

oracle::WindowPlan plan_for(const SmashInput& a, const CsrMatrix& b, const SmashConfig& cfg) {
  const CsrMatrix a_csr = a.csr ? *a.csr : matio::to_csr(*a.map_csr);
  const auto symbolic = oracle::symbolic_pass(a_csr, b);
  oracle::WindowParams wp;
  wp.cf = cfg.cf;
  wp.ef = cfg.ef;
  wp.threshold = cfg.threshold;
  wp.spad_budget = cfg.version == SmashVersion::V3 ? cfg.spad_capacity / 2 : cfg.spad_capacity;
  return oracle::plan_windows(symbolic, wp);
}

void check_dims(const SmashInput& a, const CsrMatrix& b) {
  if ((a.csr == nullptr) == (a.map_csr == nullptr)) throw ConfigError("SMASH input needs exactly one A source");
  if (a.n_cols() != b.n_rows) {
    throw DimensionError("smash: inner dimensions differ (" + std::to_string(a.n_cols()) + " vs " +
                         std::to_string(b.n_rows) + ")");
  }
}

}  // namespace

SmashResult smash_run(const SmashInput& a, const CsrMatrix& b, const SmashConfig& cfg) {
  cfg.validate();
  check_dims(a, b);
  const auto plan = plan_for(a, b, cfg);
  if (cfg.version == SmashVersion::V3) return run_pipelined(plan, a, b, cfg);
  Kernel kernel(a, b, cfg);
  return kernel.sequential(plan);
}

SmashResult run_pipelined(const oracle::WindowPlan& windows, const SmashInput& a, const CsrMatrix& b,
                          const SmashConfig& cfg) {
  cfg.validate();
  check_dims(a, b);
  if (cfg.version != SmashVersion::V3) throw ConfigError("run_pipelined requires SMASH version v3");
  Kernel kernel(a, b, cfg);
  return kernel.pipelined(windows);
}

CsrMatrix smash_spgemm(const CsrMatrix& a, const CsrMatrix& b, const SmashConfig& cfg) {
  return smash_run(SmashInput{&a, nullptr}, b, cfg).c;
}

CsrMatrix smash_spgemm(const MapCsrMatrix& a, const CsrMatrix& b, const SmashConfig& cfg) {
  return smash_run(SmashInput{nullptr, &a}, b, cfg).c;
}

std::vector<std::uint64_t> run_tokenized_window(const oracle::Window& window, const SmashInput& a, const CsrMatrix& b,
                                                std::vector<ScratchpadHashTable>& tables, unsigned n_workers,
                                                std::vector<std::uint32_t>* consumed) {
  if (tables.size() != window.rows.size()) throw ConfigError("one hashtable per window row required");
  if (n_workers < 1) throw ConfigError("at least one worker required");
  check_dims(a, b);
  Prefetcher prefetcher(a, b);
  LocalWindow lw;
  prefetcher.load(window, 0, lw);

  const std::size_t n_tokens = 2 * window.rows.size();
  std::vector<std::atomic<std::uint32_t>> used(n_tokens);
  std::vector<std::uint64_t> taken(n_workers, 0);
  detail::WorkerGroup pool(n_workers);
  // Workers poll the pool in turn: poll i of worker w receives token i*n + w.
  pool.run([&](unsigned worker) {
    for (std::size_t t = worker; t < n_tokens; t += n_workers) {
      used[t].fetch_add(1, std::memory_order_relaxed);
      ++taken[worker];
      const std::size_t r = t / 2;
      const bool even = t % 2 == 0;
      hash_range(window, 0, lw, tables, r, even ? lw.a_begin[r] : lw.a_split[r],
                 even ? lw.a_split[r] : lw.a_begin[r + 1]);
    }
  });
  if (consumed) {
    consumed->resize(n_tokens);
    for (std::size_t t = 0; t < n_tokens; ++t) (*consumed)[t] = used[t].load();
  }
  return taken;
}

}  // namespace neura::smash
