#include <algorithm>
#include <numeric>

#include "neura/isa.hpp"

namespace neura::isa {

std::vector<HaccInstr> expand_mmh4(const Mmh4Instr& instr, const MemoryImage& mem, const TagLayout& layout) {
  if (instr.n_a > 4 || instr.n_b > 4) throw LoweringError("MMH4 lane count above 4");
  const std::uint64_t base = instr.base_addr;
  std::array<double, 4> b_vals{};
  std::array<Index, 4> b_cols{};
  for (unsigned jb = 0; jb < instr.n_b; ++jb) {
    b_cols[jb] = mem.read_u32(base + instr.b_col_ind_addr + 4 * jb);
    b_vals[jb] = mem.read_f64(base + instr.b_data_addr + 8 * jb);
  }
  std::vector<HaccInstr> out;
  out.reserve(instr.lanes());
  for (unsigned ia = 0; ia < instr.n_a; ++ia) {
    const double a = mem.read_f64(base + instr.a_data_addr + 8 * ia);
    for (unsigned jb = 0; jb < instr.n_b; ++jb) {
      out.push_back({encode_tag(instr.a_rows[ia], b_cols[jb], layout), a * b_vals[jb],
                     mem.read_u32(base + instr.roll_counter_addr + 4 * (ia * 4 + jb))});
    }
  }
  return out;
}

namespace {

struct Skeleton {
  Mmh4Instr instr;
  std::size_t a_group = 0;  // index into A groups
  std::size_t b_pos = 0;    // first B element (CSR position)
};

struct AGroup {
  std::array<Index, 4> rows{};
  std::array<double, 4> vals{};
  std::uint8_t n = 0;
};

}  // namespace

Program lower_spgemm(const matio::CscMatrix& a, const matio::CsrMatrix& b, const oracle::SymbolicPlan& plan,
                     const TagLayout& layout, const oracle::WindowPlan* windows) {
  layout.validate();
  if (a.n_cols != b.n_rows) {
    throw DimensionError("lower: inner dimensions differ (" + std::to_string(a.n_cols) + " vs " +
                         std::to_string(b.n_rows) + ")");
  }
  if (plan.n_rows != a.n_rows || plan.n_cols != b.n_cols) throw DimensionError("lower: symbolic plan does not match operands");
  if (a.n_rows > 0 && b.n_cols > 0) encode_tag(a.n_rows - 1, b.n_cols - 1, layout);

  Program prog;
  prog.n_rows = a.n_rows;
  prog.n_cols = b.n_cols;
  prog.layout = layout;
  prog.total_fma = plan.total_fma;
  prog.total_out_nnz = plan.total_out_nnz;

  std::vector<std::uint32_t> window_of(a.n_rows, 0);
  if (windows) {
    window_of = windows->window_of_row(a.n_rows);
    prog.n_windows = static_cast<std::uint32_t>(std::max<std::size_t>(windows->windows.size(), 1));
  }

  std::vector<AGroup> groups;
  std::vector<Skeleton> skel;
  std::vector<std::vector<std::pair<Index, double>>> per_window(prog.n_windows);
  for (Index k = 0; k < a.n_cols; ++k) {
    const auto col = a.col(k);
    const auto brow_len = b.row_length(k);
    if (col.empty() || brow_len == 0) continue;
    for (auto& w : per_window) w.clear();
    for (std::size_t p = 0; p < col.size(); ++p) per_window[window_of[col.indices[p]]].emplace_back(col.indices[p], col.values[p]);
    for (std::uint32_t w = 0; w < prog.n_windows; ++w) {
      const auto& entries = per_window[w];
      for (std::size_t g = 0; g < entries.size(); g += 4) {
        AGroup grp;
        grp.n = static_cast<std::uint8_t>(std::min<std::size_t>(4, entries.size() - g));
        for (unsigned l = 0; l < grp.n; ++l) {
          grp.rows[l] = entries[g + l].first;
          grp.vals[l] = entries[g + l].second;
        }
        groups.push_back(grp);
        for (std::size_t q = 0; q < brow_len; q += 4) {
          Skeleton s;
          s.instr.a_rows = grp.rows;
          s.instr.n_a = grp.n;
          s.instr.n_b = static_cast<std::uint8_t>(std::min<std::size_t>(4, brow_len - q));
          s.instr.window = w;
          s.instr.k = k;
          s.a_group = groups.size() - 1;
          s.b_pos = static_cast<std::size_t>(b.row_offsets[k]) + q;
          skel.push_back(s);
        }
      }
    }
  }
  // Window-major program order: everything of window 0 before window 1.
  std::stable_sort(skel.begin(), skel.end(),
                   [](const Skeleton& x, const Skeleton& y) { return x.instr.window < y.instr.window; });

  auto& mem = prog.memory;
  const auto b_cols_base = mem.add_region("b_col_ind", b.col_indices.size() * 4);
  const auto b_vals_base = mem.add_region("b_data", b.values.size() * 8);
  const auto a_base = mem.add_region("a_data", groups.size() * 32);
  const auto ctr_base = mem.add_region("roll_counters", skel.size() * 64);
  const std::uint64_t base = MemoryImage::kFirstBase;

  for (std::size_t p = 0; p < b.col_indices.size(); ++p) {
    mem.write_u32(b_cols_base + 4 * p, b.col_indices[p]);
    mem.write_f64(b_vals_base + 8 * p, b.values[p]);
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (unsigned l = 0; l < groups[g].n; ++l) mem.write_f64(a_base + 32 * g + 8 * l, groups[g].vals[l]);
  }

  prog.instrs.reserve(skel.size());
  std::uint64_t lanes = 0;
  for (std::size_t s = 0; s < skel.size(); ++s) {
    auto in = skel[s].instr;
    in.base_addr = base;
    in.a_data_addr = a_base + 32 * skel[s].a_group - base;
    in.b_col_ind_addr = b_cols_base + 4 * skel[s].b_pos - base;
    in.b_data_addr = b_vals_base + 8 * skel[s].b_pos - base;
    in.roll_counter_addr = ctr_base + 64 * s - base;
    for (unsigned ia = 0; ia < in.n_a; ++ia) {
      for (unsigned jb = 0; jb < in.n_b; ++jb) {
        const Index j = b.col_indices[skel[s].b_pos + jb];
        const auto total = plan.contributions(in.a_rows[ia], j);
        if (total == 0) throw LoweringError("symbolic plan has no entry for a lowered partial product");
        mem.write_u32(ctr_base + 64 * s + 4 * (ia * 4 + jb), total - 1);
      }
    }
    lanes += in.lanes();
    prog.instrs.push_back(in);
  }
  if (lanes != plan.total_fma) {
    throw LoweringError("lowered " + std::to_string(lanes) + " partial products but the plan has " +
                        std::to_string(plan.total_fma));
  }
  return prog;
}

std::optional<HaccPad::Eviction> HaccPad::apply(const HaccInstr& h) {
  auto it = lines_.find(h.tag);
  if (it == lines_.end()) {
    if (h.counter == 0) return Eviction{h.tag, h.data};
    lines_.emplace(h.tag, Line{h.data, h.counter});
    max_live_ = std::max(max_live_, lines_.size());
    return std::nullopt;
  }
  it->second.data += h.data;
  if (--it->second.counter == 0) {
    const Eviction ev{h.tag, it->second.data};
    lines_.erase(it);
    return ev;
  }
  return std::nullopt;
}

std::vector<HaccPad::Eviction> HaccPad::flush() {
  std::vector<Eviction> out;
  out.reserve(lines_.size());
  for (const auto& [tag, line] : lines_) out.push_back({tag, line.data});
  std::sort(out.begin(), out.end(), [](const Eviction& x, const Eviction& y) { return x.tag < y.tag; });
  lines_.clear();
  return out;
}

ReplayResult replay(const Program& program) {
  ReplayResult res;
  HaccPad pad;
  std::vector<std::vector<std::pair<Index, double>>> rows(program.n_rows);
  auto emit = [&](const HaccPad::Eviction& ev) {
    const auto [i, j] = decode_tag(ev.tag, program.layout);
    if (i >= program.n_rows || j >= program.n_cols) throw LoweringError("evicted tag decodes outside the output");
    rows[i].emplace_back(j, ev.data);
    ++res.evictions;
  };
  for (const auto& in : program.instrs) {
    ++res.mmh4_count;
    for (const auto& h : expand_mmh4(in, program.memory, program.layout)) {
      ++res.hacc_count;
      if (auto ev = pad.apply(h)) emit(*ev);
    }
  }
  res.final_live = pad.live();
  res.max_live = pad.max_live();
  // Lines whose counters never reached zero still hold output values.
  for (const auto& ev : pad.flush()) emit(ev);

  auto& c = res.c;
  c.n_rows = program.n_rows;
  c.n_cols = program.n_cols;
  c.row_offsets.assign(static_cast<std::size_t>(c.n_rows) + 1, 0);
  for (Index i = 0; i < c.n_rows; ++i) {
    auto& r = rows[i];
    std::sort(r.begin(), r.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (std::size_t p = 0; p < r.size(); ++p) {
      if (p > 0 && r[p].first == r[p - 1].first) {
        c.values.back() += r[p].second;
        continue;
      }
      c.col_indices.push_back(r[p].first);
      c.values.push_back(r[p].second);
    }
    c.row_offsets[i + 1] = c.col_indices.size();
  }
  return res;
}

}  // namespace neura::isa
