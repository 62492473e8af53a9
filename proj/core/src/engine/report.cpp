#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "neura/engine.hpp"

namespace neura::engine {

namespace {

using nlohmann::json;

json cpi_json(const uarch::CpiHistogram& h) {
  json buckets = json::array();
  for (const auto& [c, n] : h.buckets) buckets.push_back({c, n});
  return {{"count", h.count}, {"total", h.total}, {"mean", h.mean()}, {"histogram", buckets}};
}

json loads_json(const std::vector<std::uint64_t>& v) {
  json j = {{"counts", v}};
  std::uint64_t total = 0;
  for (auto x : v) total += x;
  if (!v.empty() && total > 0) {
    const auto st = mapping::load_stats(v);
    j["cv"] = st.cv;
    j["max_over_mean"] = st.max_over_mean;
  }
  return j;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + p.string());
}

}  // namespace

std::string stats_json(const SimStats& s) {
  json j;
  j["config"] = s.config;
  j["mapper"] = s.mapper;
  j["eviction"] = s.eviction;
  j["seed"] = s.seed;
  j["cycles"] = s.cycles;
  j["windows"] = s.windows;
  j["instructions"] = {{"mmh4.total", s.mmh4_total},
                       {"mmh4.retired", s.mmh4_retired},
                       {"hacc.emitted", s.haccs_emitted},
                       {"hacc.applied", s.haccs_applied}};
  j["conservation"] = {{"total_fma", s.total_fma},
                       {"total_out_nnz", s.total_out_nnz},
                       {"evictions", s.evictions},
                       {"writebacks", s.writebacks_received},
                       {"mapper.assignments", s.mapper_assignments},
                       {"hashpad.final", s.hashpad_final}};
  j["hashpad"] = {{"inserts", s.inserts},
                  {"updates", s.updates},
                  {"probes", s.probes},
                  {"occupancy.max", s.hashpad_peak},
                  {"occupancy.max_unit", s.hashpad_peak_unit}};
  j["stalls"] = {{"reg", s.stall_reg},         {"operand", s.stall_operand},   {"port", s.stall_port},
                 {"writeback", s.stall_wb},    {"dispatch", s.stall_dispatch}, {"window", s.stall_window}};
  j["router"] = {{"flits", s.flits}, {"hops.total", s.hops_total}, {"hops.max", s.hops_max}};
  j["memory"] = {{"read.requests", s.mem_read_requests},   {"read.transactions", s.mem_read_transactions},
                 {"read.coalesced", s.mem_coalesced},       {"write.transactions", s.mem_write_transactions},
                 {"bytes.read", s.bytes_read},              {"bytes.written", s.bytes_written}};
  const std::string hacc_kind = s.eviction == "barrier" ? "hacc_be" : "hacc_re";
  j["cpi"] = {{"mmh4_full", cpi_json(s.cpi_mmh4_full)},
              {"mmh4_ragged", cpi_json(s.cpi_mmh4_ragged)},
              {hacc_kind, cpi_json(s.cpi_hacc)}};
  j["load"] = {{"core.haccs", loads_json(s.core_haccs)},
               {"core.mmh4", loads_json(s.core_mmh4)},
               {"mem.haccs", loads_json(s.mem_haccs)}};
  return j.dump(2) + "\n";
}

std::string cpi_csv(const uarch::CpiHistogram& h) {
  std::ostringstream os;
  os << "cycles,count\n";
  for (const auto& [c, n] : h.buckets) os << c << ',' << n << '\n';
  return os.str();
}

std::string series_csv(const std::vector<Sample>& series) {
  std::ostringstream os;
  os << "cycle,inflight_reads,hashpad_occupancy,flits_in_network,mmh4_retired,haccs_applied\n";
  for (const auto& s : series) {
    os << s.cycle << ',' << s.inflight_reads << ',' << s.hashpad_occupancy << ',' << s.flits_in_network << ','
       << s.mmh4_retired << ',' << s.haccs_applied << '\n';
  }
  return os.str();
}

std::string run_log_json(const SimResult& r) {
  const double kcps = r.wall_seconds > 0 ? static_cast<double>(r.stats.cycles) / r.wall_seconds / 1000.0 : 0.0;
  json j = {{"cycles", r.stats.cycles}, {"wall_seconds", r.wall_seconds}, {"kcps", kcps}};
  return j.dump(2) + "\n";
}

void write_outputs(const SimResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  const fs::path d(dir);
  write_file(d / "stats.json", stats_json(r.stats));
  write_file(d / "heatmap.csv", r.heatmap.to_csv());
  write_file(d / "cpi_mmh4_full.csv", cpi_csv(r.stats.cpi_mmh4_full));
  write_file(d / "cpi_mmh4_ragged.csv", cpi_csv(r.stats.cpi_mmh4_ragged));
  write_file(d / (r.stats.eviction == "barrier" ? "cpi_hacc_be.csv" : "cpi_hacc_re.csv"), cpi_csv(r.stats.cpi_hacc));
  write_file(d / "timeseries.csv", series_csv(r.stats.series));
  write_file(d / "seed_log.json", mapping::seed_log_json(r.gamma) + "\n");
  write_file(d / "run_log.json", run_log_json(r));
}

ChannelProbe probe_channel(const uarch::ChannelConfig& cfg, std::uint64_t requests) {
  ChannelProbe out;
  {
    uarch::MemoryController mc(0, cfg);
    std::uint64_t sent = 0;
    std::uint64_t answered = 0;
    Cycle now = 0;
    while (answered < requests) {
      for (auto room = mc.read_free(); room > 0 && sent < requests; --room, ++sent) {
        mc.deliver_read({uarch::UnitKind::Core, 0}, static_cast<std::uint32_t>(sent), sent * cfg.granule_bytes, now);
      }
      mc.step(now);
      answered += mc.responses().size();
      mc.responses().clear();
      ++now;
    }
    out.cycles = now;
    out.transactions = mc.channel().transactions();
    out.bytes_per_cycle = static_cast<double>(mc.channel().bytes_served()) / static_cast<double>(now);
  }
  {
    uarch::MemoryController mc(0, cfg);
    const Cycle start = 1000;
    mc.deliver_read({uarch::UnitKind::Core, 0}, 0, 0, start);
    for (Cycle now = start;; ++now) {
      mc.step(now);
      if (!mc.responses().empty()) {
        out.isolated_latency = now - start;
        break;
      }
    }
  }
  return out;
}

}  // namespace neura::engine
