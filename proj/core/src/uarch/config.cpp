#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "neura/uarch.hpp"

namespace neura::uarch {

using nlohmann::ordered_json;

void ChipConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("chip config: " + what);
  };
  need(n_tiles >= 1, "n_tiles must be >= 1");
  need(cores_per_tile >= 1, "cores_per_tile must be >= 1");
  need(mems_per_tile >= 1, "mems_per_tile must be >= 1");
  need(routers_per_tile >= 1, "routers_per_tile must be >= 1");
  need(frequency_ghz > 0, "frequency must be positive");
  need(core.n_pipelines >= 1, "core needs a pipeline");
  need(core.n_multipliers >= 1 && core.n_addr_generators >= 1, "core needs multipliers and address generators");
  need(core.n_ports >= 1, "core needs a port");
  need(core.regs_per_mmh4 >= 1 && core.regs_per_pipeline >= core.regs_per_mmh4,
       "a pipeline must hold the registers of at least one MMH4");
  need(core.pipeline_queue_depth >= 1 && core.port_queue_depth >= 1, "core queues must be non-empty");
  need(mem.hash_engines >= 1, "NeuraMem needs a hash engine");
  need(mem.comparators_per_engine >= 1, "hash engines need a TAG comparator");
  need(mem.hashlines >= 2 * mem.hash_engines, "each hash engine needs at least two hash lines");
  need(mem.n_ports >= 1 && mem.instr_buffer_depth >= 1 && mem.wb_queue_depth >= 1, "NeuraMem queues must be non-empty");
  need(noc.buffer_depth >= 2, "router buffers need at least two slots for bubble flow control");
  need(noc.hop_latency == 1, "only single-cycle hops are modeled");
  need(channel.bytes_per_cycle >= 1 && channel.granule_bytes >= 1, "channel bandwidth and granule must be positive");
  need(channel.queue_depth >= 1 && channel.read_queue_depth >= 1 && channel.reorder_window >= 1,
       "memory controller queues must be non-empty");
  need(channel.resp_queue_depth >= 1 && channel.wb_buffer_depth >= 1, "memory controller queues must be non-empty");
}

namespace {

ChipConfig base(const std::string& name, std::uint32_t units_per_tile) {
  ChipConfig c;
  c.name = name;
  c.cores_per_tile = units_per_tile;
  c.mems_per_tile = units_per_tile;
  c.routers_per_tile = 2 * units_per_tile;
  return c;
}

}  // namespace

ChipConfig named_config(const std::string& name) {
  if (name == "tile4") {
    auto c = base(name, 4);
    c.core.n_pipelines = 2;
    c.core.regs_per_pipeline = 4;
    c.core.n_multipliers = 2;
    c.core.n_addr_generators = 1;
    c.mem.hash_engines = 2;
    c.mem.comparators_per_engine = 2;
    c.mem.hashlines = 4096;
    return c;
  }
  if (name == "tile16" || name == "tile16-gnn") {
    auto c = base(name, name == "tile16" ? 16 : 32);
    c.core.n_pipelines = 4;
    c.core.regs_per_pipeline = 8;
    c.core.n_multipliers = 4;
    c.core.n_addr_generators = 2;
    c.mem.hash_engines = 4;
    c.mem.comparators_per_engine = 4;
    c.mem.hashlines = 2048;
    return c;
  }
  if (name == "tile64") {
    auto c = base(name, 64);
    c.core.n_pipelines = 8;
    c.core.regs_per_pipeline = 16;
    c.core.n_multipliers = 8;
    c.core.n_addr_generators = 2;
    c.mem.hash_engines = 8;
    c.mem.comparators_per_engine = 8;
    c.mem.hashlines = 2048;
    return c;
  }
  throw ConfigError("unknown chip config '" + name + "' (expected tile4, tile16, tile64, tile16-gnn or file:PATH)");
}

std::vector<std::string> config_names() { return {"tile4", "tile16", "tile64", "tile16-gnn"}; }

std::string config_to_json(const ChipConfig& c) {
  ordered_json j;
  j["name"] = c.name;
  j["n_tiles"] = c.n_tiles;
  j["cores_per_tile"] = c.cores_per_tile;
  j["mems_per_tile"] = c.mems_per_tile;
  j["routers_per_tile"] = c.routers_per_tile;
  j["frequency_ghz"] = c.frequency_ghz;
  j["core"] = {{"n_pipelines", c.core.n_pipelines},
               {"regs_per_pipeline", c.core.regs_per_pipeline},
               {"reg_bits", c.core.reg_bits},
               {"n_multipliers", c.core.n_multipliers},
               {"n_addr_generators", c.core.n_addr_generators},
               {"n_ports", c.core.n_ports},
               {"regs_per_mmh4", c.core.regs_per_mmh4},
               {"pipeline_queue_depth", c.core.pipeline_queue_depth},
               {"port_queue_depth", c.core.port_queue_depth},
               {"decode_latency", c.core.decode_latency},
               {"reg_alloc_latency", c.core.reg_alloc_latency},
               {"addr_gen_latency", c.core.addr_gen_latency},
               {"multiply_latency", c.core.multiply_latency}};
  j["mem"] = {{"hash_engines", c.mem.hash_engines},
              {"comparators_per_engine", c.mem.comparators_per_engine},
              {"hashlines", c.mem.hashlines},
              {"hashline_bytes", c.mem.hashline_bytes},
              {"n_ports", c.mem.n_ports},
              {"instr_buffer_depth", c.mem.instr_buffer_depth},
              {"wb_queue_depth", c.mem.wb_queue_depth},
              {"compare_latency", c.mem.compare_latency},
              {"accumulate_latency", c.mem.accumulate_latency},
              {"full_parallel_compare", c.mem.full_parallel_compare}};
  j["noc"] = {{"hop_latency", c.noc.hop_latency},
              {"buffer_depth", c.noc.buffer_depth},
              {"dedicated_writeback", c.noc.dedicated_writeback}};
  j["channel"] = {{"bytes_per_cycle", c.channel.bytes_per_cycle},
                  {"fixed_latency", c.channel.fixed_latency},
                  {"queue_depth", c.channel.queue_depth},
                  {"granule_bytes", c.channel.granule_bytes},
                  {"read_queue_depth", c.channel.read_queue_depth},
                  {"reorder_window", c.channel.reorder_window},
                  {"resp_queue_depth", c.channel.resp_queue_depth},
                  {"wb_buffer_depth", c.channel.wb_buffer_depth}};
  return j.dump(2);
}

namespace {

template <class T>
void opt(const ordered_json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

ChipConfig config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("chip config JSON: ") + e.what());
  }
  // A "base" key starts from a named config and overrides selected fields.
  ChipConfig c = j.contains("base") ? named_config(j.at("base").get<std::string>()) : ChipConfig{};
  try {
    opt(j, "name", c.name);
    opt(j, "n_tiles", c.n_tiles);
    opt(j, "cores_per_tile", c.cores_per_tile);
    opt(j, "mems_per_tile", c.mems_per_tile);
    opt(j, "routers_per_tile", c.routers_per_tile);
    opt(j, "frequency_ghz", c.frequency_ghz);
    if (j.contains("core")) {
      const auto& k = j.at("core");
      opt(k, "n_pipelines", c.core.n_pipelines);
      opt(k, "regs_per_pipeline", c.core.regs_per_pipeline);
      opt(k, "reg_bits", c.core.reg_bits);
      opt(k, "n_multipliers", c.core.n_multipliers);
      opt(k, "n_addr_generators", c.core.n_addr_generators);
      opt(k, "n_ports", c.core.n_ports);
      opt(k, "regs_per_mmh4", c.core.regs_per_mmh4);
      opt(k, "pipeline_queue_depth", c.core.pipeline_queue_depth);
      opt(k, "port_queue_depth", c.core.port_queue_depth);
      opt(k, "decode_latency", c.core.decode_latency);
      opt(k, "reg_alloc_latency", c.core.reg_alloc_latency);
      opt(k, "addr_gen_latency", c.core.addr_gen_latency);
      opt(k, "multiply_latency", c.core.multiply_latency);
    }
    if (j.contains("mem")) {
      const auto& k = j.at("mem");
      opt(k, "hash_engines", c.mem.hash_engines);
      opt(k, "comparators_per_engine", c.mem.comparators_per_engine);
      opt(k, "hashlines", c.mem.hashlines);
      opt(k, "hashline_bytes", c.mem.hashline_bytes);
      opt(k, "n_ports", c.mem.n_ports);
      opt(k, "instr_buffer_depth", c.mem.instr_buffer_depth);
      opt(k, "wb_queue_depth", c.mem.wb_queue_depth);
      opt(k, "compare_latency", c.mem.compare_latency);
      opt(k, "accumulate_latency", c.mem.accumulate_latency);
      opt(k, "full_parallel_compare", c.mem.full_parallel_compare);
    }
    if (j.contains("noc")) {
      const auto& k = j.at("noc");
      opt(k, "hop_latency", c.noc.hop_latency);
      opt(k, "buffer_depth", c.noc.buffer_depth);
      opt(k, "dedicated_writeback", c.noc.dedicated_writeback);
    }
    if (j.contains("channel")) {
      const auto& k = j.at("channel");
      opt(k, "bytes_per_cycle", c.channel.bytes_per_cycle);
      opt(k, "fixed_latency", c.channel.fixed_latency);
      opt(k, "queue_depth", c.channel.queue_depth);
      opt(k, "granule_bytes", c.channel.granule_bytes);
      opt(k, "read_queue_depth", c.channel.read_queue_depth);
      opt(k, "reorder_window", c.channel.reorder_window);
      opt(k, "resp_queue_depth", c.channel.resp_queue_depth);
      opt(k, "wb_buffer_depth", c.channel.wb_buffer_depth);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("chip config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

std::uint32_t Torus::neighbor(std::uint32_t r, Direction d) const noexcept {
  const auto cx = x(r);
  const auto cy = y(r);
  switch (d) {
    case Direction::East: return at((cx + 1) % width, cy);
    case Direction::West: return at((cx + width - 1) % width, cy);
    case Direction::North: return at(cx, (cy + 1) % height);
    case Direction::South: return at(cx, (cy + height - 1) % height);
    case Direction::Local: break;
  }
  return r;
}

std::uint32_t Torus::distance(std::uint32_t a, std::uint32_t b) const noexcept {
  auto ring = [](std::uint32_t p, std::uint32_t q, std::uint32_t n) {
    const std::uint32_t d = (q + n - p) % n;
    return std::min(d, n - d);
  };
  return ring(x(a), x(b), width) + ring(y(a), y(b), height);
}

Torus Torus::for_routers(std::uint32_t n) {
  std::uint32_t h = static_cast<std::uint32_t>(std::sqrt(static_cast<double>(n)));
  while (h > 1 && n % h != 0) --h;
  h = std::max<std::uint32_t>(h, 1);
  return {n / h, h};
}

std::uint32_t Chip::router_ports(std::uint32_t r) const {
  std::uint32_t n = 4;
  for (const auto& a : attachments[r]) n += a.n_ports;
  return n;
}

const Attachment& Chip::attachment(UnitRef u) const {
  const std::uint32_t r = u.kind == UnitKind::Core  ? core_router[u.index]
                          : u.kind == UnitKind::Mem ? mem_router[u.index]
                                                    : mc_router[u.index];
  for (const auto& a : attachments[r]) {
    if (a.unit == u) return a;
  }
  throw ConfigError("unit is not attached to its router");
}

Chip build_chip(const ChipConfig& cfg) {
  cfg.validate();
  Chip chip;
  chip.config = cfg;
  chip.torus = Torus::for_routers(cfg.total_routers());
  chip.attachments.resize(chip.torus.size());

  auto attach = [&](std::uint32_t router, UnitRef u, std::uint32_t ports) {
    auto& list = chip.attachments[router];
    std::uint32_t first = 4;
    for (const auto& a : list) first += a.n_ports;
    list.push_back({u, first, ports});
  };

  // Tiles are consecutive strips of routers in row-major order. Inside a
  // tile cores and mems alternate; the memory controller shares router 0.
  for (std::uint32_t t = 0; t < cfg.n_tiles; ++t) {
    const std::uint32_t r0 = t * cfg.routers_per_tile;
    std::vector<UnitRef> units;
    for (std::uint32_t i = 0; i < std::max(cfg.cores_per_tile, cfg.mems_per_tile); ++i) {
      if (i < cfg.cores_per_tile) units.push_back({UnitKind::Core, t * cfg.cores_per_tile + i});
      if (i < cfg.mems_per_tile) units.push_back({UnitKind::Mem, t * cfg.mems_per_tile + i});
    }
    for (std::size_t u = 0; u < units.size(); ++u) {
      const std::uint32_t r = r0 + static_cast<std::uint32_t>(u % cfg.routers_per_tile);
      if (units[u].kind == UnitKind::Core) {
        chip.core_router.push_back(r);
        chip.core_tile.push_back(t);
        attach(r, units[u], cfg.core.n_ports);
      } else {
        chip.mem_router.push_back(r);
        chip.mem_tile.push_back(t);
        attach(r, units[u], cfg.mem.n_ports);
      }
    }
    chip.mc_router.push_back(r0);
    attach(r0, {UnitKind::Mc, t}, 4);
  }
  return chip;
}

}  // namespace neura::uarch
