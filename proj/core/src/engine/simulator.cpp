#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "common/worker_group.hpp"
#include "neura/engine.hpp"

namespace neura::engine {

using namespace uarch;

std::string to_string(EvictionMode m) { return m == EvictionMode::Rolling ? "rolling" : "barrier"; }

namespace {

constexpr std::uint32_t kMeshPorts = 4;
constexpr std::uint8_t kLocal = 4;
constexpr std::uint8_t kNone = 0xff;

Direction opposite(Direction d) {
  switch (d) {
    case Direction::East: return Direction::West;
    case Direction::West: return Direction::East;
    case Direction::North: return Direction::South;
    case Direction::South: return Direction::North;
    default: return Direction::Local;
  }
}

bool is_y(Direction d) { return d == Direction::North || d == Direction::South; }

std::size_t vi(VNet v) { return static_cast<std::size_t>(v); }

const char* kind_name(UnitKind k) {
  switch (k) {
    case UnitKind::Core: return "core";
    case UnitKind::Mem: return "mem";
    default: return "mc";
  }
}

}  // namespace

Cycle deadlock_threshold(const Chip& chip) {
  const auto& c = chip.config;
  const Cycle stage = std::max({c.core.decode_latency, c.core.reg_alloc_latency, c.core.addr_gen_latency,
                                c.core.multiply_latency, c.mem.compare_latency + c.mem.accumulate_latency,
                                c.noc.hop_latency, c.channel.fixed_latency});
  return 10 * (chip.torus.diameter() + stage);
}

struct SimRun::Impl {
  Chip chip;
  const isa::Program& program;
  SimOptions opt;
  mapping::Mapper mapper;
  std::vector<NeuraCore> cores;
  std::vector<NeuraMem> mems;
  std::vector<MemoryController> mcs;
  std::vector<Router> routers;
  std::vector<std::vector<std::deque<Packet>>> mem_out;
  std::vector<std::vector<std::deque<Packet>>> mc_out;
  std::uint32_t out_depth = 8;
  mapping::Heatmap heatmap;

  Cycle now = 0;
  std::size_t next_instr = 0;
  std::uint32_t rr_core = 0;
  std::optional<std::uint32_t> group_core;
  std::uint64_t group_key = std::numeric_limits<std::uint64_t>::max();
  std::vector<std::uint32_t> dispatch_log;
  std::vector<std::uint64_t> core_mmh4;
  std::vector<std::uint64_t> core_haccs;

  std::vector<std::uint64_t> window_haccs;
  std::vector<std::uint64_t> window_applied;
  std::vector<bool> flush_started;
  std::uint32_t first_open = 0;
  bool drained = false;

  std::uint64_t flits = 0;
  std::uint64_t hops_total = 0;
  std::uint32_t hops_max = 0;
  std::uint64_t stall_dispatch = 0;
  std::uint64_t stall_window = 0;
  std::uint64_t hashpad_peak = 0;
  std::vector<Sample> series;

  bool progress = false;
  Cycle last_progress = 0;
  Cycle deadlock_k = 0;
  std::unique_ptr<detail::WorkerGroup> workers;

  Impl(const ChipConfig& cfg, const isa::Program& prog, const mapping::MapperConfig& mcfg, const SimOptions& o)
      : chip(build_chip(cfg)), program(prog), opt(o), mapper(with_targets(mcfg, cfg), prog.layout) {
    const auto& c = chip.config;
    out_depth = c.core.port_queue_depth;
    for (std::uint32_t i = 0; i < chip.n_cores(); ++i) {
      cores.emplace_back(i, c.core, &program, &program.layout, c.channel.granule_bytes);
    }
    const bool barrier = opt.eviction == EvictionMode::Barrier;
    for (std::uint32_t i = 0; i < chip.n_mems(); ++i) mems.emplace_back(i, c.mem, &program.layout, barrier);
    for (std::uint32_t i = 0; i < chip.n_mcs(); ++i) mcs.emplace_back(i, c.channel);
    for (std::uint32_t r = 0; r < chip.n_routers(); ++r) routers.emplace_back(r, chip.router_ports(r), c.noc.buffer_depth);
    mem_out.assign(chip.n_mems(), std::vector<std::deque<Packet>>(c.mem.n_ports));
    mc_out.assign(chip.n_mcs(), std::vector<std::deque<Packet>>(4));
    heatmap = mapping::Heatmap(chip.n_cores(), chip.n_mems());
    core_mmh4.assign(chip.n_cores(), 0);
    core_haccs.assign(chip.n_cores(), 0);

    window_haccs.assign(std::max<std::uint32_t>(program.n_windows, 1), 0);
    for (const auto& in : program.instrs) {
      if (in.window >= window_haccs.size()) throw SimulationError("MMH4 names window " + std::to_string(in.window) +
                                                                  " beyond the program's window count");
      window_haccs[in.window] += in.lanes();
    }
    window_applied.assign(window_haccs.size(), 0);
    flush_started.assign(window_haccs.size(), false);

    deadlock_k = opt.deadlock_cycles ? opt.deadlock_cycles : deadlock_threshold(chip);
    if (opt.host_threads == 0) throw ConfigError("host_threads must be >= 1");
    if (opt.sample_interval == 0) throw ConfigError("sample_interval must be >= 1");
    if (opt.host_threads > 1) workers = std::make_unique<detail::WorkerGroup>(opt.host_threads);
  }

  static mapping::MapperConfig with_targets(mapping::MapperConfig m, const ChipConfig& c) {
    m.n_targets = c.total_mems();
    m.validate();
    return m;
  }

  // Runs fn(i) for i in [0, n), split into contiguous blocks per worker.
  template <class Fn>
  void parallel_for(std::size_t n, Fn&& fn) {
    if (!workers || n < 2) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    const unsigned t = opt.host_threads;
    workers->run([&](unsigned w) {
      const std::size_t lo = n * w / t;
      const std::size_t hi = n * (w + 1) / t;
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }

  std::uint32_t unit_ports(UnitRef u) const {
    switch (u.kind) {
      case UnitKind::Core: return chip.config.core.n_ports;
      case UnitKind::Mem: return chip.config.mem.n_ports;
      default: return 4;
    }
  }

  std::deque<Packet>& outbox(UnitRef u, std::uint32_t p) {
    switch (u.kind) {
      case UnitKind::Core: return cores[u.index].ports()[p];
      case UnitKind::Mem: return mem_out[u.index][p];
      default: return mc_out[u.index][p];
    }
  }

  // --- evaluate -------------------------------------------------------------

  void step_units() {
    const std::size_t nc = cores.size();
    const std::size_t nm = mems.size();
    parallel_for(nc + nm + mcs.size(), [&](std::size_t i) {
      if (i < nc) {
        cores[i].step(now);
      } else if (i < nc + nm) {
        mems[i - nc].step(now);
      } else {
        mcs[i - nc - nm].step(now);
      }
    });
  }

  void evaluate_router(std::uint32_t r) {
    Router& R = routers[r];
    auto& moves = R.moves();
    moves.clear();
    if (R.occupancy() == 0) return;

    const std::uint32_t n_ports = R.n_ports();
    const auto& atts = chip.attachments[r];
    const std::uint32_t depth = R.depth();

    // Where each buffered head wants to go.
    std::vector<std::array<std::uint8_t, kVNets>> want(n_ports);
    for (std::uint32_t ip = 0; ip < n_ports; ++ip) {
      for (std::size_t v = 0; v < kVNets; ++v) {
        want[ip][v] = kNone;
        const auto& q = R.input(ip, static_cast<VNet>(v));
        if (q.empty()) continue;
        const Packet& p = q.front();
        if (p.dst_router == r) {
          want[ip][v] = kLocal;
          continue;
        }
        const auto dir = route(chip.torus, r, p.dst_router, [&](Direction d) {
          const auto nb = chip.torus.neighbor(r, d);
          return static_cast<std::uint32_t>(
              routers[nb].input(static_cast<std::uint32_t>(opposite(d)), static_cast<VNet>(v)).size());
        });
        want[ip][v] = static_cast<std::uint8_t>(dir);
      }
    }

    // Per attachment and vnet: how many flits the unit can take this cycle.
    std::vector<std::array<std::uint32_t, kVNets>> room(atts.size());
    for (std::size_t a = 0; a < atts.size(); ++a) {
      room[a].fill(0);
      const auto u = atts[a].unit;
      switch (u.kind) {
        case UnitKind::Core: room[a][vi(VNet::Resp)] = std::numeric_limits<std::uint32_t>::max(); break;
        case UnitKind::Mem: room[a][vi(VNet::Hacc)] = mems[u.index].inbox_free(); break;
        case UnitKind::Mc:
          room[a][vi(VNet::Req)] = mcs[u.index].read_free();
          room[a][vi(VNet::Wb)] = mcs[u.index].wb_free();
          break;
      }
    }

    std::vector<bool> in_used(n_ports, false);
    const std::uint32_t total = n_ports * static_cast<std::uint32_t>(kVNets);
    for (std::uint32_t o = 0; o < n_ports; ++o) {
      std::size_t att = atts.size();
      if (o >= kMeshPorts) {
        for (std::size_t a = 0; a < atts.size(); ++a) {
          if (o >= atts[a].first_port && o < atts[a].first_port + atts[a].n_ports) att = a;
        }
        if (att == atts.size()) continue;
      }
      const std::uint32_t start = R.rr(o);
      for (std::uint32_t k = 0; k < total; ++k) {
        const std::uint32_t idx = (start + k) % total;
        const std::uint32_t ip = idx / kVNets;
        const std::size_t v = idx % kVNets;
        if (in_used[ip] || want[ip][v] == kNone) continue;
        const Packet& p = R.input(ip, static_cast<VNet>(v)).front();
        if (o < kMeshPorts) {
          if (want[ip][v] != o) continue;
          const auto dir = static_cast<Direction>(o);
          const auto nb = chip.torus.neighbor(r, dir);
          const auto used = routers[nb].input(static_cast<std::uint32_t>(opposite(dir)), static_cast<VNet>(v)).size();
          const std::uint32_t free = depth - static_cast<std::uint32_t>(std::min<std::size_t>(used, depth));
          const bool entering_ring = ip >= kMeshPorts || (is_y(dir) && !p.dim_y);
          if (free < (entering_ring ? 2u : 1u)) continue;
        } else {
          if (want[ip][v] != kLocal || !(atts[att].unit == p.dst) || room[att][v] == 0) continue;
          --room[att][v];
        }
        moves.push_back({ip, static_cast<VNet>(v), o});
        in_used[ip] = true;
        R.rr(o) = (idx + 1) % total;
        break;
      }
    }
  }

  // --- commit ---------------------------------------------------------------

  void deliver(Packet&& p) {
    ++flits;
    hops_total += p.hops;
    hops_max = std::max(hops_max, p.hops);
    switch (p.dst.kind) {
      case UnitKind::Core: cores[p.dst.index].deliver_response(p.req_id); break;
      case UnitKind::Mem: mems[p.dst.index].deliver(p, now); break;
      case UnitKind::Mc:
        if (p.vnet == VNet::Req) {
          mcs[p.dst.index].deliver_read(p.src, p.req_id, p.addr, now);
        } else {
          mcs[p.dst.index].deliver_writeback({p.row, p.col, p.hacc.data, p.window});
        }
        break;
    }
  }

  void commit_moves() {
    for (auto& R : routers) {
      for (const auto& m : R.moves()) {
        auto& q = R.input(m.in_port, m.vnet);
        Packet p = std::move(q.front());
        q.pop_front();
        R.popped();
        progress = true;
        if (m.out_port < kMeshPorts) {
          const auto dir = static_cast<Direction>(m.out_port);
          const auto nb = chip.torus.neighbor(R.id(), dir);
          ++p.hops;
          p.dim_y = is_y(dir);
          routers[nb].input(static_cast<std::uint32_t>(opposite(dir)), m.vnet).push_back(std::move(p));
          routers[nb].pushed();
        } else {
          deliver(std::move(p));
        }
      }
      R.moves().clear();
    }
  }

  void inject() {
    for (std::uint32_t r = 0; r < routers.size(); ++r) {
      Router& R = routers[r];
      for (const auto& a : chip.attachments[r]) {
        for (std::uint32_t p = 0; p < a.n_ports; ++p) {
          auto& q = outbox(a.unit, p);
          if (q.empty()) continue;
          auto& in = R.input(a.first_port + p, q.front().vnet);
          if (in.size() >= R.depth()) continue;
          Packet pk = std::move(q.front());
          q.pop_front();
          pk.injected = now;
          in.push_back(std::move(pk));
          R.pushed();
          progress = true;
        }
      }
    }
  }

  static std::deque<Packet>* roomiest(std::vector<std::deque<Packet>>& ports, std::uint32_t depth) {
    std::deque<Packet>* best = nullptr;
    for (auto& q : ports) {
      if (q.size() < depth && (!best || q.size() < best->size())) best = &q;
    }
    return best;
  }

  void collect_unit_outputs() {
    const std::uint32_t n_mcs = chip.n_mcs();
    const std::uint64_t granule = chip.config.channel.granule_bytes;
    for (std::uint32_t c = 0; c < cores.size(); ++c) {
      auto& core = cores[c];
      auto& ports = core.ports();
      const UnitRef self{UnitKind::Core, c};
      for (const auto& [rid, addr] : core.request_queue()) {
        Packet p;
        p.vnet = VNet::Req;
        const auto mc = static_cast<std::uint32_t>((addr / granule) % n_mcs);
        p.dst = {UnitKind::Mc, mc};
        p.dst_router = chip.mc_router[mc];
        p.src = self;
        p.addr = addr;
        p.req_id = rid;
        auto* q = roomiest(ports, chip.config.core.port_queue_depth);
        if (!q) throw SimulationError("core " + std::to_string(c) + " produced a request with no port room");
        q->push_back(p);
        progress = true;
      }
      core.request_queue().clear();
      for (const auto& h : core.staged_haccs()) {
        const auto target = mapper.map(h.hacc.tag, h.hacc.counter + 1);
        heatmap.add(c, target);
        ++core_haccs[c];
        Packet p;
        p.vnet = VNet::Hacc;
        p.dst = {UnitKind::Mem, target};
        p.dst_router = chip.mem_router[target];
        p.src = self;
        p.hacc = h.hacc;
        p.window = h.window;
        auto* q = roomiest(ports, chip.config.core.port_queue_depth);
        if (!q) throw SimulationError("core " + std::to_string(c) + " produced a HACC with no port room");
        q->push_back(p);
        progress = true;
      }
      core.staged_haccs().clear();
    }

    const bool dedicated = chip.config.noc.dedicated_writeback;
    for (std::uint32_t m = 0; m < mems.size(); ++m) {
      auto& wbs = mems[m].writebacks();
      const auto mc = chip.mem_tile[m];
      while (!wbs.empty()) {
        if (dedicated) {
          if (mcs[mc].wb_free() == 0) break;
          mcs[mc].deliver_writeback(wbs.front());
        } else {
          auto* q = roomiest(mem_out[m], out_depth);
          if (!q) break;
          Packet p;
          p.vnet = VNet::Wb;
          p.dst = {UnitKind::Mc, mc};
          p.dst_router = chip.mc_router[mc];
          p.src = {UnitKind::Mem, m};
          p.row = wbs.front().row;
          p.col = wbs.front().col;
          p.hacc.data = wbs.front().value;
          p.window = wbs.front().window;
          q->push_back(p);
        }
        wbs.pop_front();
        progress = true;
      }
    }

    for (std::uint32_t m = 0; m < mcs.size(); ++m) {
      auto& resp = mcs[m].responses();
      while (!resp.empty()) {
        auto* q = roomiest(mc_out[m], out_depth);
        if (!q) break;
        const auto [dst, rid] = resp.front();
        Packet p;
        p.vnet = VNet::Resp;
        p.dst = dst;
        p.dst_router = chip.core_router[dst.index];
        p.src = {UnitKind::Mc, m};
        p.req_id = rid;
        q->push_back(p);
        resp.pop_front();
        progress = true;
      }
    }
  }

  void advance_windows() {
    for (auto& m : mems) {
      for (const auto& [w, n] : m.take_applied()) window_applied[w] += n;
    }
    const bool barrier = opt.eviction == EvictionMode::Barrier;
    while (first_open < window_haccs.size()) {
      const auto w = first_open;
      if (window_applied[w] < window_haccs[w]) break;
      if (barrier) {
        const bool busy = std::any_of(mems.begin(), mems.end(), [](const NeuraMem& m) { return m.flushing(); });
        if (!flush_started[w]) {
          if (busy) break;
          for (auto& m : mems) m.begin_flush(w);
          flush_started[w] = true;
          progress = true;
          break;
        }
        if (busy) break;
      }
      ++first_open;
      progress = true;
    }
    if (first_open == window_haccs.size() && !drained) {
      for (auto& mc : mcs) mc.drain();
      drained = true;
    }
  }

  void dispatch() {
    const auto& instrs = program.instrs;
    std::vector<bool> took(cores.size(), false);
    const auto n = static_cast<std::uint32_t>(cores.size());
    while (next_instr < instrs.size()) {
      const auto& in = instrs[next_instr];
      if (in.window >= first_open + 2) {
        ++stall_window;
        break;
      }
      const std::uint64_t key = in.base_addr + in.a_data_addr;
      std::optional<std::uint32_t> pick;
      if (group_core && key == group_key) {
        if (!took[*group_core] && cores[*group_core].can_accept()) pick = group_core;
      } else {
        for (std::uint32_t k = 0; k < n; ++k) {
          const std::uint32_t c = (rr_core + k) % n;
          if (!took[c] && cores[c].can_accept()) {
            pick = c;
            rr_core = (c + 1) % n;
            break;
          }
        }
      }
      if (!pick) {
        ++stall_dispatch;
        break;
      }
      cores[*pick].accept(in, in.window, now);
      took[*pick] = true;
      group_core = pick;
      group_key = key;
      dispatch_log.push_back(*pick);
      ++core_mmh4[*pick];
      ++next_instr;
      progress = true;
    }
  }

  std::uint64_t occupancy() const {
    std::uint64_t s = 0;
    for (const auto& m : mems) s += m.occupancy();
    return s;
  }

  std::uint64_t flits_in_network() const {
    std::uint64_t s = 0;
    for (const auto& r : routers) s += r.occupancy();
    return s;
  }

  Sample sample() const {
    Sample s;
    s.cycle = now;
    for (const auto& mc : mcs) s.inflight_reads += mc.outstanding(now);
    s.hashpad_occupancy = occupancy();
    s.flits_in_network = flits_in_network();
    for (const auto& c : cores) s.mmh4_retired += c.stats().retired;
    for (const auto& m : mems) s.haccs_applied += m.stats().haccs;
    return s;
  }

  bool finished() const {
    if (next_instr < program.instrs.size() || first_open < window_haccs.size()) return false;
    for (const auto& c : cores) {
      if (!c.idle()) return false;
    }
    for (const auto& m : mems) {
      if (!m.idle()) return false;
    }
    for (const auto& q : mem_out) {
      for (const auto& p : q) {
        if (!p.empty()) return false;
      }
    }
    for (const auto& q : mc_out) {
      for (const auto& p : q) {
        if (!p.empty()) return false;
      }
    }
    for (const auto& mc : mcs) {
      if (!mc.idle(now)) return false;
    }
    return flits_in_network() == 0;
  }

  std::string dump() const {
    std::ostringstream os;
    os << "deadlock at cycle " << now << " (no progress for " << (now - last_progress) << " cycles)\n";
    os << "dispatched " << next_instr << "/" << program.instrs.size() << ", open window " << first_open << "/"
       << window_haccs.size() << "\n";
    for (std::uint32_t c = 0; c < cores.size(); ++c) {
      if (!cores[c].idle()) {
        os << "core " << c << ": outstanding requests " << cores[c].outstanding_requests() << ", retired "
           << cores[c].stats().retired << "/" << cores[c].stats().accepted << "\n";
      }
    }
    for (std::uint32_t m = 0; m < mems.size(); ++m) {
      if (!mems[m].idle()) {
        os << "mem " << m << ": inbox free " << mems[m].inbox_free() << ", occupancy " << mems[m].occupancy()
           << ", pending writebacks " << const_cast<NeuraMem&>(mems[m]).writebacks().size() << "\n";
      }
    }
    for (std::uint32_t m = 0; m < mcs.size(); ++m) {
      os << "mc " << m << ": outstanding " << mcs[m].outstanding(now) << ", read room " << mcs[m].read_free()
         << ", wb room " << mcs[m].wb_free() << "\n";
    }
    for (const auto& r : routers) {
      if (r.occupancy() == 0) continue;
      os << "router " << r.id() << ": " << r.occupancy() << " flits";
      for (std::uint32_t p = 0; p < r.n_ports(); ++p) {
        for (std::size_t v = 0; v < kVNets; ++v) {
          const auto& q = r.input(p, static_cast<VNet>(v));
          if (q.empty()) continue;
          os << " [port " << p << " vnet " << v << ": " << q.size() << " head->" << kind_name(q.front().dst.kind)
             << q.front().dst.index << "]";
        }
      }
      os << "\n";
    }
    return os.str();
  }

  void cycle() {
    progress = false;
    step_units();
    parallel_for(routers.size(), [&](std::size_t r) { evaluate_router(static_cast<std::uint32_t>(r)); });

    commit_moves();
    inject();
    collect_unit_outputs();
    advance_windows();
    dispatch();

    for (const auto& c : cores) progress = progress || c.progressed();
    for (const auto& m : mems) progress = progress || m.progressed();
    for (const auto& mc : mcs) progress = progress || mc.progressed();
    hashpad_peak = std::max(hashpad_peak, occupancy());
    if (progress) last_progress = now;
    if (now % opt.sample_interval == 0) series.push_back(sample());
  }

  SimResult run() {
    const auto t0 = std::chrono::steady_clock::now();
    while (!finished()) {
      cycle();
      if (now - last_progress > deadlock_k) throw SimulationError(dump());
      if (opt.max_cycles && now >= opt.max_cycles) {
        throw SimulationError("simulation exceeded " + std::to_string(opt.max_cycles) + " cycles");
      }
      ++now;
    }
    if (series.empty() || series.back().cycle != now) series.push_back(sample());
    SimResult out;
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.stats = collect();
    out.c = assemble();
    out.heatmap = heatmap;
    out.gamma = mapper.state();
    out.dispatch_log = dispatch_log;
    check(out);
    return out;
  }

  SimStats collect() const {
    SimStats s;
    s.config = chip.config.name;
    s.mapper = mapping::to_string(mapper.config().strategy);
    s.eviction = to_string(opt.eviction);
    s.seed = mapper.config().rng_seed;
    s.cycles = now;
    s.mmh4_total = program.instrs.size();
    s.total_fma = program.total_fma;
    s.total_out_nnz = program.total_out_nnz;
    s.windows = static_cast<std::uint32_t>(window_haccs.size());
    s.mapper_assignments = mapper.mapped();
    for (const auto& c : cores) {
      const auto& cs = c.stats();
      s.mmh4_retired += cs.retired;
      s.haccs_emitted += cs.haccs_emitted;
      s.stall_reg += cs.stall_reg;
      s.stall_operand += cs.stall_operand;
      s.stall_port += cs.stall_port;
      s.cpi_mmh4_full.merge(cs.cpi_full);
      s.cpi_mmh4_ragged.merge(cs.cpi_ragged);
    }
    for (const auto& m : mems) {
      const auto& ms = m.stats();
      s.haccs_applied += ms.haccs;
      s.inserts += ms.inserts;
      s.updates += ms.updates;
      s.evictions += ms.evictions;
      s.probes += ms.probes;
      s.stall_wb += ms.stall_wb;
      s.hashpad_peak_unit = std::max(s.hashpad_peak_unit, ms.max_occupancy);
      s.hashpad_final += m.occupancy();
      s.cpi_hacc.merge(ms.cpi);
      s.mem_haccs.push_back(ms.haccs);
    }
    for (const auto& mc : mcs) {
      const auto& st = mc.stats();
      s.writebacks_received += st.writebacks;
      s.mem_read_requests += st.read_requests;
      s.mem_read_transactions += st.read_transactions;
      s.mem_coalesced += st.coalesced;
      s.mem_write_transactions += st.write_transactions;
      s.bytes_read += st.bytes_read;
      s.bytes_written += st.bytes_written;
    }
    s.stall_dispatch = stall_dispatch;
    s.stall_window = stall_window;
    s.hashpad_peak = hashpad_peak;
    s.flits = flits;
    s.hops_total = hops_total;
    s.hops_max = hops_max;
    s.core_haccs = core_haccs;
    s.core_mmh4 = core_mmh4;
    s.series = series;
    return s;
  }

  matio::CsrMatrix assemble() const {
    std::vector<Writeback> all;
    for (const auto& mc : mcs) all.insert(all.end(), mc.written().begin(), mc.written().end());
    std::sort(all.begin(), all.end(),
              [](const Writeback& a, const Writeback& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
    matio::CsrMatrix c;
    c.n_rows = program.n_rows;
    c.n_cols = program.n_cols;
    c.row_offsets.assign(std::size_t{c.n_rows} + 1, 0);
    for (std::size_t i = 0; i < all.size(); ++i) {
      const auto& w = all[i];
      if (i > 0 && all[i - 1].row == w.row && all[i - 1].col == w.col) {
        throw SimulationError("output (" + std::to_string(w.row) + ", " + std::to_string(w.col) +
                              ") was written back twice");
      }
      if (w.row >= c.n_rows || w.col >= c.n_cols) {
        throw SimulationError("write-back to (" + std::to_string(w.row) + ", " + std::to_string(w.col) +
                              ") is outside the output");
      }
      ++c.row_offsets[w.row + 1];
      c.col_indices.push_back(w.col);
      c.values.push_back(w.value);
    }
    for (Index r = 0; r < c.n_rows; ++r) c.row_offsets[r + 1] += c.row_offsets[r];
    return c;
  }

  void check(const SimResult& r) const {
    const auto& s = r.stats;
    std::vector<std::string> bad;
    auto need = [&](bool ok, const std::string& what) {
      if (!ok) bad.push_back(what);
    };
    auto eq = [&](std::uint64_t a, std::uint64_t b, const std::string& what) {
      need(a == b, what + " (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
    };
    eq(s.mmh4_retired, s.mmh4_total, "retired MMH4s != program MMH4s");
    eq(s.haccs_emitted, s.total_fma, "HACCs emitted != total FMAs");
    eq(s.haccs_applied, s.haccs_emitted, "HACCs consumed != HACCs emitted");
    eq(s.evictions, s.total_out_nnz, "evictions != output nonzeros");
    eq(s.writebacks_received, s.evictions, "write-backs received != evictions");
    eq(s.hashpad_final, 0, "HashPad not empty at exit");
    eq(s.mapper_assignments, s.haccs_emitted, "mapper assignments != HACCs emitted");
    eq(s.cpi_hacc.count, s.haccs_applied, "HACC CPI mass != HACCs applied");
    eq(s.cpi_mmh4_full.count + s.cpi_mmh4_ragged.count, s.mmh4_retired, "MMH4 CPI mass != MMH4s retired");
    eq(r.c.nnz(), s.total_out_nnz, "assembled nonzeros != output nonzeros");
    if (!bad.empty()) {
      std::string msg = "conservation violated:";
      for (const auto& b : bad) msg += "\n  " + b;
      throw SimulationError(msg);
    }
  }
};

SimRun::SimRun(const ChipConfig& chip, const isa::Program& program, const mapping::MapperConfig& mapper,
               const SimOptions& options)
    : impl_(std::make_unique<Impl>(chip, program, mapper, options)) {}

SimRun::~SimRun() = default;

SimResult SimRun::run_to_completion() { return impl_->run(); }

Cycle SimRun::cycle() const noexcept { return impl_->now; }

const Chip& SimRun::chip() const noexcept { return impl_->chip; }

isa::Program prepare_spgemm(const matio::CsrMatrix& a, const matio::CsrMatrix& b, const ChipConfig& chip,
                            const SimOptions& options) {
  if (a.n_cols != b.n_rows) {
    throw DimensionError("A is " + std::to_string(a.n_rows) + "x" + std::to_string(a.n_cols) + " but B is " +
                         std::to_string(b.n_rows) + "x" + std::to_string(b.n_cols));
  }
  if (!(options.spad_fraction > 0 && options.spad_fraction <= 1)) throw ConfigError("spad_fraction must be in (0, 1]");
  const auto plan = oracle::symbolic_pass(a, b);
  oracle::WindowParams wp;
  wp.spad_budget = std::max<std::uint64_t>(
      2, static_cast<std::uint64_t>(std::floor(static_cast<double>(chip.total_hashlines()) * options.spad_fraction)));
  const auto windows = oracle::plan_windows(plan, wp);
  const auto layout = isa::TagLayout::for_dims(a.n_rows, b.n_cols);
  return isa::lower_spgemm(matio::csr_to_csc(a), b, plan, layout, &windows);
}

SimResult simulate_spgemm(const matio::CsrMatrix& a, const matio::CsrMatrix& b, const ChipConfig& chip,
                          const mapping::MapperConfig& mapper, const SimOptions& options) {
  const auto program = prepare_spgemm(a, b, chip, options);
  SimRun run(chip, program, mapper, options);
  return run.run_to_completion();
}

}  // namespace neura::engine
