#include <bit>
#include <charconv>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "neura/isa.hpp"

namespace neura::isa {

namespace {

constexpr const char* kTextMagic = "NEURATRACE";
constexpr char kBinaryMagic[8] = {'N', 'E', 'U', 'R', 'A', 'B', 'I', 'N'};

std::string hex(std::uint64_t v) {
  char buf[20];
  auto r = std::to_chars(buf, buf + sizeof buf, v, 16);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_field(const std::string& tok, int base, std::size_t line, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v, base);
  if (ec != std::errc() || p != tok.data() + tok.size()) {
    throw ParseError(line, std::string("bad ") + what + " '" + tok + "'");
  }
  return v;
}

}  // namespace

void write_trace(std::ostream& out, const Program& program) {
  out << kTextMagic << ' ' << kTraceVersion << '\n';
  out << "layout " << program.layout.row_bits << ' ' << program.layout.col_bits << '\n';
  out << "dims " << program.n_rows << ' ' << program.n_cols << '\n';
  out << "plan " << program.total_fma << ' ' << program.total_out_nnz << ' ' << program.n_windows << '\n';
  for (const auto& in : program.instrs) {
    out << "mmh4 " << hex(in.base_addr) << ' ' << hex(in.a_data_addr) << ' ' << hex(in.b_col_ind_addr) << ' '
        << hex(in.b_data_addr) << ' ' << hex(in.roll_counter_addr) << ' ' << in.k << ' ' << in.window << ' '
        << unsigned{in.n_a} << ' ' << unsigned{in.n_b};
    for (unsigned l = 0; l < 4; ++l) out << ' ' << in.a_rows[l];
    out << '\n';
  }
  out << "end " << program.instrs.size() << '\n';
  if (!out) throw IoError("failed writing trace");
}

void read_trace(std::istream& in, Program& program) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&](const char* expected) -> std::vector<std::string> {
    if (!std::getline(in, line)) throw ParseError(lineno + 1, std::string("truncated trace, expected ") + expected);
    ++lineno;
    std::istringstream ss(line);
    std::vector<std::string> toks;
    for (std::string t; ss >> t;) toks.push_back(t);
    return toks;
  };

  auto head = next("header");
  if (head.size() != 2 || head[0] != kTextMagic) throw ParseError(lineno, "not a NEURATRACE file");
  const int version = parse_field<int>(head[1], 10, lineno, "version");
  if (version != kTraceVersion) {
    throw ParseError(lineno, "trace version " + head[1] + " unsupported (expected " + std::to_string(kTraceVersion) + ")");
  }
  auto lay = next("layout");
  if (lay.size() != 3 || lay[0] != "layout") throw ParseError(lineno, "expected 'layout <row_bits> <col_bits>'");
  program.layout = {parse_field<unsigned>(lay[1], 10, lineno, "row_bits"), parse_field<unsigned>(lay[2], 10, lineno, "col_bits")};
  try {
    program.layout.validate();
  } catch (const ConfigError& e) {
    throw ParseError(lineno, e.what());
  }
  auto dims = next("dims");
  if (dims.size() != 3 || dims[0] != "dims") throw ParseError(lineno, "expected 'dims <rows> <cols>'");
  program.n_rows = parse_field<Index>(dims[1], 10, lineno, "rows");
  program.n_cols = parse_field<Index>(dims[2], 10, lineno, "cols");
  auto plan = next("plan");
  if (plan.size() != 4 || plan[0] != "plan") throw ParseError(lineno, "expected 'plan <fma> <out_nnz> <windows>'");
  program.total_fma = parse_field<std::uint64_t>(plan[1], 10, lineno, "fma");
  program.total_out_nnz = parse_field<std::uint64_t>(plan[2], 10, lineno, "out_nnz");
  program.n_windows = parse_field<std::uint32_t>(plan[3], 10, lineno, "windows");

  program.instrs.clear();
  for (;;) {
    auto toks = next("record or 'end'");
    if (toks.empty()) continue;
    const std::size_t record = program.instrs.size();
    if (toks[0] == "end") {
      if (toks.size() != 2 || parse_field<std::size_t>(toks[1], 10, lineno, "count") != record) {
        throw ParseError(lineno, "trailer count does not match " + std::to_string(record) + " records");
      }
      return;
    }
    const std::string where = "record " + std::to_string(record);
    if (toks[0] != "mmh4" || toks.size() != 14) throw ParseError(lineno, where + ": malformed mmh4 record");
    Mmh4Instr m;
    m.base_addr = parse_field<std::uint64_t>(toks[1], 16, lineno, "base address");
    m.a_data_addr = parse_field<std::uint64_t>(toks[2], 16, lineno, "a_data offset");
    m.b_col_ind_addr = parse_field<std::uint64_t>(toks[3], 16, lineno, "b_col_ind offset");
    m.b_data_addr = parse_field<std::uint64_t>(toks[4], 16, lineno, "b_data offset");
    m.roll_counter_addr = parse_field<std::uint64_t>(toks[5], 16, lineno, "roll_counter offset");
    m.k = parse_field<Index>(toks[6], 10, lineno, "k");
    m.window = parse_field<std::uint32_t>(toks[7], 10, lineno, "window");
    const auto n_a = parse_field<unsigned>(toks[8], 10, lineno, "n_a");
    const auto n_b = parse_field<unsigned>(toks[9], 10, lineno, "n_b");
    if (n_a > 4 || n_b > 4) throw ParseError(lineno, where + ": lane count above 4");
    m.n_a = static_cast<std::uint8_t>(n_a);
    m.n_b = static_cast<std::uint8_t>(n_b);
    for (unsigned l = 0; l < 4; ++l) m.a_rows[l] = parse_field<Index>(toks[10 + l], 10, lineno, "a row");
    program.instrs.push_back(m);
  }
}

namespace {

template <class T>
void put(std::uint8_t*& p, T v) {
  // Records are little-endian regardless of host order.
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) *p++ = bytes[sizeof(T) - 1 - i];
  } else {
    std::memcpy(p, &v, sizeof(T));
    p += sizeof(T);
  }
}

template <class T>
T get(const std::uint8_t*& p) {
  std::array<std::uint8_t, sizeof(T)> bytes;
  std::memcpy(bytes.data(), p, sizeof(T));
  p += sizeof(T);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace

std::array<std::uint8_t, kMmh4RecordBytes> encode_mmh4(const Mmh4Instr& in) {
  std::array<std::uint8_t, kMmh4RecordBytes> rec{};
  std::uint8_t* p = rec.data();
  put(p, static_cast<std::uint8_t>(Opcode::Mmh4));
  put(p, in.base_addr);
  put(p, in.a_data_addr);
  put(p, in.b_col_ind_addr);
  put(p, in.b_data_addr);
  put(p, in.roll_counter_addr);
  for (const Index r : in.a_rows) put(p, r);
  put(p, in.n_a);
  put(p, in.n_b);
  put(p, in.window);
  put(p, in.k);
  return rec;
}

Mmh4Instr decode_mmh4(std::span<const std::uint8_t> record) {
  if (record.size() != kMmh4RecordBytes) throw ParseError(0, "MMH4 record has wrong size");
  const std::uint8_t* p = record.data();
  if (get<std::uint8_t>(p) != static_cast<std::uint8_t>(Opcode::Mmh4)) throw ParseError(0, "not an MMH4 opcode");
  Mmh4Instr in;
  in.base_addr = get<std::uint64_t>(p);
  in.a_data_addr = get<std::uint64_t>(p);
  in.b_col_ind_addr = get<std::uint64_t>(p);
  in.b_data_addr = get<std::uint64_t>(p);
  in.roll_counter_addr = get<std::uint64_t>(p);
  for (auto& r : in.a_rows) r = get<Index>(p);
  in.n_a = get<std::uint8_t>(p);
  in.n_b = get<std::uint8_t>(p);
  in.window = get<std::uint32_t>(p);
  in.k = get<Index>(p);
  if (in.n_a > 4 || in.n_b > 4) throw ParseError(0, "MMH4 lane count above 4");
  return in;
}

std::array<std::uint8_t, kHaccRecordBytes> encode_hacc(const HaccInstr& in) {
  std::array<std::uint8_t, kHaccRecordBytes> rec{};
  std::uint8_t* p = rec.data();
  put(p, static_cast<std::uint8_t>(Opcode::Hacc));
  put(p, in.tag);
  put(p, in.data);
  put(p, in.counter);
  return rec;
}

HaccInstr decode_hacc(std::span<const std::uint8_t> record) {
  if (record.size() != kHaccRecordBytes) throw ParseError(0, "HACC record has wrong size");
  const std::uint8_t* p = record.data();
  if (get<std::uint8_t>(p) != static_cast<std::uint8_t>(Opcode::Hacc)) throw ParseError(0, "not a HACC opcode");
  HaccInstr in;
  in.tag = get<Tag32>(p);
  in.data = get<double>(p);
  in.counter = get<std::uint32_t>(p);
  return in;
}

void write_binary_trace(std::ostream& out, const Program& program) {
  std::array<std::uint8_t, 8 + 4 + 4 + 4 + 4 + 8 + 8 + 4 + 8> head{};
  std::uint8_t* p = head.data();
  std::memcpy(p, kBinaryMagic, 8);
  p += 8;
  put(p, static_cast<std::uint32_t>(kTraceVersion));
  put(p, static_cast<std::uint32_t>(program.layout.row_bits));
  put(p, program.n_rows);
  put(p, program.n_cols);
  put(p, program.total_fma);
  put(p, program.total_out_nnz);
  put(p, program.n_windows);
  put(p, static_cast<std::uint64_t>(program.instrs.size()));
  out.write(reinterpret_cast<const char*>(head.data()), head.size());
  for (const auto& in : program.instrs) {
    const auto rec = encode_mmh4(in);
    out.write(reinterpret_cast<const char*>(rec.data()), rec.size());
  }
  if (!out) throw IoError("failed writing binary trace");
}

void read_binary_trace(std::istream& in, Program& program) {
  std::array<std::uint8_t, 8 + 4 + 4 + 4 + 4 + 8 + 8 + 4 + 8> head{};
  if (!in.read(reinterpret_cast<char*>(head.data()), head.size())) throw ParseError(0, "truncated binary trace header");
  if (std::memcmp(head.data(), kBinaryMagic, 8) != 0) throw ParseError(0, "not a binary NEURATRACE file");
  const std::uint8_t* p = head.data() + 8;
  const auto version = get<std::uint32_t>(p);
  if (version != static_cast<std::uint32_t>(kTraceVersion)) {
    throw ParseError(0, "binary trace version " + std::to_string(version) + " unsupported");
  }
  const auto row_bits = get<std::uint32_t>(p);
  program.layout = {row_bits, 32 - row_bits};
  program.layout.validate();
  program.n_rows = get<Index>(p);
  program.n_cols = get<Index>(p);
  program.total_fma = get<std::uint64_t>(p);
  program.total_out_nnz = get<std::uint64_t>(p);
  program.n_windows = get<std::uint32_t>(p);
  const auto count = get<std::uint64_t>(p);
  program.instrs.clear();
  std::array<std::uint8_t, kMmh4RecordBytes> rec;
  for (std::uint64_t r = 0; r < count; ++r) {
    if (!in.read(reinterpret_cast<char*>(rec.data()), rec.size())) {
      throw ParseError(0, "binary trace truncated at record " + std::to_string(r));
    }
    try {
      program.instrs.push_back(decode_mmh4(rec));
    } catch (const ParseError& e) {
      throw ParseError(0, "record " + std::to_string(r) + ": " + e.what());
    }
  }
}

}  // namespace neura::isa
