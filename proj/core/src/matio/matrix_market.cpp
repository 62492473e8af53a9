#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

#include "neura/matio.hpp"

namespace neura::matio {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, std::size_t line_no, const char* what) {
  T value{};
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError(line_no, std::string("bad ") + what + " '" + std::string(tok) + "'");
  }
  return value;
}

enum class Field { Real, Integer, Pattern };
enum class Symmetry { General, Symmetric, SkewSymmetric };

}  // namespace

CooMatrix parse_matrix_market(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) throw ParseError(1, "empty input");
  ++line_no;
  const auto header = split_ws(line);
  if (header.size() != 5 || lower(header[0]) != "%%matrixmarket") {
    throw ParseError(line_no, "missing %%MatrixMarket banner");
  }
  if (lower(header[1]) != "matrix") throw ParseError(line_no, "object must be 'matrix'");
  if (lower(header[2]) != "coordinate") {
    throw ParseError(line_no, "only coordinate format is supported, got '" + std::string(header[2]) + "'");
  }

  Field field;
  const auto f = lower(header[3]);
  if (f == "real" || f == "double") field = Field::Real;
  else if (f == "integer") field = Field::Integer;
  else if (f == "pattern") field = Field::Pattern;
  else throw ParseError(line_no, "unsupported field '" + f + "'");

  Symmetry sym;
  const auto s = lower(header[4]);
  if (s == "general") sym = Symmetry::General;
  else if (s == "symmetric") sym = Symmetry::Symmetric;
  else if (s == "skew-symmetric") sym = Symmetry::SkewSymmetric;
  else throw ParseError(line_no, "unsupported symmetry '" + s + "'");

  // Size line: first non-comment, non-blank line.
  std::vector<std::string_view> size_tok;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    size_tok = split_ws(line);
    if (size_tok.empty()) continue;
    break;
  }
  if (size_tok.size() != 3) throw ParseError(line_no, "expected 'rows cols nnz' size line");

  CooMatrix m;
  const auto rows = parse_number<std::uint64_t>(size_tok[0], line_no, "row count");
  const auto cols = parse_number<std::uint64_t>(size_tok[1], line_no, "column count");
  const auto declared = parse_number<std::uint64_t>(size_tok[2], line_no, "entry count");
  if (rows > std::numeric_limits<Index>::max() || cols > std::numeric_limits<Index>::max()) {
    throw ParseError(line_no, "dimensions exceed 32-bit index range");
  }
  m.n_rows = static_cast<Index>(rows);
  m.n_cols = static_cast<Index>(cols);
  m.entries.reserve(sym == Symmetry::General ? declared : 2 * declared);

  std::uint64_t seen = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::size_t want = field == Field::Pattern ? 2 : 3;
    if (tok.size() < want) throw ParseError(line_no, "too few fields in entry");
    const auto r1 = parse_number<std::uint64_t>(tok[0], line_no, "row index");
    const auto c1 = parse_number<std::uint64_t>(tok[1], line_no, "column index");
    if (r1 == 0 || r1 > rows || c1 == 0 || c1 > cols) {
      throw ParseError(line_no, "index (" + std::string(tok[0]) + "," + std::string(tok[1]) +
                                    ") outside declared bounds");
    }
    double v = 1.0;
    if (field == Field::Real) v = parse_number<double>(tok[2], line_no, "value");
    else if (field == Field::Integer) v = static_cast<double>(parse_number<std::int64_t>(tok[2], line_no, "value"));

    const auto r = static_cast<Index>(r1 - 1);
    const auto c = static_cast<Index>(c1 - 1);
    m.entries.push_back({r, c, v});
    if (sym != Symmetry::General && r != c) {
      m.entries.push_back({c, r, sym == Symmetry::SkewSymmetric ? -v : v});
    }
    ++seen;
  }
  if (seen != declared) {
    throw ParseError(line_no, "declared " + std::to_string(declared) + " entries, found " + std::to_string(seen));
  }
  m.normalize();
  return m;
}

CooMatrix parse_matrix_market(const std::string& text) {
  std::istringstream in(text);
  return parse_matrix_market(in);
}

CooMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_matrix_market(in);
}

void write_matrix_market(std::ostream& out, const CooMatrix& m) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.n_rows << ' ' << m.n_cols << ' ' << m.entries.size() << '\n';
  char buf[64];
  for (const auto& e : m.entries) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, e.value);
    out << (e.row + 1) << ' ' << (e.col + 1) << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf)) << '\n';
  }
}

void write_matrix_market(const std::string& path, const CooMatrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_matrix_market(out, m);
}

CooMatrix read_edge_list(std::istream& in, bool symmetrize) {
  CooMatrix m;
  std::string line;
  std::size_t line_no = 0;
  Index max_id = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line[0] == '%') continue;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() < 2) throw ParseError(line_no, "expected 'src dst'");
    const auto u = parse_number<Index>(tok[0], line_no, "node id");
    const auto v = parse_number<Index>(tok[1], line_no, "node id");
    max_id = std::max({max_id, u, v});
    any = true;
    m.entries.push_back({u, v, 1.0});
    if (symmetrize && u != v) m.entries.push_back({v, u, 1.0});
  }
  m.n_rows = m.n_cols = any ? max_id + 1 : 0;
  m.normalize();
  // Repeated edges collapse to one pattern entry.
  for (auto& e : m.entries) e.value = 1.0;
  return m;
}

CooMatrix read_edge_list(const std::string& path, bool symmetrize) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_edge_list(in, symmetrize);
}

CooMatrix load_matrix(const std::string& path, bool symmetrize_edge_lists) {
  if (path.size() >= 4 && lower(path.substr(path.size() - 4)) == ".mtx") return read_matrix_market(path);
  return read_edge_list(path, symmetrize_edge_lists);
}

}  // namespace neura::matio
