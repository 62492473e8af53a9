#include <algorithm>
#include <bit>
#include <cstring>
#include <sstream>

#include <json.hpp>

#include "neura/isa.hpp"

namespace neura::isa {

void TagLayout::validate() const {
  if (row_bits == 0 || col_bits == 0 || row_bits + col_bits != 32) {
    throw ConfigError("tag layout must split 32 bits into two non-empty fields, got " + std::to_string(row_bits) +
                      "/" + std::to_string(col_bits));
  }
}

namespace {

unsigned bits_for(Index n) {
  // Number of bits needed to hold indices 0..n-1.
  return n <= 1 ? 1u : static_cast<unsigned>(std::bit_width(static_cast<std::uint32_t>(n - 1)));
}

}  // namespace

TagLayout TagLayout::for_dims(Index n_rows, Index n_cols) {
  const unsigned rb = bits_for(n_rows);
  const unsigned cb = bits_for(n_cols);
  if (rb <= 16 && cb <= 16) return {};
  if (rb + cb > 32) {
    throw LoweringError("a " + std::to_string(n_rows) + "x" + std::to_string(n_cols) +
                        " output needs " + std::to_string(rb + cb) + " tag bits; no 32-bit layout fits");
  }
  const unsigned row_bits = rb > 16 ? rb : 32 - cb;
  return {row_bits, 32 - row_bits};
}

Tag32 encode_tag(Index i, Index j, const TagLayout& layout) {
  const std::uint64_t row_lim = std::uint64_t{1} << layout.row_bits;
  const std::uint64_t col_lim = std::uint64_t{1} << layout.col_bits;
  if (i >= row_lim || j >= col_lim) {
    throw LoweringError("(" + std::to_string(i) + "," + std::to_string(j) + ") does not fit tag layout " +
                        std::to_string(layout.row_bits) + "/" + std::to_string(layout.col_bits) +
                        "; use a wider row or column field");
  }
  return static_cast<Tag32>((std::uint64_t{i} << layout.col_bits) | j);
}

std::pair<Index, Index> decode_tag(Tag32 t, const TagLayout& layout) {
  const Tag32 col_mask = layout.col_bits >= 32 ? ~Tag32{0} : (Tag32{1} << layout.col_bits) - 1;
  return {static_cast<Index>(std::uint64_t{t} >> layout.col_bits), t & col_mask};
}

std::uint64_t MemoryImage::add_region(const std::string& name, std::size_t size) {
  if (find(name)) throw ConfigError("memory region '" + name + "' already exists");
  std::uint64_t base = kFirstBase;
  if (!regions_.empty()) {
    base = (regions_.back().end() + kRegionAlign - 1) / kRegionAlign * kRegionAlign;
    if (base == regions_.back().end()) base += kRegionAlign;  // keep regions visibly apart
  }
  regions_.push_back({name, base, std::vector<std::uint8_t>(size, 0)});
  return base;
}

const Region* MemoryImage::find(const std::string& name) const noexcept {
  for (const auto& r : regions_) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const std::uint8_t* MemoryImage::locate(std::uint64_t addr, std::size_t n) const {
  auto it = std::upper_bound(regions_.begin(), regions_.end(), addr,
                             [](std::uint64_t a, const Region& r) { return a < r.base; });
  if (it != regions_.begin()) {
    const Region& r = *std::prev(it);
    if (addr >= r.base && addr + n <= r.end()) return r.bytes.data() + (addr - r.base);
  }
  std::ostringstream msg;
  msg << "unmapped access of " << n << " bytes at 0x" << std::hex << addr;
  throw MemoryFault(msg.str());
}

std::uint8_t* MemoryImage::locate(std::uint64_t addr, std::size_t n) {
  return const_cast<std::uint8_t*>(std::as_const(*this).locate(addr, n));
}

double MemoryImage::read_f64(std::uint64_t addr) const {
  double v;
  std::memcpy(&v, locate(addr, sizeof v), sizeof v);
  return v;
}

std::uint32_t MemoryImage::read_u32(std::uint64_t addr) const {
  std::uint32_t v;
  std::memcpy(&v, locate(addr, sizeof v), sizeof v);
  return v;
}

void MemoryImage::write_f64(std::uint64_t addr, double v) { std::memcpy(locate(addr, sizeof v), &v, sizeof v); }
void MemoryImage::write_u32(std::uint64_t addr, std::uint32_t v) { std::memcpy(locate(addr, sizeof v), &v, sizeof v); }

std::string MemoryImage::manifest_json() const {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["regions"] = nlohmann::ordered_json::array();
  for (const auto& r : regions_) {
    j["regions"].push_back({{"name", r.name}, {"base", r.base}, {"bytes", r.bytes.size()}});
  }
  return j.dump(2);
}

}  // namespace neura::isa
