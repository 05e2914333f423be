#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "jsde/errors.hpp"
#include "jsde/noise.hpp"

namespace jsde {

// Binary layout, all fields little-endian:
//   "LVYP"  u32 version  u64 grid_length  u64 jump_count
//   u64 master_seed  u64 stream_index  u64 provenance_cells
//   f64 grid[grid_length]
//   f64 brownian[grid_length - 1]  f64 small[grid_length - 1]
//   jump_count x (f64 t, f64 z, u8 mark)
// The noise model (measures, threshold) is not stored; the reader attaches one.
inline constexpr std::array<char, 4> kNoiseMagic{'L', 'V', 'Y', 'P'};
inline constexpr std::uint32_t kNoiseFormatVersion = 1;

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline void read_exact(std::istream& is, char* b, std::size_t n) {
  is.read(b, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw FormatError("noise file truncated");
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  read_exact(is, reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  read_exact(is, reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace detail

inline void write_noise_binary(std::ostream& os, const NoisePath& p) {
  if (p.grid.size() < 2 || p.brownian.size() + 1 != p.grid.size() || p.small.size() + 1 != p.grid.size()) {
    throw FormatError("noise path has inconsistent array lengths");
  }
  os.write(kNoiseMagic.data(), 4);
  detail::put_u32(os, kNoiseFormatVersion);
  detail::put_u64(os, p.grid.size());
  detail::put_u64(os, p.jumps.size());
  detail::put_u64(os, p.provenance.master_seed);
  detail::put_u64(os, p.provenance.stream_index);
  detail::put_u64(os, p.provenance.cells);
  for (double t : p.grid) detail::put_f64(os, t);
  for (double v : p.brownian) detail::put_f64(os, v);
  for (double v : p.small) detail::put_f64(os, v);
  for (const Jump& j : p.jumps) {
    detail::put_f64(os, j.t);
    detail::put_f64(os, j.z);
    const char m = static_cast<char>(j.mark);
    os.write(&m, 1);
  }
}

inline NoisePath read_noise_binary(std::istream& is, std::shared_ptr<const NoiseModel> model = nullptr) {
  std::array<char, 4> magic{};
  detail::read_exact(is, magic.data(), 4);
  if (magic != kNoiseMagic) throw FormatError("not a noise file (bad magic)");
  const std::uint32_t version = detail::get_u32(is);
  if (version != kNoiseFormatVersion) throw FormatError("unsupported noise file version " + std::to_string(version));
  const std::uint64_t n = detail::get_u64(is);
  const std::uint64_t jumps = detail::get_u64(is);
  if (n < 2 || n > (std::uint64_t{1} << 32) || jumps > (std::uint64_t{1} << 32)) {
    throw FormatError("noise file header out of range");
  }
  NoisePath p;
  p.provenance.master_seed = detail::get_u64(is);
  p.provenance.stream_index = detail::get_u64(is);
  p.provenance.cells = detail::get_u64(is);
  p.grid.resize(n);
  for (auto& t : p.grid) t = detail::get_f64(is);
  p.brownian.resize(n - 1);
  for (auto& v : p.brownian) v = detail::get_f64(is);
  p.small.resize(n - 1);
  for (auto& v : p.small) v = detail::get_f64(is);
  p.jumps.reserve(jumps);
  for (std::uint64_t i = 0; i < jumps; ++i) {
    Jump j{};
    j.t = detail::get_f64(is);
    j.z = detail::get_f64(is);
    char m = 0;
    detail::read_exact(is, &m, 1);
    if (m != 0 && m != 1) throw FormatError("bad jump mark " + std::to_string(static_cast<int>(m)));
    j.mark = static_cast<Mark>(m);
    p.jumps.push_back(j);
  }
  if (model) {
    if (model->spec.master_seed != p.provenance.master_seed) throw FormatError("noise file seed does not match model");
    if (p.grid.back() != model->spec.horizon) throw FormatError("noise file horizon does not match model");
  }
  p.model = std::move(model);
  return p;
}

inline void save_noise(const std::string& path, const NoisePath& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_noise_binary(os, p);
  if (!os) throw FormatError("write failed: " + path);
}

inline NoisePath load_noise(const std::string& path, std::shared_ptr<const NoiseModel> model = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_noise_binary(is, std::move(model));
}

/// One row per cell, t = left end of the cell.
inline void write_noise_csv(std::ostream& os, const NoisePath& p) {
  os.precision(17);
  os << "t,brownian_increment,small_jump_increment\n";
  for (std::size_t i = 0; i + 1 < p.grid.size(); ++i) {
    os << p.grid[i] << ',' << p.brownian[i] << ',' << p.small[i] << '\n';
  }
}

inline void write_jumps_csv(std::ostream& os, const NoisePath& p) {
  os.precision(17);
  os << "t,z,mark\n";
  for (const Jump& j : p.jumps) os << j.t << ',' << j.z << ',' << (j.mark == Mark::Driver0 ? "driver0" : "driver1") << '\n';
}

}  // namespace jsde
