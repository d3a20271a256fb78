#include "ga3d/feature_map.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace ga3d {

namespace {

constexpr char kMagic[4] = {'G', 'A', 'F', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw InputError("raster: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(b, 8);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw InputError("raster: truncated payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_raster(const FeatureMap& map, std::ostream& out) {
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(map.channels));
  put_u32(out, static_cast<std::uint32_t>(map.rows));
  put_u32(out, static_cast<std::uint32_t>(map.cols));
  for (double v : map.data) put_f64(out, v);
}

void write_raster(const FeatureMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open raster for writing: " + path.string());
  write_raster(map, out);
}

FeatureMap read_raster(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw InputError("raster: bad magic");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) throw InputError("raster: unsupported version");
  const auto channels = static_cast<int>(get_u32(in));
  const auto rows = static_cast<int>(get_u32(in));
  const auto cols = static_cast<int>(get_u32(in));
  FeatureMap map(channels, rows, cols);
  for (double& v : map.data) v = get_f64(in);
  return map;
}

FeatureMap read_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open raster: " + path.string());
  return read_raster(in);
}

}  // namespace ga3d
