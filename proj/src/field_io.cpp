#include "clearfield/errors.hpp"
#include "clearfield/field.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace clearfield {

namespace {

constexpr char kMagic[4] = {'C', 'F', 'V', 'F'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 4);
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  out.write(reinterpret_cast<const char*>(&bits), 4);
}

template <typename T>
T read_le(std::istream& in) {
  static_assert(sizeof(T) == 4);
  std::uint32_t bits = 0;
  in.read(reinterpret_cast<char*>(&bits), 4);
  if (!in) throw ValidationError("truncated field file");
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  T value;
  std::memcpy(&value, &bits, 4);
  return value;
}

}  // namespace

void save_field(const VoxelField& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write field '" + path.string() + "'");
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, kVersion);
  for (int a = 0; a < 3; ++a) write_le<std::int32_t>(out, field.resolution()[a]);
  for (int a = 0; a < 3; ++a) write_le<float>(out, static_cast<float>(field.bbox().min[a]));
  for (int a = 0; a < 3; ++a) write_le<float>(out, static_cast<float>(field.bbox().max[a]));
  for (double v : field.density_raw()) write_le<float>(out, static_cast<float>(v));
  for (double v : field.color_raw()) write_le<float>(out, static_cast<float>(v));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

VoxelField load_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open field '" + path.string() + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ValidationError("not a field file: " + path.string());
  const auto version = read_le<std::uint32_t>(in);
  if (version != kVersion) throw ValidationError("unsupported field version " + std::to_string(version));
  Eigen::Vector3i res;
  for (int a = 0; a < 3; ++a) res[a] = read_le<std::int32_t>(in);
  Aabb box;
  for (int a = 0; a < 3; ++a) box.min[a] = read_le<float>(in);
  for (int a = 0; a < 3; ++a) box.max[a] = read_le<float>(in);
  if ((res.array() < 2).any() || (res.cast<double>().prod() > 1e9))
    throw ValidationError("bad field resolution");
  VoxelField field(res, box);
  for (double& v : field.density_raw()) v = read_le<float>(in);
  for (double& v : field.color_raw()) v = read_le<float>(in);
  return field;
}

}  // namespace clearfield
