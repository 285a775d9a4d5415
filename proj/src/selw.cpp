#include "vsel/selw.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "vsel/binary_io.hpp"

namespace vsel {

namespace detail {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("write failed for " + path.string());
}

std::uint64_t fnv1a(const std::vector<unsigned char>& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << value;
  return os.str();
}

}  // namespace detail

namespace selw {

namespace {
constexpr unsigned char kMagic[4] = {0x53, 0x45, 0x4C, 0x57};
}

WeightStore parse(const std::vector<unsigned char>& bytes) {
  detail::ByteReader in(bytes, "SELW");
  const std::string magic = in.read_string(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("SELW: bad magic");
  const auto version = in.read<std::uint32_t>();
  if (version != kVersion) {
    throw FormatError("SELW: unsupported version " + std::to_string(version));
  }
  const auto count = in.read<std::uint32_t>();
  WeightStore store;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = in.read<std::uint16_t>();
    std::string name = in.read_string(name_len);
    const auto ndim = in.read<std::uint8_t>();
    Shape shape;
    for (std::uint8_t d = 0; d < ndim; ++d) shape.push_back(in.read<std::uint32_t>());
    const Index n = shape_size(shape);
    std::vector<float> payload(static_cast<std::size_t>(n));
    in.read_floats(payload.data(), payload.size());
    Tensor::Vector v = Eigen::Map<const Eigen::VectorXf>(payload.data(), n).cast<double>();
    if (ndim == 0) shape = {1};
    if (!store.emplace(name, Tensor(shape, std::move(v))).second) {
      throw FormatError("SELW: duplicate tensor '" + name + "'");
    }
  }
  if (!in.at_end()) throw FormatError("SELW: trailing bytes after last tensor");
  return store;
}

WeightStore read(const std::filesystem::path& path) { return parse(detail::read_file(path)); }

std::vector<unsigned char> serialize(const WeightStore& weights) {
  detail::ByteWriter out;
  out.write_bytes(kMagic, 4);
  out.write<std::uint32_t>(kVersion);
  out.write<std::uint32_t>(static_cast<std::uint32_t>(weights.size()));
  for (const auto& [name, t] : weights) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw FormatError("SELW: tensor name too long");
    }
    out.write<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    out.write_bytes(name.data(), name.size());
    out.write<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
    for (Index d : t.shape()) out.write<std::uint32_t>(static_cast<std::uint32_t>(d));
    const Eigen::VectorXf f = t.values().cast<float>();
    out.write_bytes(f.data(), static_cast<std::size_t>(f.size()) * sizeof(float));
  }
  return out.take();
}

void write(const std::filesystem::path& path, const WeightStore& weights) {
  detail::write_file(path, serialize(weights));
}

}  // namespace selw
}  // namespace vsel
