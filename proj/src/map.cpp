#include "vsel/map.hpp"

#include <cstring>

#include "vsel/binary_io.hpp"

namespace vsel {

namespace {

const std::vector<std::pair<MapKind, std::string>>& kind_names() {
  static const std::vector<std::pair<MapKind, std::string>> names = {
      {MapKind::VanillaGrad, "vanilla"}, {MapKind::GBP, "gbp"},
      {MapKind::GBPxIM, "gbpxim"},       {MapKind::SGBP, "sgbp"},
      {MapKind::GradCAM, "gradcam"},     {MapKind::ScoreCAM, "scorecam"},
      {MapKind::Patch, "patch"},         {MapKind::DPrime, "dprime"},
      {MapKind::SpatialKDE, "spatial"},  {MapKind::FreeFix, "free_fix"},
      {MapKind::SaliencyFix, "saliency_fix"}, {MapKind::ObjectFix, "object_fix"},
      {MapKind::HumanPC, "human_pc"},
  };
  return names;
}

constexpr unsigned char kMagic[4] = {0x53, 0x45, 0x4C, 0x4D};

}  // namespace

std::string to_string(MapKind kind) {
  for (const auto& [k, n] : kind_names())
    if (k == kind) return n;
  return "unknown";
}

MapKind parse_map_kind(const std::string& name) {
  for (const auto& [k, n] : kind_names())
    if (n == name) return k;
  throw ConfigError("unknown map kind '" + name + "'");
}

const std::vector<MapKind>& human_kinds() {
  static const std::vector<MapKind> kinds = {MapKind::Patch,   MapKind::DPrime,
                                             MapKind::SpatialKDE, MapKind::FreeFix,
                                             MapKind::SaliencyFix, MapKind::ObjectFix};
  return kinds;
}

bool is_fixation_kind(MapKind kind) {
  return kind == MapKind::FreeFix || kind == MapKind::SaliencyFix || kind == MapKind::ObjectFix;
}

void SelectivityMap::validate() const {
  if (grid.rows() == 0 || grid.cols() == 0) throw DataError("map '" + image_id + "' is empty");
  if (!grid.allFinite()) throw DataError("map '" + image_id + "' has non-finite values");
  if ((grid < 0).any()) throw DataError("map '" + image_id + "' has negative values");
}

Grid min_max_normalize(const Grid& grid, bool* flat) {
  const double lo = grid.minCoeff();
  const double hi = grid.maxCoeff();
  const bool is_flat = !(hi > lo);
  if (flat) *flat = is_flat;
  if (is_flat) return Grid::Constant(grid.rows(), grid.cols(), hi > 0 ? 1.0 : 0.0);
  return (grid - lo) / (hi - lo);
}

namespace selm {

std::vector<unsigned char> serialize(const Grid& grid) {
  detail::ByteWriter out;
  out.write_bytes(kMagic, 4);
  out.write<std::uint32_t>(kVersion);
  out.write<std::uint32_t>(static_cast<std::uint32_t>(grid.rows()));
  out.write<std::uint32_t>(static_cast<std::uint32_t>(grid.cols()));
  const GridT<float> f = grid.cast<float>();
  out.write_bytes(f.data(), static_cast<std::size_t>(f.size()) * sizeof(float));
  return out.take();
}

Grid parse(const std::vector<unsigned char>& bytes) {
  detail::ByteReader in(bytes, "SELM");
  const std::string magic = in.read_string(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("SELM: bad magic");
  const auto version = in.read<std::uint32_t>();
  if (version != kVersion) throw FormatError("SELM: unsupported version " + std::to_string(version));
  const auto h = in.read<std::uint32_t>();
  const auto w = in.read<std::uint32_t>();
  if (h == 0 || w == 0) throw FormatError("SELM: zero dimension");
  GridT<float> f(h, w);
  in.read_floats(f.data(), static_cast<std::size_t>(f.size()));
  if (!in.at_end()) throw FormatError("SELM: trailing bytes");
  return f.cast<double>();
}

void write(const std::filesystem::path& path, const Grid& grid) {
  detail::write_file(path, serialize(grid));
}

Grid read(const std::filesystem::path& path) { return parse(detail::read_file(path)); }

}  // namespace selm

std::filesystem::path map_path(const std::filesystem::path& root, const std::string& set,
                               const std::string& image_id) {
  return root / set / (image_id + ".selm");
}

}  // namespace vsel
