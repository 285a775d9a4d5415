#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vsel/tensor.hpp"

namespace vsel {

enum class MapKind {
  VanillaGrad,
  GBP,
  GBPxIM,
  SGBP,
  GradCAM,
  ScoreCAM,
  Patch,
  DPrime,
  SpatialKDE,
  FreeFix,
  SaliencyFix,
  ObjectFix,
  HumanPC,
};

/// Lower-case identifier used in file names and on the command line.
std::string to_string(MapKind kind);
MapKind parse_map_kind(const std::string& name);

/// The six behavioural map kinds in the column order used by the Human PC.
const std::vector<MapKind>& human_kinds();
bool is_fixation_kind(MapKind kind);

/// Non-negative H x W grid over an image, from a model or from people.
struct SelectivityMap {
  std::string image_id;
  MapKind kind = MapKind::GBP;
  Grid grid;
  /// Set when the source was identically zero before normalisation.
  bool zero = false;

  Index rows() const { return grid.rows(); }
  Index cols() const { return grid.cols(); }

  /// Throws DataError unless the grid is nonempty, finite and non-negative.
  void validate() const;
};

/// Min-max normalise to [0, 1]. A constant grid sets *flat and maps to ones
/// when positive, zeros otherwise.
Grid min_max_normalize(const Grid& grid, bool* flat = nullptr);

/// SELM map container: "SELM", u32 version = 1, u32 H, u32 W, f32 values
/// (row-major, little endian).
namespace selm {

inline constexpr std::uint32_t kVersion = 1;

std::vector<unsigned char> serialize(const Grid& grid);
Grid parse(const std::vector<unsigned char>& bytes);
void write(const std::filesystem::path& path, const Grid& grid);
Grid read(const std::filesystem::path& path);

}  // namespace selm

/// Map sets on disk are laid out as <root>/<kind-or-method>/<image_id>.selm.
std::filesystem::path map_path(const std::filesystem::path& root, const std::string& set,
                               const std::string& image_id);

}  // namespace vsel
