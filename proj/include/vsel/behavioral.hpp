#pragma once

#include <array>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vsel/map.hpp"
#include "vsel/records.hpp"
#include "vsel/resample.hpp"

namespace vsel {

// ---- patch ratings -------------------------------------------------------

/// Mean rating per grid cell for one image; throws DataError listing the
/// cells with no ratings.
Grid patch_cell_means(const std::vector<PatchRating>& ratings, int grid_size = kPatchGridSize);

/// Gaussian-weighted average of the cell means at every output pixel (cell
/// centres at ((c + 0.5) W / n, (r + 0.5) H / n)), before squaring.
Grid patch_interpolate(const Grid& cell_means, Index rows, Index cols, double kernel_sigma);

/// Default kernel: half the inter-cell spacing in output pixels.
double default_patch_sigma(Index rows, Index cols, int grid_size = kPatchGridSize);

/// Interpolated mean ratings, squared and min-max normalised.
SelectivityMap patch_map(const std::vector<PatchRating>& ratings, Index rows, Index cols,
                         std::optional<double> kernel_sigma = {});

// ---- change sensitivity (2AFC d') -----------------------------------------

/// d' = Z(HIT) - Z(FA) before clamping, with 1/(2n) extreme-rate correction.
double dprime_point_raw(const std::vector<DiscriminationTrial>& trials);
/// As dprime_point_raw, negative values replaced with 0.
double dprime_point(const std::vector<DiscriminationTrial>& trials);

/// Raw d' per probe point on the regular grid spanned by the trial
/// coordinates (source pixels).
struct DPrimeGrid {
  Grid values;
  std::vector<double> xs;
  std::vector<double> ys;
};
DPrimeGrid dprime_grid(const std::vector<DiscriminationTrial>& trials);

/// Smoothed, bicubically interpolated and squared d' grid, before
/// normalisation.
Grid dprime_surface(const Grid& grid_values, double smooth_sigma, Index rows, Index cols,
                    const KnotLayout& layout);
SelectivityMap dprime_map(const Grid& grid_values, double smooth_sigma, Index rows, Index cols,
                          const KnotLayout& layout);

/// Knot layout for a d' grid measured on a source image of the given size,
/// mapped onto a rows x cols output.
KnotLayout dprime_layout(const DPrimeGrid& grid, double source_width, double source_height,
                         Index rows, Index cols);

// ---- kernel density maps -------------------------------------------------

struct Point {
  double x = 0;
  double y = 0;
};

struct Bandwidth {
  double sx = 1;
  double sy = 1;
};

/// Silverman's rule per axis, 1.06 sd n^(-1/5); floored at `floor_px`.
Bandwidth silverman_bandwidth(const std::vector<Point>& points, double floor_px);

/// Sum of axis-aligned Gaussians at the pixel lattice (pixel (r, c) sits at
/// x = c, y = r), normalised to sum to 1.
SelectivityMap kde_map(const std::vector<Point>& points, const Bandwidth& bandwidth, Index rows,
                       Index cols);

/// Source-pixel coordinate to output-pixel coordinate, half-pixel aligned.
Point to_output_coords(Point p, double source_width, double source_height, Index rows, Index cols);

/// KDE over the final-iteration chain points (coordinates in output pixels).
SelectivityMap spatial_kde_map(const std::vector<ChainPoint>& chains, const Bandwidth& bandwidth,
                               Index rows, Index cols);

// ---- Human PC -------------------------------------------------------------

inline constexpr int kHumanKinds = 6;
/// Weight of each fixation kind in the projection, sqrt(1/3), so the three
/// fixation maps together count like one measure.
inline constexpr double kFixationDownweight = 0.57735026918962573;

struct HumanPCModel {
  /// First principal component of the standardised columns, in
  /// human_kinds() order, sign chosen so the sum is positive.
  std::array<double, kHumanKinds> pca_loadings{};
  /// pca_loadings with the fixation kinds multiplied by the downweight.
  std::array<double, kHumanKinds> loadings{};
  std::array<double, kHumanKinds> means{};
  std::array<double, kHumanKinds> stds{};
  std::array<double, kHumanKinds> eigenvalues{};
  double fixation_downweight = 0;
  Index rows = 0;
  Index cols = 0;

  double explained_variance_ratio() const;
};

/// maps[k][m] is kind k (human_kinds() order) for image m; all grids share
/// one size.
HumanPCModel fit_human_pc(const std::vector<std::vector<Grid>>& maps,
                          double fixation_downweight = kFixationDownweight);

/// Covariance of the standardised columns (the matrix the PC is taken from).
Eigen::Matrix<double, kHumanKinds, kHumanKinds> standardized_covariance(
    const std::vector<std::vector<Grid>>& maps);

/// sum_k loading_k * zscore_k(map_k), min-max normalised.
SelectivityMap project_human_pc(const HumanPCModel& model, const std::vector<Grid>& kind_maps,
                                const std::string& image_id = {});

std::string human_pc_json(const HumanPCModel& model);
HumanPCModel parse_human_pc_json(const std::string& text);

// ---- whole-study estimation ---------------------------------------------

struct HumanMapConfig {
  Index rows = 100;
  Index cols = 100;
  std::optional<double> patch_sigma;
  /// Gaussian smoothing of the d' grid, in grid units.
  double dprime_sigma = 1.0;
  /// Fixed KDE bandwidth in output pixels; Silverman's rule when unset,
  /// floored at max(1, 0.02 * max(rows, cols)) pixels.
  std::optional<Bandwidth> kde_bandwidth;
  /// Source image sizes (width, height) per image id, with a fallback.
  std::map<std::string, std::pair<double, double>> source_sizes;
  std::pair<double, double> default_source_size{224, 224};

  std::pair<double, double> source_size(const std::string& image_id) const;
};

std::vector<std::string> dataset_image_ids(const HumanDataset& data, MapKind kind);

/// Estimates one behavioural kind for every image that has records of it;
/// output maps are min-max normalised. A failing image throws DataError,
/// or is skipped and reported in *failures (id -> message) when given.
std::map<std::string, SelectivityMap> estimate_human_maps(
    const HumanDataset& data, MapKind kind, const HumanMapConfig& cfg,
    std::map<std::string, std::string>* failures = nullptr);

/// Bootstrap resample of the records behind `kind`: participants for
/// ratings and 2AFC, chains (within image) for serial reproduction,
/// fixation points (within image) for fixations.
HumanDataset resample_dataset(const HumanDataset& data, MapKind kind, std::mt19937_64& rng);

/// Estimates all six kinds and projects them with a fitted PC model. Images
/// missing any kind are skipped.
std::map<std::string, SelectivityMap> estimate_human_pc_maps(const HumanDataset& data,
                                                             const HumanPCModel& model,
                                                             const HumanMapConfig& cfg);


}  // namespace vsel
