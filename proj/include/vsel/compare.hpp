#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vsel/error.hpp"
#include "vsel/filter.hpp"
#include "vsel/map.hpp"
#include "vsel/random.hpp"

namespace vsel {

/// Product-moment correlation over the vectorised pixels of two equally
/// sized arrays. Throws DataError when either has zero variance.
template <typename A, typename B>
double pearson(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("pearson: size mismatch");
  }
  const auto n = static_cast<double>(a.size());
  if (a.size() < 2) throw DataError("pearson: need at least two values");
  const Eigen::ArrayXXd x = a.derived().template cast<double>();
  const Eigen::ArrayXXd y = b.derived().template cast<double>();
  const Eigen::ArrayXXd dx = x - x.sum() / n;
  const Eigen::ArrayXXd dy = y - y.sum() / n;
  const double sxx = dx.square().sum();
  const double syy = dy.square().sum();
  if (!(sxx > 0) || !(syy > 0)) throw DataError("pearson: zero-variance input");
  return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double pearson(const SelectivityMap& a, const SelectivityMap& b) {
  return pearson(a.grid, b.grid);
}

struct SmoothingSearchConfig {
  double sigma_min = 0;
  double sigma_max = 30;
  double sigma_step = 0.5;
  Index rows = 100;
  Index cols = 100;

  void validate() const;
  std::vector<double> grid() const;
};

struct SweepPoint {
  double sigma = 0;
  double mean_r = 0;
};

struct ComparisonResult {
  std::string method_id;
  std::string human_kind;
  double sigma_star = 0;
  double mean_r = 0;
  std::vector<std::string> image_ids;
  std::vector<double> per_image_r;
  /// Filled by the bootstrap; NaN when it was not run.
  double bootstrap_sd = std::nan("");
  double ci_lo = std::nan("");
  double ci_hi = std::nan("");
  std::vector<double> bootstrap_r;
  std::vector<SweepPoint> sweep;
};

using MapSet = std::map<std::string, Grid>;

/// Resamples every map of a set to rows x cols (bilinear).
MapSet resample_set(const MapSet& maps, Index rows, Index cols);

/// Mean Pearson r over images after blurring every ANN map by sigma. Both
/// sets must already be at one common size and share ids. Per-image values
/// go to *per_image when given.
double mean_correlation(const MapSet& ann, const MapSet& human, double sigma, int jobs = 1,
                        std::vector<double>* per_image = nullptr);

/// Sweeps the sigma grid and keeps the peak mean r (ties to the smaller
/// sigma). Throws DataError listing ids present in only one set.
ComparisonResult optimal_smoothing(const MapSet& ann, const MapSet& human,
                                   const SmoothingSearchConfig& cfg = {}, int jobs = 1);

struct BootstrapSummary {
  std::vector<double> values;
  double sd = 0;
  double ci_lo = 0;
  double ci_hi = 0;
  /// Replicates that failed and were redrawn.
  std::size_t failures = 0;
};

/// Runs `replicate(rng)` B times with per-replica seeds derive_seed(seed, b,
/// attempt). A replicate throwing DataError is redrawn with the next attempt
/// index; more than 10 B failures in total raises DataError.
BootstrapSummary bootstrap(std::size_t replicates, std::uint64_t seed,
                           const std::function<double(Rng&)>& replicate, int jobs = 1);

/// Between-group over total sum of squares (single-factor R^2).
double variance_explained(const std::vector<double>& values, const std::vector<std::string>& groups);

struct PairedTest {
  double t = 0;
  double p_raw = 1;
  double p_bonferroni = 1;
  std::size_t n = 0;
};

/// Two-sided paired t test of a - b with Bonferroni adjustment.
PairedTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b,
                         int comparisons = 1);

/// Two-sided paired bootstrap p for mean(a - b) != 0: differences are
/// resampled with replacement and p = 2 min(P(mean <= 0), P(mean >= 0)),
/// capped at 1.
double paired_bootstrap_test(const std::vector<double>& a, const std::vector<double>& b,
                             std::size_t replicates, std::uint64_t seed);

}  // namespace vsel
