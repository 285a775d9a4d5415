#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vsel/compare.hpp"
#include "vsel/graph.hpp"
#include "vsel/image.hpp"
#include "vsel/map.hpp"
#include "vsel/records.hpp"

namespace vsel {

/// Keeps the ceil(f H W) largest values (ties broken by scan order) and
/// rescales the survivors by (v - t) / (max - t), t being the largest
/// discarded value. Survivors equal to t get the smallest positive double,
/// so the support size is exact. Throws DataError on a constant map.
SelectivityMap threshold_mask(const SelectivityMap& map, double reveal_fraction = 0.5);

/// Number of pixels threshold_mask keeps.
Index reveal_count(Index pixels, double reveal_fraction);

/// Pixel-wise product of the image (converted to grayscale when asked) with
/// the mask, resampled bilinearly to the image size.
Image apply_mask(const Image& image, const Grid& mask, bool grayscale);

struct IncorrectMaskConfig {
  double max_corr = 0.4;
  bool rotate = true;
  int max_attempts = 100;
};

struct IncorrectMask {
  SelectivityMap mask;
  std::string donor_id;
  int quarter_turns = 0;
  double r = 0;
};

/// Draws donors (with replacement, never the correct map's image) with a
/// random quarter-turn rotation until pearson(donor, correct) < max_corr.
/// Donors are resampled to the correct map's size. Throws DataError with
/// the best correlation seen when no draw is accepted.
IncorrectMask make_incorrect_mask(const SelectivityMap& correct,
                                  const std::vector<SelectivityMap>& donor_pool,
                                  std::uint64_t seed, const IncorrectMaskConfig& cfg = {});

enum class RankConvention { Distance, Position };
RankConvention parse_rank_convention(const std::string& name);
std::string to_string(RankConvention c);

struct InverseRankResult {
  std::string image_id;
  std::string mask_source;
  MaskCondition condition = MaskCondition::Correct;
  Index rank_distance = 0;
  Index n = 0;
  double inverse_rank = 1;
};

/// N / (r + N).
double inverse_rank_value(Index r, Index n);

/// Top-1 class of the unmasked image versus its rank on the masked image.
/// With the distance convention r = rank - 1, with position r = rank. A
/// missing mask evaluates the unmasked image.
InverseRankResult inverse_rank(const ModelGraph& model, const Image& image, const Grid* mask,
                               bool grayscale = false,
                               RankConvention convention = RankConvention::Distance);

/// d' for one label set, Z(HIT) - Z(FA) with 1/(2n) correction; negative
/// values clamp to 0 unless `raw`.
double recognition_dprime(const std::vector<RecognitionTrial>& trials,
                          const std::string& target_label_set, bool raw = false);

struct RecognitionScore {
  std::string image_id;
  std::string label_set;
  MaskCondition condition = MaskCondition::Correct;
  double dprime = 0;
};

/// d' per (image, condition), each image's target being its true label set
/// and the foils the other images' trials of the same condition.
std::vector<RecognitionScore> recognition_scores(const std::vector<RecognitionTrial>& trials);

enum class Pairing { AllVsAll, Sampled };

struct MaskingConfig {
  double reveal_fraction = 0.5;
  /// Gaussian smoothing applied to each map before thresholding.
  double smooth_sigma = 0;
  bool grayscale = false;
  Pairing pairing = Pairing::AllVsAll;
  /// Donors per image when sampling.
  std::size_t sampled_donors = 1;
  RankConvention rank_convention = RankConvention::Distance;
  std::size_t bootstrap_replicates = 10000;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct MaskingItem {
  std::string image_id;
  Image image;
};

struct MaskingSummary {
  std::vector<std::string> image_ids;
  std::vector<double> correct;
  /// Mean over each image's incorrect masks.
  std::vector<double> incorrect;
  double mean_correct = 0;
  double mean_incorrect = 0;
  std::optional<PairedTest> t_test;
  double bootstrap_p = 1;
};

struct MaskingExperiment {
  std::vector<InverseRankResult> rows;
  MaskingSummary summary;
};

/// Masks every image with its own map and with other images' maps (all of
/// them, or a seeded sample) and scores each with inverse_rank. Rows are
/// ordered by image id, correct first, then donors by id.
MaskingExperiment run_masking_experiment(const ModelGraph& model,
                                         const std::vector<MaskingItem>& images,
                                         const MapSet& maps, const MaskingConfig& cfg);

MaskingSummary summarize_masking(const std::vector<InverseRankResult>& rows,
                                 std::size_t bootstrap_replicates, std::uint64_t seed);

std::string inverse_rank_csv(const std::vector<InverseRankResult>& rows);

// ---- human-experiment stimuli ----------------------------------------------

struct StimulusTrial {
  std::string image_id;
  MaskCondition condition = MaskCondition::Correct;
  std::string mask_source;
  int quarter_turns = 0;
  double r = 1;
  std::string file;
};

struct StimulusSet {
  std::vector<StimulusTrial> trials;
};

struct StimulusConfig {
  /// Trials per set; even, at most the image count. 0 picks min(10, M).
  std::size_t set_size = 0;
  /// Must be a multiple of the image count so conditions balance per image.
  /// 0 picks the image count.
  std::size_t set_count = 0;
  double reveal_fraction = 0.5;
  double smooth_sigma = 0;
  IncorrectMaskConfig incorrect;
  std::uint64_t seed = 0;
};

/// Set s, slot t shows image (s + t) mod M; the first half of the slots are
/// correctly masked, the rest incorrectly, and each set's order is then
/// shuffled. Over M sets every image appears equally often per condition.
std::vector<StimulusSet> plan_stimuli(const std::vector<std::string>& image_ids,
                                      const StimulusConfig& cfg);

/// Renders the planned sets as grayscale masked PNGs under out_dir and
/// writes manifest.json. Returns the filled-in sets.
std::vector<StimulusSet> export_stimuli(const std::vector<MaskingItem>& images, const MapSet& maps,
                                        const StimulusConfig& cfg,
                                        const std::filesystem::path& out_dir);

}  // namespace vsel
