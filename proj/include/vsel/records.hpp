#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vsel {

/// One Likert rating of a grid patch (12 x 12 grid, ratings 1..6).
struct PatchRating {
  std::string image_id;
  int grid_row = 0;
  int grid_col = 0;
  std::string participant_id;
  int rating = 1;
};

enum class Judgement { Same, Shifted };

/// Same/shifted two-alternative trial at one probe point (source pixels).
struct DiscriminationTrial {
  std::string image_id;
  double x = 0;
  double y = 0;
  Judgement condition = Judgement::Same;
  Judgement response = Judgement::Same;
  std::string participant_id;
};

/// One point of a serial-reproduction chain (iterations 0..20).
struct ChainPoint {
  std::string image_id;
  std::string chain_id;
  int iteration = 0;
  double x = 0;
  double y = 0;
};

enum class FixationTask { Free, Saliency, Object };

struct Fixation {
  std::string image_id;
  FixationTask task = FixationTask::Free;
  double x = 0;
  double y = 0;
};

enum class MaskCondition { Correct, Incorrect };

/// One response in the masked-image recognition task.
struct RecognitionTrial {
  std::string image_id;
  MaskCondition condition = MaskCondition::Correct;
  std::string selected_label_set;
  std::string true_label_set;
  std::string participant_id;
};

inline constexpr int kPatchGridSize = 12;
inline constexpr int kFinalChainIteration = 20;

std::string to_string(Judgement j);
std::string to_string(FixationTask t);
std::string to_string(MaskCondition c);

/// CSV readers. Each validates the header and every field and throws
/// FormatError naming the 1-based data row on violations.
std::vector<PatchRating> parse_patch_ratings(const std::string& csv);
std::vector<DiscriminationTrial> parse_discrimination(const std::string& csv);
std::vector<ChainPoint> parse_chains(const std::string& csv);
std::vector<Fixation> parse_fixations(const std::string& csv);
std::vector<RecognitionTrial> parse_recognition(const std::string& csv);

std::string read_text(const std::filesystem::path& path);

std::string patch_ratings_csv(const std::vector<PatchRating>& rows);
std::string discrimination_csv(const std::vector<DiscriminationTrial>& rows);
std::string chains_csv(const std::vector<ChainPoint>& rows);
std::string fixations_csv(const std::vector<Fixation>& rows);
std::string recognition_csv(const std::vector<RecognitionTrial>& rows);

/// All behavioural records of a study.
struct HumanDataset {
  std::vector<PatchRating> ratings;
  std::vector<DiscriminationTrial> discrimination;
  std::vector<ChainPoint> chains;
  std::vector<Fixation> fixations;
};

/// Reads whichever of patch_ratings.csv, discrimination.csv, chains.csv and
/// fixations.csv exist in `dir`.
HumanDataset read_human_dataset(const std::filesystem::path& dir);
void write_human_dataset(const std::filesystem::path& dir, const HumanDataset& data);

}  // namespace vsel
