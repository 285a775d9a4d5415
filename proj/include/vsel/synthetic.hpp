#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsel/image.hpp"
#include "vsel/random.hpp"
#include "vsel/records.hpp"

namespace vsel::synthetic {

/// Class names of the shape dataset, in label order.
const std::vector<std::string>& shape_labels();

struct ShapeSample {
  std::string image_id;
  int label = 0;
  Image image;
  /// Object centre and half-extent in pixels.
  double cx = 0;
  double cy = 0;
  double radius = 0;
};

/// One bright square, disk or triangle at a random position, size and hue on
/// a dark noisy background.
ShapeSample make_shape(int label, Rng& rng, Index size = 32);

/// Classes interleaved (0, 1, 2, 0, ...); ids "<prefix><index>" zero padded.
std::vector<ShapeSample> make_shape_dataset(std::size_t count, std::uint64_t seed, Index size = 32,
                                            const std::string& prefix = "img");

struct StudyConfig {
  int rating_participants = 5;
  /// Probe grid is probe_count x probe_count, evenly spaced.
  int probe_count = 6;
  int discrimination_participants = 4;
  int trials_per_condition = 5;
  int chains = 24;
  int fixations_per_task = 40;
};

/// Behavioural records whose signal peaks on each sample's object: higher
/// patch ratings, higher change sensitivity, chains drifting to the object,
/// fixations scattered around it (tighter for the object task).
HumanDataset make_study(const std::vector<ShapeSample>& samples, std::uint64_t seed,
                        const StudyConfig& cfg = {});

}  // namespace vsel::synthetic
