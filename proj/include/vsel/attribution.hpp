#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "vsel/graph.hpp"
#include "vsel/image.hpp"
#include "vsel/map.hpp"
#include "vsel/tape.hpp"

namespace vsel {

/// An image prepared for a model: the standardised network input plus the
/// same image as [0, 1] intensities (used by gradient x image).
struct ModelInput {
  std::string image_id;
  Tensor tensor;
  Tensor intensity;

  static ModelInput from_image(const Image& image, const ModelGraph& model,
                               std::string image_id = {});
  /// Intensity is the min-max normalised tensor.
  static ModelInput from_tensor(Tensor tensor, std::string image_id = {});
};

struct SmoothGradConfig {
  int sample_count = 30;
  /// Noise standard deviation as a fraction of the input's value range.
  double noise_level = 0.10;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

/// Mean absolute value over channels, min-max normalised. An all-zero input
/// gives a zero map with the zero flag set; a flat nonzero input gives ones.
SelectivityMap channel_reduce(const Tensor& raw, MapKind kind = MapKind::VanillaGrad,
                              std::string image_id = {});

/// d(logit[class]) / d(input). Defaults to the model's top-1 class.
Tensor raw_gradient(const ModelGraph& model, const Tensor& input, std::optional<Index> class_index,
                    GradientGate gate);
Tensor raw_smoothgrad(const ModelGraph& model, const Tensor& input, Index class_index,
                      const SmoothGradConfig& cfg);

SelectivityMap vanilla_gradient(const ModelGraph& model, const ModelInput& input,
                                std::optional<Index> class_index = {});
SelectivityMap guided_backprop(const ModelGraph& model, const ModelInput& input,
                               std::optional<Index> class_index = {});
SelectivityMap gbp_x_image(const ModelGraph& model, const ModelInput& input,
                           std::optional<Index> class_index = {});
SelectivityMap smoothgrad_gbp(const ModelGraph& model, const ModelInput& input,
                              const SmoothGradConfig& cfg, std::optional<Index> class_index = {});

/// Activation maps A (K x h x w) and the layer-resolution CAM before
/// upsampling and normalisation.
struct CamParts {
  Tensor activations;
  Eigen::VectorXd weights;
  Grid cam;
};

/// Resolves a Conv2d name (empty: the model's target layer) to the layer
/// whose output holds its rectified activation maps, i.e. the conv followed
/// by any directly chained ReLU / BatchNorm layers.
std::size_t cam_activation_layer(const ModelGraph& model, const std::string& layer_name);

CamParts grad_cam_parts(const ModelGraph& model, const Tensor& input, Index class_index,
                        const std::string& layer_name = {});
CamParts score_cam_parts(const ModelGraph& model, const Tensor& input, Index class_index,
                         const std::string& layer_name = {}, int jobs = 1);

SelectivityMap grad_cam(const ModelGraph& model, const ModelInput& input,
                        std::optional<Index> class_index = {}, const std::string& layer_name = {});
SelectivityMap score_cam(const ModelGraph& model, const ModelInput& input,
                         std::optional<Index> class_index = {}, const std::string& layer_name = {},
                         int jobs = 1);

/// Dispatch by method kind (one of the six model map kinds).
SelectivityMap attribute(MapKind method, const ModelGraph& model, const ModelInput& input,
                         const SmoothGradConfig& smoothgrad, std::optional<Index> class_index = {},
                         int jobs = 1);

bool is_attribution_kind(MapKind kind);

}  // namespace vsel
