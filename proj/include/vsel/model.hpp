#pragma once

#include <filesystem>
#include <string>

#include "vsel/graph.hpp"
#include "vsel/image.hpp"
#include "vsel/tensor.hpp"

namespace vsel {

/// Parses a JSON manifest. Recognised keys: name, input_shape, num_classes,
/// class_labels, target_layer, preprocess {mean, std, grayscale}, layers.
GraphDesc parse_manifest(const std::string& json_text);
GraphDesc read_manifest(const std::filesystem::path& path);
std::string manifest_json(const GraphDesc& desc);

/// Loads a manifest plus SELW weights and shape-checks the result.
ModelGraph load_model(const std::filesystem::path& manifest_path,
                      const std::filesystem::path& weights_path);

/// Resize to the model input, then per-channel (x - mean) / std. Grayscale
/// images are replicated to the model's channel count; a single mean/std
/// entry applies to every channel.
Tensor preprocess(const Image& image, const PreprocessConfig& cfg, const Shape& input_shape);
Tensor preprocess(const Image& image, const ModelGraph& model);

/// Image resized to the model's spatial size with intensities kept in
/// [0, 1] and replicated to its channel count.
Tensor intensity_tensor(const Image& image, const Shape& input_shape);

struct Prediction {
  Tensor logits;
  Tensor probabilities;
};

Prediction predict(const ModelGraph& model, const Tensor& input);

Index top_class(const Tensor& scores);

/// 1-based rank of class_index; ties rank the lower class index first.
Index rank_of_class(const Tensor& probabilities, Index class_index);

}  // namespace vsel
