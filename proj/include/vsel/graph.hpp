#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vsel/tensor.hpp"

namespace vsel {

enum class LayerKind {
  Conv2d,
  ReLU,
  MaxPool2d,
  BatchNormInfer,
  Add,
  GlobalAvgPool,
  Flatten,
  Linear,
  Softmax,
};

std::string to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& name);

struct Geometry {
  Index kernel_h = 1;
  Index kernel_w = 1;
  Index stride_h = 1;
  Index stride_w = 1;
  Index pad_h = 0;
  Index pad_w = 0;
};

/// Named tensors referenced by layers.
using WeightStore = std::map<std::string, Tensor>;

/// Per-channel input standardisation applied before the first layer.
struct PreprocessConfig {
  std::vector<double> mean{0.485, 0.456, 0.406};
  std::vector<double> std{0.229, 0.224, 0.225};
  bool grayscale = false;
};

/// Declarative description of one layer, prior to weight binding.
struct LayerDesc {
  std::string name;
  LayerKind kind = LayerKind::ReLU;
  Geometry geometry;
  /// Layer whose output feeds this one; empty means the preceding layer and
  /// "input" names the graph input.
  std::string input;
  /// Second operand of an Add layer.
  std::string skip;
  double eps = 1e-5;
  /// Conv2d/Linear: {weight, bias}; BatchNormInfer: {gamma, beta, mean, var}.
  /// An empty bias name means no bias.
  std::vector<std::string> weights;
};

struct GraphDesc {
  std::string name = "model";
  Shape input_shape;
  std::vector<LayerDesc> layers;
  std::optional<Index> num_classes;
  std::vector<std::string> class_labels;
  std::string target_layer;
  PreprocessConfig preprocess;
};

/// A layer with its weights bound and its input/output shapes resolved.
struct Layer {
  LayerDesc desc;
  /// Value indices on the tape: 0 is the graph input, i + 1 is layer i.
  int input_value = 0;
  int skip_value = -1;
  Shape input_shape;
  Shape output_shape;
  std::vector<Tensor> params;
};

/// Immutable, shape-checked layer graph with bound weights.
///
/// Layers run in declaration order; each reads one earlier value (and Add a
/// second one), which is enough for residual blocks with projection shortcuts.
class ModelGraph {
 public:
  static ModelGraph build(GraphDesc desc, const WeightStore& weights);

  const std::string& name() const { return name_; }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const;
  const std::vector<Layer>& layers() const { return layers_; }
  Index num_classes() const { return num_classes_; }
  const std::vector<std::string>& class_labels() const { return class_labels_; }
  const PreprocessConfig& preprocess() const { return preprocess_; }

  /// Layer used by CAM methods; empty when the graph has no convolution.
  const std::string& target_layer() const { return target_layer_; }

  /// Number of leading layers that produce the logits (trailing Softmax
  /// layers excluded).
  std::size_t logit_layer_count() const { return logit_layers_; }

  std::optional<std::size_t> find_layer(const std::string& name) const;

 private:
  ModelGraph() = default;

  std::string name_;
  Shape input_shape_;
  std::vector<Layer> layers_;
  Index num_classes_ = 0;
  std::vector<std::string> class_labels_;
  std::string target_layer_;
  PreprocessConfig preprocess_;
  std::size_t logit_layers_ = 0;
};

/// Fluent construction of small graphs in code.
///
///   GraphBuilder b({1, 4, 4});
///   b.conv("c1", w, bias, 1, 1).relu().global_avg_pool().linear("fc", fw, fb);
///   ModelGraph g = b.build();
class GraphBuilder {
 public:
  explicit GraphBuilder(Shape input_shape, std::string name = "model");

  GraphBuilder& conv(const std::string& name, Tensor weight, std::optional<Tensor> bias,
                     Index stride = 1, Index padding = 0);
  GraphBuilder& relu(const std::string& name = {});
  GraphBuilder& max_pool(Index kernel, Index stride, Index padding = 0,
                         const std::string& name = {});
  GraphBuilder& batch_norm(const std::string& name, Tensor gamma, Tensor beta, Tensor mean,
                           Tensor var, double eps = 1e-5);
  GraphBuilder& add(const std::string& skip, const std::string& name = {});
  GraphBuilder& global_avg_pool(const std::string& name = {});
  GraphBuilder& flatten(const std::string& name = {});
  GraphBuilder& linear(const std::string& name, Tensor weight, std::optional<Tensor> bias);
  GraphBuilder& softmax(const std::string& name = {});

  /// Route the next layer's input from a named earlier layer.
  GraphBuilder& from(const std::string& layer);

  GraphBuilder& labels(std::vector<std::string> labels);
  GraphBuilder& target_layer(std::string name);
  GraphBuilder& preprocess(PreprocessConfig cfg);

  ModelGraph build() const;

 private:
  LayerDesc& push(LayerKind kind, const std::string& name);

  GraphDesc desc_;
  WeightStore weights_;
  std::string pending_input_;
};

}  // namespace vsel
