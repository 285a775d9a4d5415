#include "vsel/attribution.hpp"

#include "vsel/model.hpp"
#include "vsel/parallel.hpp"
#include "vsel/random.hpp"
#include "vsel/resample.hpp"

namespace vsel {

namespace {

Index resolve_class(const ModelGraph& model, const Tensor& input, std::optional<Index> class_index) {
  if (class_index) {
    if (*class_index < 0 || *class_index >= model.num_classes()) {
      throw DataError("class index " + std::to_string(*class_index) + " out of range");
    }
    return *class_index;
  }
  return top_class(predict(model, input).logits);
}

Tensor one_hot(const Shape& shape, Index index) {
  Tensor seed(shape);
  seed[index] = 1.0;
  return seed;
}

SelectivityMap finish_cam(const Grid& cam, const Tensor& input, MapKind kind,
                          const std::string& image_id) {
  SelectivityMap m;
  m.image_id = image_id;
  m.kind = kind;
  const Grid up = resize_bilinear(cam, input.height(), input.width());
  bool flat = false;
  m.grid = min_max_normalize(up, &flat);
  m.zero = flat && !(up.maxCoeff() > 0);
  return m;
}

Grid combine_maps(const Tensor& activations, const Eigen::VectorXd& weights) {
  const Index k = activations.dim(0), h = activations.dim(1), w = activations.dim(2);
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMatrix> a(activations.data(), k, h * w);
  const Eigen::RowVectorXd combined = weights.transpose() * a;
  return Eigen::Map<const Grid>(combined.data(), h, w).cwiseMax(0.0);
}

}  // namespace

ModelInput ModelInput::from_image(const Image& image, const ModelGraph& model,
                                  std::string image_id) {
  return {std::move(image_id), preprocess(image, model), intensity_tensor(image, model.input_shape())};
}

ModelInput ModelInput::from_tensor(Tensor tensor, std::string image_id) {
  Tensor intensity(tensor.shape());
  const double lo = tensor.values().minCoeff(), hi = tensor.values().maxCoeff();
  if (hi > lo) intensity.values() = (tensor.values().array() - lo) / (hi - lo);
  return {std::move(image_id), std::move(tensor), std::move(intensity)};
}

void SmoothGradConfig::validate() const {
  if (sample_count < 1) throw ConfigError("smoothgrad sample_count must be >= 1");
  if (!(noise_level >= 0 && noise_level < 1)) throw ConfigError("smoothgrad noise_level must be in [0, 1)");
}

SelectivityMap channel_reduce(const Tensor& raw, MapKind kind, std::string image_id) {
  const Index c = raw.channels();
  Grid acc = Grid::Zero(raw.height(), raw.width());
  for (Index ch = 0; ch < c; ++ch) acc += raw.channel(ch).abs();
  acc /= static_cast<double>(c);

  SelectivityMap m;
  m.image_id = std::move(image_id);
  m.kind = kind;
  bool flat = false;
  m.grid = min_max_normalize(acc, &flat);
  m.zero = flat && !(acc.maxCoeff() > 0);
  return m;
}

Tensor raw_gradient(const ModelGraph& model, const Tensor& input, std::optional<Index> class_index,
                    GradientGate gate) {
  const Index cls = resolve_class(model, input, class_index);
  ComputationTape tape = record_forward(model, input, model.logit_layer_count());
  return tape.backward(one_hot(tape.output().shape(), cls), gate);
}

Tensor raw_smoothgrad(const ModelGraph& model, const Tensor& input, Index class_index,
                      const SmoothGradConfig& cfg) {
  cfg.validate();
  if (cfg.noise_level == 0.0) return raw_gradient(model, input, class_index, GradientGate::GuidedReLU);
  const double sigma = cfg.noise_level * (input.values().maxCoeff() - input.values().minCoeff());
  std::vector<Tensor> samples(static_cast<std::size_t>(cfg.sample_count));
  parallel_for(samples.size(), cfg.jobs, [&](std::size_t s) {
    Rng rng(derive_seed(cfg.seed, s));
    std::normal_distribution<double> noise(0.0, sigma);
    Tensor noisy = input;
    for (Index i = 0; i < noisy.size(); ++i) noisy[i] += noise(rng);
    samples[s] = raw_gradient(model, noisy, class_index, GradientGate::GuidedReLU);
  });
  Tensor sum(input.shape());
  for (const Tensor& g : samples) sum.values() += g.values();
  sum.values() /= static_cast<double>(samples.size());
  return sum;
}

SelectivityMap vanilla_gradient(const ModelGraph& model, const ModelInput& input,
                                std::optional<Index> class_index) {
  return channel_reduce(raw_gradient(model, input.tensor, class_index, GradientGate::Standard),
                        MapKind::VanillaGrad, input.image_id);
}

SelectivityMap guided_backprop(const ModelGraph& model, const ModelInput& input,
                               std::optional<Index> class_index) {
  return channel_reduce(raw_gradient(model, input.tensor, class_index, GradientGate::GuidedReLU),
                        MapKind::GBP, input.image_id);
}

SelectivityMap gbp_x_image(const ModelGraph& model, const ModelInput& input,
                           std::optional<Index> class_index) {
  Tensor g = raw_gradient(model, input.tensor, class_index, GradientGate::GuidedReLU);
  if (input.intensity.shape() != g.shape()) throw ShapeError("intensity tensor shape mismatch");
  g.values().array() *= input.intensity.values().array();
  return channel_reduce(g, MapKind::GBPxIM, input.image_id);
}

SelectivityMap smoothgrad_gbp(const ModelGraph& model, const ModelInput& input,
                              const SmoothGradConfig& cfg, std::optional<Index> class_index) {
  const Index cls = resolve_class(model, input.tensor, class_index);
  return channel_reduce(raw_smoothgrad(model, input.tensor, cls, cfg), MapKind::SGBP,
                        input.image_id);
}

std::size_t cam_activation_layer(const ModelGraph& model, const std::string& layer_name) {
  const std::string& name = layer_name.empty() ? model.target_layer() : layer_name;
  if (name.empty()) throw ShapeError("model has no convolutional layer for CAM");
  auto idx = model.find_layer(name);
  if (!idx) throw ShapeError("layer '" + name + "' not found");
  if (model.layers()[*idx].desc.kind != LayerKind::Conv2d) {
    throw ShapeError("layer '" + name + "' is not convolutional");
  }
  std::size_t at = *idx;
  const auto& layers = model.layers();
  while (at + 1 < layers.size()) {
    const Layer& next = layers[at + 1];
    const bool elementwise =
        next.desc.kind == LayerKind::ReLU || next.desc.kind == LayerKind::BatchNormInfer;
    if (!elementwise || next.input_value != static_cast<int>(at + 1)) break;
    ++at;
  }
  return at;
}

CamParts grad_cam_parts(const ModelGraph& model, const Tensor& input, Index class_index,
                        const std::string& layer_name) {
  const std::size_t layer = cam_activation_layer(model, layer_name);
  if (layer >= model.logit_layer_count()) throw ShapeError("CAM layer lies after the logits");
  ComputationTape tape = record_forward(model, input, model.logit_layer_count());
  CamParts parts;
  parts.activations = tape.layer_output(layer);
  const Shape out_shape = tape.output().shape();
  const std::vector<Tensor> grads =
      tape.backward_all(one_hot(out_shape, class_index), GradientGate::Standard);
  const Tensor& g = grads[layer + 1];
  const Index k = g.dim(0);
  parts.weights.resize(k);
  for (Index c = 0; c < k; ++c) parts.weights[c] = g.channel(c).mean();
  parts.cam = combine_maps(parts.activations, parts.weights);
  return parts;
}

CamParts score_cam_parts(const ModelGraph& model, const Tensor& input, Index class_index,
                         const std::string& layer_name, int jobs) {
  const std::size_t layer = cam_activation_layer(model, layer_name);
  CamParts parts;
  parts.activations = evaluate(model, input, layer + 1);
  const Index k = parts.activations.dim(0);
  parts.weights.resize(k);
  std::vector<double> scores(static_cast<std::size_t>(k));
  parallel_for(scores.size(), jobs, [&](std::size_t c) {
    const auto a = parts.activations.channel(static_cast<Index>(c));
    bool flat = false;
    const Grid norm = Grid(a);
    const Grid mask = resize_bilinear(min_max_normalize(norm, &flat), input.height(), input.width());
    const Grid applied = flat ? Grid::Zero(mask.rows(), mask.cols()) : mask;
    Tensor masked = input;
    for (Index ch = 0; ch < masked.channels(); ++ch) masked.channel(ch) *= applied;
    scores[c] = predict(model, masked).probabilities[class_index];
  });
  for (Index c = 0; c < k; ++c) parts.weights[c] = scores[static_cast<std::size_t>(c)];
  parts.cam = combine_maps(parts.activations, parts.weights);
  return parts;
}

SelectivityMap grad_cam(const ModelGraph& model, const ModelInput& input,
                        std::optional<Index> class_index, const std::string& layer_name) {
  const Index cls = resolve_class(model, input.tensor, class_index);
  const CamParts parts = grad_cam_parts(model, input.tensor, cls, layer_name);
  return finish_cam(parts.cam, input.tensor, MapKind::GradCAM, input.image_id);
}

SelectivityMap score_cam(const ModelGraph& model, const ModelInput& input,
                         std::optional<Index> class_index, const std::string& layer_name,
                         int jobs) {
  const Index cls = resolve_class(model, input.tensor, class_index);
  const CamParts parts = score_cam_parts(model, input.tensor, cls, layer_name, jobs);
  return finish_cam(parts.cam, input.tensor, MapKind::ScoreCAM, input.image_id);
}

bool is_attribution_kind(MapKind kind) {
  switch (kind) {
    case MapKind::VanillaGrad:
    case MapKind::GBP:
    case MapKind::GBPxIM:
    case MapKind::SGBP:
    case MapKind::GradCAM:
    case MapKind::ScoreCAM:
      return true;
    default:
      return false;
  }
}

SelectivityMap attribute(MapKind method, const ModelGraph& model, const ModelInput& input,
                         const SmoothGradConfig& smoothgrad, std::optional<Index> class_index,
                         int jobs) {
  switch (method) {
    case MapKind::VanillaGrad:
      return vanilla_gradient(model, input, class_index);
    case MapKind::GBP:
      return guided_backprop(model, input, class_index);
    case MapKind::GBPxIM:
      return gbp_x_image(model, input, class_index);
    case MapKind::SGBP: {
      SmoothGradConfig cfg = smoothgrad;
      cfg.jobs = jobs;
      return smoothgrad_gbp(model, input, cfg, class_index);
    }
    case MapKind::GradCAM:
      return grad_cam(model, input, class_index);
    case MapKind::ScoreCAM:
      return score_cam(model, input, class_index, {}, jobs);
    default:
      throw ConfigError("'" + to_string(method) + "' is not an attribution method");
  }
}

}  // namespace vsel
