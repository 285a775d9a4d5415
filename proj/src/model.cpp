#include "vsel/model.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "vsel/ops.hpp"
#include "vsel/resample.hpp"
#include "vsel/selw.hpp"
#include "vsel/tape.hpp"

namespace vsel {

namespace {

using nlohmann::json;

std::pair<Index, Index> pair_field(const json& layer, const char* key, Index fallback) {
  if (!layer.contains(key)) return {fallback, fallback};
  const json& v = layer.at(key);
  if (v.is_array()) {
    if (v.size() != 2) throw FormatError(std::string("manifest: '") + key + "' must have 2 entries");
    return {v[0].get<Index>(), v[1].get<Index>()};
  }
  return {v.get<Index>(), v.get<Index>()};
}

LayerDesc parse_layer(const json& j, std::size_t index) {
  LayerDesc d;
  d.kind = parse_layer_kind(j.at("kind").get<std::string>());
  d.name = j.value("name", to_string(d.kind) + "_" + std::to_string(index));
  d.input = j.value("input", std::string{});
  d.skip = j.value("skip", std::string{});
  d.eps = j.value("eps", 1e-5);
  auto [kh, kw] = pair_field(j, "kernel", d.kind == LayerKind::Conv2d ? 0 : 1);
  auto [sh, sw] = pair_field(j, "stride", d.kind == LayerKind::MaxPool2d ? kh : 1);
  auto [ph, pw] = pair_field(j, "padding", 0);
  d.geometry = {kh, kw, sh, sw, ph, pw};
  switch (d.kind) {
    case LayerKind::Conv2d:
    case LayerKind::Linear:
      d.weights = {j.value("weight", d.name + ".weight"), j.value("bias", std::string{})};
      break;
    case LayerKind::BatchNormInfer:
      d.weights = {j.value("weight", d.name + ".weight"), j.value("bias", d.name + ".bias"),
                   j.value("running_mean", d.name + ".running_mean"),
                   j.value("running_var", d.name + ".running_var")};
      break;
    default:
      break;
  }
  return d;
}

}  // namespace

GraphDesc parse_manifest(const std::string& json_text) {
  GraphDesc desc;
  try {
    const json j = json::parse(json_text);
    desc.name = j.value("name", std::string("model"));
    desc.input_shape = j.at("input_shape").get<Shape>();
    if (j.contains("num_classes")) desc.num_classes = j.at("num_classes").get<Index>();
    desc.class_labels = j.value("class_labels", std::vector<std::string>{});
    desc.target_layer = j.value("target_layer", std::string{});
    if (j.contains("preprocess")) {
      const json& p = j.at("preprocess");
      desc.preprocess.mean = p.value("mean", desc.preprocess.mean);
      desc.preprocess.std = p.value("std", desc.preprocess.std);
      desc.preprocess.grayscale = p.value("grayscale", false);
    }
    const json& layers = j.at("layers");
    for (std::size_t i = 0; i < layers.size(); ++i) desc.layers.push_back(parse_layer(layers[i], i));
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return desc;
}

GraphDesc read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

std::string manifest_json(const GraphDesc& desc) {
  json j;
  j["name"] = desc.name;
  j["input_shape"] = desc.input_shape;
  if (desc.num_classes) j["num_classes"] = *desc.num_classes;
  if (!desc.class_labels.empty()) j["class_labels"] = desc.class_labels;
  if (!desc.target_layer.empty()) j["target_layer"] = desc.target_layer;
  j["preprocess"] = {{"mean", desc.preprocess.mean},
                     {"std", desc.preprocess.std},
                     {"grayscale", desc.preprocess.grayscale}};
  json layers = json::array();
  for (const LayerDesc& d : desc.layers) {
    json l;
    l["name"] = d.name;
    l["kind"] = to_string(d.kind);
    if (!d.input.empty()) l["input"] = d.input;
    if (!d.skip.empty()) l["skip"] = d.skip;
    const Geometry& g = d.geometry;
    if (d.kind == LayerKind::Conv2d || d.kind == LayerKind::MaxPool2d) {
      if (g.kernel_h > 0) l["kernel"] = {g.kernel_h, g.kernel_w};
      l["stride"] = {g.stride_h, g.stride_w};
      l["padding"] = {g.pad_h, g.pad_w};
    }
    if (d.kind == LayerKind::BatchNormInfer) {
      l["eps"] = d.eps;
      l["weight"] = d.weights.at(0);
      l["bias"] = d.weights.at(1);
      l["running_mean"] = d.weights.at(2);
      l["running_var"] = d.weights.at(3);
    }
    if (d.kind == LayerKind::Conv2d || d.kind == LayerKind::Linear) {
      l["weight"] = d.weights.at(0);
      if (d.weights.size() > 1 && !d.weights[1].empty()) l["bias"] = d.weights[1];
    }
    layers.push_back(l);
  }
  j["layers"] = layers;
  return j.dump(2);
}

ModelGraph load_model(const std::filesystem::path& manifest_path,
                      const std::filesystem::path& weights_path) {
  GraphDesc desc = read_manifest(manifest_path);
  WeightStore weights = selw::read(weights_path);
  return ModelGraph::build(std::move(desc), weights);
}

namespace {

Image fit_channels(const Image& image, Index channels) {
  if (image.empty()) throw ShapeError("cannot preprocess an empty image");
  if (image.channels() == channels) return image;
  if (image.channels() == 1) {
    Image out;
    out.planes.assign(static_cast<std::size_t>(channels), image.planes.front());
    return out;
  }
  if (channels == 1) return to_grayscale(image);
  throw ShapeError("image has " + std::to_string(image.channels()) + " channels, model expects " +
                   std::to_string(channels));
}

}  // namespace

Tensor intensity_tensor(const Image& image, const Shape& input_shape) {
  if (input_shape.size() != 3) throw ShapeError("model input is not CxHxW");
  const Image fitted = fit_channels(image, input_shape[0]);
  return tensor_from_planes(resize_bilinear(fitted, input_shape[1], input_shape[2]).planes);
}

Tensor preprocess(const Image& image, const PreprocessConfig& cfg, const Shape& input_shape) {
  if (input_shape.size() != 3) throw ShapeError("model input is not CxHxW");
  const Image source = cfg.grayscale ? to_grayscale(image) : image;
  Tensor t = intensity_tensor(source, input_shape);
  const Index c = t.channels();
  if (cfg.mean.size() != 1 && static_cast<Index>(cfg.mean.size()) != c) {
    throw ShapeError("preprocess mean/std has " + std::to_string(cfg.mean.size()) +
                     " entries for " + std::to_string(c) + " channels");
  }
  for (Index ch = 0; ch < c; ++ch) {
    const auto k = cfg.mean.size() == 1 ? 0 : static_cast<std::size_t>(ch);
    t.channel(ch) = (t.channel(ch) - cfg.mean[k]) / cfg.std[k];
  }
  return t;
}

Tensor preprocess(const Image& image, const ModelGraph& model) {
  return preprocess(image, model.preprocess(), model.input_shape());
}

Prediction predict(const ModelGraph& model, const Tensor& input) {
  Tensor logits = evaluate(model, input, model.logit_layer_count());
  logits = logits.reshaped({logits.size()});
  Tensor probs = ops::softmax(logits);
  return {std::move(logits), std::move(probs)};
}

Index top_class(const Tensor& scores) {
  Index best = 0;
  for (Index i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

Index rank_of_class(const Tensor& probabilities, Index class_index) {
  if (class_index < 0 || class_index >= probabilities.size()) {
    throw DataError("class index " + std::to_string(class_index) + " out of range");
  }
  const double p = probabilities[class_index];
  Index rank = 1;
  for (Index i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] > p || (probabilities[i] == p && i < class_index)) ++rank;
  }
  return rank;
}

}  // namespace vsel
