#include "vsel/graph.hpp"

#include <algorithm>
#include <unordered_map>

namespace vsel {

namespace {

const std::vector<std::pair<LayerKind, std::string>>& kind_names() {
  static const std::vector<std::pair<LayerKind, std::string>> names = {
      {LayerKind::Conv2d, "conv2d"},
      {LayerKind::ReLU, "relu"},
      {LayerKind::MaxPool2d, "maxpool2d"},
      {LayerKind::BatchNormInfer, "batchnorm"},
      {LayerKind::Add, "add"},
      {LayerKind::GlobalAvgPool, "global_avg_pool"},
      {LayerKind::Flatten, "flatten"},
      {LayerKind::Linear, "linear"},
      {LayerKind::Softmax, "softmax"},
  };
  return names;
}

Shape expect_chw(const Layer& layer) {
  if (layer.input_shape.size() != 3) {
    throw ShapeError("layer '" + layer.desc.name + "' (" + to_string(layer.desc.kind) +
                     ") expects a CxHxW input, got " + shape_string(layer.input_shape));
  }
  return layer.input_shape;
}

const Tensor& lookup(const WeightStore& weights, const std::string& layer,
                     const std::string& name) {
  auto it = weights.find(name);
  if (it == weights.end()) {
    throw ShapeError("layer '" + layer + "' references missing tensor '" + name + "'");
  }
  return it->second;
}

void expect_param_shape(const std::string& layer, const std::string& name, const Tensor& t,
                        const Shape& expected) {
  if (t.shape() != expected) {
    throw ShapeError("layer '" + layer + "': tensor '" + name + "' has shape " +
                     shape_string(t.shape()) + ", expected " + shape_string(expected));
  }
}

Index window_out(Index in, Index kernel, Index stride, Index pad, const std::string& layer) {
  const Index span = in + 2 * pad - kernel;
  if (span < 0) {
    throw ShapeError("layer '" + layer + "': kernel " + std::to_string(kernel) +
                     " larger than padded input " + std::to_string(in + 2 * pad));
  }
  return span / stride + 1;
}

void check_geometry(const LayerDesc& d) {
  const Geometry& g = d.geometry;
  // A zero conv kernel means "take it from the weight shape".
  const Index min_kernel = d.kind == LayerKind::Conv2d ? 0 : 1;
  if (g.kernel_h < min_kernel || g.kernel_w < min_kernel || g.stride_h <= 0 || g.stride_w <= 0 ||
      g.pad_h < 0 || g.pad_w < 0) {
    throw ShapeError("layer '" + d.name + "': kernel and stride must be positive, padding >= 0");
  }
}

}  // namespace

std::string to_string(LayerKind kind) {
  for (const auto& [k, n] : kind_names())
    if (k == kind) return n;
  return "unknown";
}

LayerKind parse_layer_kind(const std::string& name) {
  for (const auto& [k, n] : kind_names())
    if (n == name) return k;
  throw FormatError("unknown layer kind '" + name + "'");
}

const Shape& ModelGraph::output_shape() const {
  return layers_.empty() ? input_shape_ : layers_.back().output_shape;
}

std::optional<std::size_t> ModelGraph::find_layer(const std::string& name) const {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i].desc.name == name) return i;
  return std::nullopt;
}

ModelGraph ModelGraph::build(GraphDesc desc, const WeightStore& weights) {
  if (desc.input_shape.empty()) throw ShapeError("graph input shape is empty");
  for (Index d : desc.input_shape)
    if (d <= 0) throw ShapeError("graph input shape must be positive");

  ModelGraph g;
  g.name_ = desc.name;
  g.input_shape_ = desc.input_shape;
  g.class_labels_ = desc.class_labels;
  g.preprocess_ = desc.preprocess;

  std::unordered_map<std::string, int> value_of{{"input", 0}};
  std::vector<Shape> value_shapes{desc.input_shape};

  for (std::size_t i = 0; i < desc.layers.size(); ++i) {
    Layer layer;
    layer.desc = desc.layers[i];
    LayerDesc& d = layer.desc;
    if (d.name.empty()) d.name = to_string(d.kind) + "_" + std::to_string(i);
    if (value_of.count(d.name)) throw ShapeError("duplicate layer name '" + d.name + "'");
    check_geometry(d);

    if (d.input.empty()) {
      layer.input_value = static_cast<int>(i);
    } else {
      auto it = value_of.find(d.input);
      if (it == value_of.end()) {
        throw ShapeError("layer '" + d.name + "' reads from unknown or later layer '" + d.input +
                         "'");
      }
      layer.input_value = it->second;
    }
    layer.input_shape = value_shapes[static_cast<std::size_t>(layer.input_value)];

    auto param = [&](std::size_t k) -> const Tensor& {
      if (k >= d.weights.size() || d.weights[k].empty()) {
        throw ShapeError("layer '" + d.name + "' is missing weight reference #" +
                         std::to_string(k));
      }
      return lookup(weights, d.name, d.weights[k]);
    };
    auto has_param = [&](std::size_t k) { return k < d.weights.size() && !d.weights[k].empty(); };

    switch (d.kind) {
      case LayerKind::Conv2d: {
        const Shape in = expect_chw(layer);
        const Tensor& w = param(0);
        if (w.rank() != 4 || w.dim(1) != in[0]) {
          throw ShapeError("layer '" + d.name + "': weight '" + d.weights[0] + "' has shape " +
                           shape_string(w.shape()) + ", expected [out, " + std::to_string(in[0]) +
                           ", kh, kw]");
        }
        if ((d.geometry.kernel_h && d.geometry.kernel_h != w.dim(2)) ||
            (d.geometry.kernel_w && d.geometry.kernel_w != w.dim(3))) {
          throw ShapeError("layer '" + d.name + "': declared kernel " +
                           std::to_string(d.geometry.kernel_h) + "x" +
                           std::to_string(d.geometry.kernel_w) + " but weight '" + d.weights[0] +
                           "' has shape " + shape_string(w.shape()));
        }
        d.geometry.kernel_h = w.dim(2);
        d.geometry.kernel_w = w.dim(3);
        layer.params.push_back(w);
        if (has_param(1)) {
          const Tensor& b = param(1);
          expect_param_shape(d.name, d.weights[1], b, {w.dim(0)});
          layer.params.push_back(b);
        }
        const Geometry& geo = d.geometry;
        layer.output_shape = {w.dim(0), window_out(in[1], geo.kernel_h, geo.stride_h, geo.pad_h, d.name),
                              window_out(in[2], geo.kernel_w, geo.stride_w, geo.pad_w, d.name)};
        break;
      }
      case LayerKind::MaxPool2d: {
        const Shape in = expect_chw(layer);
        const Geometry& geo = d.geometry;
        layer.output_shape = {in[0], window_out(in[1], geo.kernel_h, geo.stride_h, geo.pad_h, d.name),
                              window_out(in[2], geo.kernel_w, geo.stride_w, geo.pad_w, d.name)};
        break;
      }
      case LayerKind::BatchNormInfer: {
        const Index c = layer.input_shape.size() == 1 ? layer.input_shape[0] : layer.input_shape[0];
        for (std::size_t k = 0; k < 4; ++k) {
          const Tensor& t = param(k);
          expect_param_shape(d.name, d.weights[k], t, {c});
          layer.params.push_back(t);
        }
        if (!(d.eps > 0)) throw ShapeError("layer '" + d.name + "': eps must be positive");
        layer.output_shape = layer.input_shape;
        break;
      }
      case LayerKind::Add: {
        auto it = value_of.find(d.skip);
        if (d.skip.empty() || it == value_of.end()) {
          throw ShapeError("add layer '" + d.name + "' must reference an earlier layer, got '" +
                           d.skip + "'");
        }
        layer.skip_value = it->second;
        const Shape& other = value_shapes[static_cast<std::size_t>(layer.skip_value)];
        if (other != layer.input_shape) {
          throw ShapeError("add layer '" + d.name + "': operand shapes " +
                           shape_string(layer.input_shape) + " and " + shape_string(other) +
                           " differ");
        }
        layer.output_shape = layer.input_shape;
        break;
      }
      case LayerKind::GlobalAvgPool: {
        const Shape in = expect_chw(layer);
        layer.output_shape = {in[0]};
        break;
      }
      case LayerKind::Flatten:
        layer.output_shape = {shape_size(layer.input_shape)};
        break;
      case LayerKind::Linear: {
        const Tensor& w = param(0);
        const Index features = shape_size(layer.input_shape);
        if (w.rank() != 2 || w.dim(1) != features) {
          throw ShapeError("layer '" + d.name + "': weight '" + d.weights[0] + "' has shape " +
                           shape_string(w.shape()) + ", expected [out, " +
                           std::to_string(features) + "]");
        }
        layer.params.push_back(w);
        if (has_param(1)) {
          const Tensor& b = param(1);
          expect_param_shape(d.name, d.weights[1], b, {w.dim(0)});
          layer.params.push_back(b);
        }
        layer.output_shape = {w.dim(0)};
        break;
      }
      case LayerKind::ReLU:
      case LayerKind::Softmax:
        layer.output_shape = layer.input_shape;
        break;
    }

    value_of[d.name] = static_cast<int>(i + 1);
    value_shapes.push_back(layer.output_shape);
    g.layers_.push_back(std::move(layer));
  }

  g.logit_layers_ = g.layers_.size();
  while (g.logit_layers_ > 0 && g.layers_[g.logit_layers_ - 1].desc.kind == LayerKind::Softmax)
    --g.logit_layers_;

  const Shape& logit_shape =
      g.logit_layers_ == 0 ? g.input_shape_ : g.layers_[g.logit_layers_ - 1].output_shape;
  const Index outputs = shape_size(logit_shape);
  if (desc.num_classes && *desc.num_classes != outputs) {
    throw ShapeError("graph declares " + std::to_string(*desc.num_classes) +
                     " classes but produces " + std::to_string(outputs) + " outputs");
  }
  g.num_classes_ = outputs;
  if (!g.class_labels_.empty() && static_cast<Index>(g.class_labels_.size()) != outputs) {
    throw ShapeError("graph has " + std::to_string(g.class_labels_.size()) + " labels for " +
                     std::to_string(outputs) + " classes");
  }

  if (!desc.target_layer.empty()) {
    auto idx = g.find_layer(desc.target_layer);
    if (!idx || g.layers_[*idx].desc.kind != LayerKind::Conv2d) {
      throw ShapeError("target layer '" + desc.target_layer + "' is not a Conv2d layer");
    }
    g.target_layer_ = desc.target_layer;
  } else {
    for (const Layer& l : g.layers_)
      if (l.desc.kind == LayerKind::Conv2d) g.target_layer_ = l.desc.name;
  }

  const auto& pre = g.preprocess_;
  if (pre.mean.size() != pre.std.size() || pre.mean.empty()) {
    throw ShapeError("preprocess mean/std must be nonempty and of equal length");
  }
  for (double s : pre.std)
    if (!(s > 0)) throw ShapeError("preprocess std must be positive");
  return g;
}

GraphBuilder::GraphBuilder(Shape input_shape, std::string name) {
  desc_.input_shape = std::move(input_shape);
  desc_.name = std::move(name);
  desc_.preprocess.mean = {0.0};
  desc_.preprocess.std = {1.0};
}

LayerDesc& GraphBuilder::push(LayerKind kind, const std::string& name) {
  LayerDesc d;
  d.kind = kind;
  d.name = name.empty() ? to_string(kind) + "_" + std::to_string(desc_.layers.size()) : name;
  d.input = pending_input_;
  pending_input_.clear();
  desc_.layers.push_back(std::move(d));
  return desc_.layers.back();
}

GraphBuilder& GraphBuilder::conv(const std::string& name, Tensor weight,
                                 std::optional<Tensor> bias, Index stride, Index padding) {
  LayerDesc& d = push(LayerKind::Conv2d, name);
  d.geometry.kernel_h = d.geometry.kernel_w = 0;
  d.geometry.stride_h = d.geometry.stride_w = stride;
  d.geometry.pad_h = d.geometry.pad_w = padding;
  d.weights.push_back(d.name + ".weight");
  weights_[d.name + ".weight"] = std::move(weight);
  if (bias) {
    d.weights.push_back(d.name + ".bias");
    weights_[d.name + ".bias"] = std::move(*bias);
  }
  return *this;
}

GraphBuilder& GraphBuilder::relu(const std::string& name) {
  push(LayerKind::ReLU, name);
  return *this;
}

GraphBuilder& GraphBuilder::max_pool(Index kernel, Index stride, Index padding,
                                     const std::string& name) {
  LayerDesc& d = push(LayerKind::MaxPool2d, name);
  d.geometry = {kernel, kernel, stride, stride, padding, padding};
  return *this;
}

GraphBuilder& GraphBuilder::batch_norm(const std::string& name, Tensor gamma, Tensor beta,
                                       Tensor mean, Tensor var, double eps) {
  LayerDesc& d = push(LayerKind::BatchNormInfer, name);
  d.eps = eps;
  const char* suffix[] = {".weight", ".bias", ".running_mean", ".running_var"};
  Tensor* tensors[] = {&gamma, &beta, &mean, &var};
  for (int k = 0; k < 4; ++k) {
    d.weights.push_back(d.name + suffix[k]);
    weights_[d.name + suffix[k]] = std::move(*tensors[k]);
  }
  return *this;
}

GraphBuilder& GraphBuilder::add(const std::string& skip, const std::string& name) {
  push(LayerKind::Add, name).skip = skip;
  return *this;
}

GraphBuilder& GraphBuilder::global_avg_pool(const std::string& name) {
  push(LayerKind::GlobalAvgPool, name);
  return *this;
}

GraphBuilder& GraphBuilder::flatten(const std::string& name) {
  push(LayerKind::Flatten, name);
  return *this;
}

GraphBuilder& GraphBuilder::linear(const std::string& name, Tensor weight,
                                   std::optional<Tensor> bias) {
  LayerDesc& d = push(LayerKind::Linear, name);
  d.weights.push_back(d.name + ".weight");
  weights_[d.name + ".weight"] = std::move(weight);
  if (bias) {
    d.weights.push_back(d.name + ".bias");
    weights_[d.name + ".bias"] = std::move(*bias);
  }
  return *this;
}

GraphBuilder& GraphBuilder::softmax(const std::string& name) {
  push(LayerKind::Softmax, name);
  return *this;
}

GraphBuilder& GraphBuilder::from(const std::string& layer) {
  pending_input_ = layer;
  return *this;
}

GraphBuilder& GraphBuilder::labels(std::vector<std::string> labels) {
  desc_.class_labels = std::move(labels);
  return *this;
}

GraphBuilder& GraphBuilder::target_layer(std::string name) {
  desc_.target_layer = std::move(name);
  return *this;
}

GraphBuilder& GraphBuilder::preprocess(PreprocessConfig cfg) {
  desc_.preprocess = std::move(cfg);
  return *this;
}

ModelGraph GraphBuilder::build() const { return ModelGraph::build(desc_, weights_); }

}  // namespace vsel
