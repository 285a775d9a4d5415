#include "vsel/tape.hpp"

#include <algorithm>
#include <string>

#include "vsel/ops.hpp"

namespace vsel {

namespace {

void check_input(const ModelGraph& graph, const Tensor& input) {
  if (input.shape() != graph.input_shape()) {
    throw ShapeError("input shape " + shape_string(input.shape()) + " does not match graph input " +
                     shape_string(graph.input_shape()));
  }
  if (!input.all_finite()) throw DataError("input contains non-finite values");
}

const Tensor* bias_of(const Layer& layer) {
  return layer.params.size() > 1 ? &layer.params[1] : nullptr;
}

Tensor run_layer(const Layer& layer, const std::vector<Tensor>& values,
                 std::vector<Index>* argmax) {
  const Tensor& x = values[static_cast<std::size_t>(layer.input_value)];
  const auto& p = layer.params;
  switch (layer.desc.kind) {
    case LayerKind::Conv2d:
      return ops::conv2d(x, p[0], bias_of(layer), layer.desc.geometry);
    case LayerKind::ReLU:
      return ops::relu(x);
    case LayerKind::MaxPool2d:
      return ops::max_pool2d(x, layer.desc.geometry, argmax);
    case LayerKind::BatchNormInfer:
      return ops::batch_norm(x, p[0], p[1], p[2], p[3], layer.desc.eps);
    case LayerKind::Add: {
      const Tensor& s = values[static_cast<std::size_t>(layer.skip_value)];
      return Tensor(x.shape(), x.values() + s.values());
    }
    case LayerKind::GlobalAvgPool:
      return ops::global_avg_pool(x);
    case LayerKind::Flatten:
      return x.reshaped(layer.output_shape);
    case LayerKind::Linear:
      return ops::linear(x.rank() == 1 ? x : x.reshaped({x.size()}), p[0], bias_of(layer));
    case LayerKind::Softmax:
      return ops::softmax(x);
  }
  throw Error("unhandled layer kind");
}

std::size_t clamp_count(const ModelGraph& graph, std::size_t layer_count) {
  return std::min(layer_count, graph.layers().size());
}

void accumulate(Tensor& slot, const Tensor& g) {
  if (slot.size() == 0) {
    slot = g;
  } else {
    slot.values() += g.values();
  }
}

}  // namespace

ComputationTape record_forward(const ModelGraph& graph, const Tensor& input,
                               std::size_t layer_count) {
  check_input(graph, input);
  ComputationTape tape;
  const std::size_t n = clamp_count(graph, layer_count);
  tape.values_.reserve(n + 1);
  tape.values_.push_back(input);
  tape.nodes_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Layer& layer = graph.layers()[i];
    ComputationTape::Node node{&layer, {}};
    const bool pool = layer.desc.kind == LayerKind::MaxPool2d;
    tape.values_.push_back(run_layer(layer, tape.values_, pool ? &node.argmax : nullptr));
    tape.nodes_.push_back(std::move(node));
  }
  return tape;
}

Tensor evaluate(const ModelGraph& graph, const Tensor& input, std::size_t layer_count) {
  check_input(graph, input);
  const std::size_t n = clamp_count(graph, layer_count);
  std::vector<Tensor> values;
  values.reserve(n + 1);
  values.push_back(input);
  for (std::size_t i = 0; i < n; ++i) values.push_back(run_layer(graph.layers()[i], values, nullptr));
  return values.back();
}

std::vector<Tensor> ComputationTape::backward_all(const Tensor& seed, GradientGate gate) {
  if (consumed_) throw Error("computation tape already differentiated; record it again");
  if (seed.shape() != output().shape()) {
    throw ShapeError("seed shape " + shape_string(seed.shape()) + " does not match output " +
                     shape_string(output().shape()));
  }
  consumed_ = true;
  const bool guided = gate == GradientGate::GuidedReLU;

  std::vector<Tensor> grads(values_.size());
  grads.back() = seed;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    const Tensor& g = grads[i + 1];
    if (g.size() == 0) continue;  // value does not influence the output
    const Layer& layer = *nodes_[i].layer;
    const auto in = static_cast<std::size_t>(layer.input_value);
    const Tensor& x = values_[in];
    const auto& p = layer.params;
    switch (layer.desc.kind) {
      case LayerKind::Conv2d:
        accumulate(grads[in], ops::conv2d_backward(g, p[0], x.shape(), layer.desc.geometry));
        break;
      case LayerKind::ReLU:
        accumulate(grads[in], ops::relu_backward(g, x, guided));
        break;
      case LayerKind::MaxPool2d:
        accumulate(grads[in], ops::max_pool2d_backward(g, nodes_[i].argmax, x.shape()));
        break;
      case LayerKind::BatchNormInfer:
        accumulate(grads[in], ops::batch_norm_backward(g, p[0], p[3], layer.desc.eps));
        break;
      case LayerKind::Add:
        accumulate(grads[in], g);
        accumulate(grads[static_cast<std::size_t>(layer.skip_value)], g);
        break;
      case LayerKind::GlobalAvgPool:
        accumulate(grads[in], ops::global_avg_pool_backward(g, x.shape()));
        break;
      case LayerKind::Flatten:
        accumulate(grads[in], g.reshaped(x.shape()));
        break;
      case LayerKind::Linear:
        accumulate(grads[in], ops::linear_backward(g, p[0], x.shape()));
        break;
      case LayerKind::Softmax:
        accumulate(grads[in], ops::softmax_backward(g, values_[i + 1]));
        break;
    }
  }
  for (std::size_t v = 0; v < grads.size(); ++v)
    if (grads[v].size() == 0) grads[v] = Tensor(values_[v].shape());
  return grads;
}

Tensor ComputationTape::backward(const Tensor& seed, GradientGate gate) {
  return std::move(backward_all(seed, gate).front());
}

Tensor finite_difference_gradient(const ModelGraph& graph, const Tensor& input, Index class_index,
                                  double step, std::size_t layer_count) {
  if (!(step > 0)) throw DataError("finite-difference step must be positive");
  const Index outputs = evaluate(graph, input, layer_count).size();
  if (class_index < 0 || class_index >= outputs) {
    throw DataError("class index " + std::to_string(class_index) + " outside the " +
                    std::to_string(outputs) + " outputs");
  }
  Tensor grad(input.shape());
  Tensor probe = input;
  for (Index i = 0; i < input.size(); ++i) {
    const double x0 = input[i];
    probe[i] = x0 + step;
    const double up = evaluate(graph, probe, layer_count).values()[class_index];
    probe[i] = x0 - step;
    const double down = evaluate(graph, probe, layer_count).values()[class_index];
    probe[i] = x0;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace vsel
