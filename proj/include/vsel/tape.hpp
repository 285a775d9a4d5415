#pragma once

#include <cstddef>
#include <vector>

#include "vsel/graph.hpp"
#include "vsel/tensor.hpp"

namespace vsel {

/// How ReLU nodes treat the incoming gradient during backward.
enum class GradientGate {
  Standard,
  /// Also zero negative incoming gradients (guided backpropagation).
  GuidedReLU,
};

/// Record of one forward pass through a ModelGraph.
///
/// Value 0 is the input and value i + 1 the output of layer i. The tape can be
/// differentiated once; record again to differentiate a second time.
class ComputationTape {
 public:
  const Tensor& input() const { return values_.front(); }
  const Tensor& output() const { return values_.back(); }
  const Tensor& value(std::size_t index) const { return values_.at(index); }
  const Tensor& layer_output(std::size_t layer) const { return values_.at(layer + 1); }

  /// Number of recorded primitives.
  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  /// Gradient of <seed, output> with respect to the input.
  Tensor backward(const Tensor& seed, GradientGate gate);

  /// Gradients with respect to every recorded value, indexed like value().
  std::vector<Tensor> backward_all(const Tensor& seed, GradientGate gate);

 private:
  friend ComputationTape record_forward(const ModelGraph&, const Tensor&, std::size_t);

  struct Node {
    const Layer* layer = nullptr;
    std::vector<Index> argmax;
  };

  std::vector<Tensor> values_;
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

/// Runs the first `layer_count` layers (all by default) and records them.
ComputationTape record_forward(const ModelGraph& graph, const Tensor& input,
                               std::size_t layer_count = static_cast<std::size_t>(-1));
/// The tape refers to the graph's layers, so the graph must outlive it.
ComputationTape record_forward(ModelGraph&&, const Tensor&, std::size_t = 0) = delete;

/// Pure forward evaluation without saving backward context.
Tensor evaluate(const ModelGraph& graph, const Tensor& input,
                std::size_t layer_count = static_cast<std::size_t>(-1));

/// Central-difference estimate of d(output[class_index]) / d(input).
Tensor finite_difference_gradient(const ModelGraph& graph, const Tensor& input, Index class_index,
                                  double step, std::size_t layer_count = static_cast<std::size_t>(-1));

}  // namespace vsel
