#pragma once

#include <vector>

#include "vsel/graph.hpp"
#include "vsel/tensor.hpp"

/// Forward and input-gradient kernels for the supported layer set.
///
/// Every kernel uses a fixed summation order per output element, so results
/// are bit-reproducible for a given input.
namespace vsel::ops {

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, const Geometry& geo);
Tensor conv2d_backward(const Tensor& grad_out, const Tensor& weight, const Shape& input_shape,
                       const Geometry& geo);

Tensor relu(const Tensor& x);
/// Standard: g * [x > 0]. Guided: additionally zero where g < 0.
Tensor relu_backward(const Tensor& grad_out, const Tensor& x, bool guided);

/// Also returns, per output element, the flat input index of the first
/// maximum in scan order (used to route gradients).
Tensor max_pool2d(const Tensor& x, const Geometry& geo, std::vector<Index>* argmax);
Tensor max_pool2d_backward(const Tensor& grad_out, const std::vector<Index>& argmax,
                           const Shape& input_shape);

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                  const Tensor& var, double eps);
Tensor batch_norm_backward(const Tensor& grad_out, const Tensor& gamma, const Tensor& var,
                           double eps);

Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const Tensor& grad_out, const Shape& input_shape);

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor* bias);
Tensor linear_backward(const Tensor& grad_out, const Tensor& weight, const Shape& input_shape);

Tensor softmax(const Tensor& x);
Tensor softmax_backward(const Tensor& grad_out, const Tensor& y);

}  // namespace vsel::ops
