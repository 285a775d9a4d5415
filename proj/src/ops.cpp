#include "vsel/ops.hpp"

#include <cmath>
#include <limits>

namespace vsel::ops {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Index out_extent(Index in, Index k, Index s, Index p) { return (in + 2 * p - k) / s + 1; }

// Column matrix of shape (C*kh*kw) x (oh*ow); padded taps are zero.
Matrix im2col(const Tensor& x, const Geometry& g, Index oh, Index ow) {
  const Index c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Matrix cols = Matrix::Zero(c * g.kernel_h * g.kernel_w, oh * ow);
  for (Index ch = 0; ch < c; ++ch) {
    for (Index ky = 0; ky < g.kernel_h; ++ky) {
      for (Index kx = 0; kx < g.kernel_w; ++kx) {
        const Index row = (ch * g.kernel_h + ky) * g.kernel_w + kx;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * g.stride_h - g.pad_h + ky;
          if (iy < 0 || iy >= h) continue;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * g.stride_w - g.pad_w + kx;
            if (ix < 0 || ix >= w) continue;
            cols(row, oy * ow + ox) = x[(ch * h + iy) * w + ix];
          }
        }
      }
    }
  }
  return cols;
}

Tensor col2im(const Matrix& cols, const Shape& input_shape, const Geometry& g, Index oh,
              Index ow) {
  const Index c = input_shape[0], h = input_shape[1], w = input_shape[2];
  Tensor x(input_shape);
  for (Index ch = 0; ch < c; ++ch) {
    for (Index ky = 0; ky < g.kernel_h; ++ky) {
      for (Index kx = 0; kx < g.kernel_w; ++kx) {
        const Index row = (ch * g.kernel_h + ky) * g.kernel_w + kx;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * g.stride_h - g.pad_h + ky;
          if (iy < 0 || iy >= h) continue;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * g.stride_w - g.pad_w + kx;
            if (ix < 0 || ix >= w) continue;
            x[(ch * h + iy) * w + ix] += cols(row, oy * ow + ox);
          }
        }
      }
    }
  }
  return x;
}

Eigen::Map<const Matrix> as_matrix(const Tensor& t, Index rows, Index cols) {
  return Eigen::Map<const Matrix>(t.data(), rows, cols);
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias, const Geometry& g) {
  const Index oc = weight.dim(0);
  const Index oh = out_extent(x.dim(1), g.kernel_h, g.stride_h, g.pad_h);
  const Index ow = out_extent(x.dim(2), g.kernel_w, g.stride_w, g.pad_w);
  const Matrix cols = im2col(x, g, oh, ow);
  const auto w = as_matrix(weight, oc, cols.rows());
  Matrix y = w * cols;
  if (bias) y.colwise() += bias->values();
  return Tensor({oc, oh, ow}, Eigen::Map<const Tensor::Vector>(y.data(), y.size()));
}

Tensor conv2d_backward(const Tensor& grad_out, const Tensor& weight, const Shape& input_shape,
                       const Geometry& g) {
  const Index oc = weight.dim(0);
  const Index oh = grad_out.dim(1), ow = grad_out.dim(2);
  const Index taps = weight.size() / oc;
  const auto w = as_matrix(weight, oc, taps);
  const auto gy = as_matrix(grad_out, oc, oh * ow);
  const Matrix gcols = w.transpose() * gy;
  return col2im(gcols, input_shape, g, oh, ow);
}

Tensor relu(const Tensor& x) { return Tensor(x.shape(), x.values().cwiseMax(0.0)); }

Tensor relu_backward(const Tensor& grad_out, const Tensor& x, bool guided) {
  Tensor g(x.shape());
  for (Index i = 0; i < x.size(); ++i) {
    const double up = grad_out[i];
    const bool pass = x[i] > 0.0 && (!guided || up > 0.0);
    g[i] = pass ? up : 0.0;
  }
  return g;
}

Tensor max_pool2d(const Tensor& x, const Geometry& g, std::vector<Index>* argmax) {
  const Index c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const Index oh = out_extent(h, g.kernel_h, g.stride_h, g.pad_h);
  const Index ow = out_extent(w, g.kernel_w, g.stride_w, g.pad_w);
  Tensor y({c, oh, ow});
  if (argmax) argmax->assign(static_cast<std::size_t>(y.size()), -1);
  for (Index ch = 0; ch < c; ++ch) {
    for (Index oy = 0; oy < oh; ++oy) {
      for (Index ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        Index best_index = -1;
        for (Index ky = 0; ky < g.kernel_h; ++ky) {
          const Index iy = oy * g.stride_h - g.pad_h + ky;
          if (iy < 0 || iy >= h) continue;
          for (Index kx = 0; kx < g.kernel_w; ++kx) {
            const Index ix = ox * g.stride_w - g.pad_w + kx;
            if (ix < 0 || ix >= w) continue;
            const Index idx = (ch * h + iy) * w + ix;
            if (best_index < 0 || x[idx] > best) {
              best = x[idx];
              best_index = idx;
            }
          }
        }
        const Index o = (ch * oh + oy) * ow + ox;
        y[o] = best_index < 0 ? 0.0 : best;
        if (argmax) (*argmax)[static_cast<std::size_t>(o)] = best_index;
      }
    }
  }
  return y;
}

Tensor max_pool2d_backward(const Tensor& grad_out, const std::vector<Index>& argmax,
                           const Shape& input_shape) {
  Tensor g(input_shape);
  for (Index o = 0; o < grad_out.size(); ++o) {
    const Index src = argmax[static_cast<std::size_t>(o)];
    if (src >= 0) g[src] += grad_out[o];
  }
  return g;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                  const Tensor& var, double eps) {
  const Index c = x.dim(0);
  const Index plane = x.size() / c;
  Tensor y(x.shape());
  for (Index ch = 0; ch < c; ++ch) {
    const double scale = gamma[ch] / std::sqrt(var[ch] + eps);
    for (Index i = 0; i < plane; ++i) {
      const Index k = ch * plane + i;
      y[k] = scale * (x[k] - mean[ch]) + beta[ch];
    }
  }
  return y;
}

Tensor batch_norm_backward(const Tensor& grad_out, const Tensor& gamma, const Tensor& var,
                           double eps) {
  const Index c = grad_out.dim(0);
  const Index plane = grad_out.size() / c;
  Tensor g(grad_out.shape());
  for (Index ch = 0; ch < c; ++ch) {
    const double scale = gamma[ch] / std::sqrt(var[ch] + eps);
    for (Index i = 0; i < plane; ++i) g[ch * plane + i] = scale * grad_out[ch * plane + i];
  }
  return g;
}

Tensor global_avg_pool(const Tensor& x) {
  const Index c = x.dim(0);
  Tensor y({c});
  for (Index ch = 0; ch < c; ++ch) y[ch] = x.channel(ch).mean();
  return y;
}

Tensor global_avg_pool_backward(const Tensor& grad_out, const Shape& input_shape) {
  Tensor g(input_shape);
  const double inv = 1.0 / static_cast<double>(input_shape[1] * input_shape[2]);
  for (Index ch = 0; ch < input_shape[0]; ++ch) g.channel(ch).setConstant(grad_out[ch] * inv);
  return g;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor* bias) {
  const auto w = as_matrix(weight, weight.dim(0), weight.dim(1));
  Tensor::Vector y = w * x.values();
  if (bias) y += bias->values();
  return Tensor({weight.dim(0)}, std::move(y));
}

Tensor linear_backward(const Tensor& grad_out, const Tensor& weight, const Shape& input_shape) {
  const auto w = as_matrix(weight, weight.dim(0), weight.dim(1));
  return Tensor(input_shape, w.transpose() * grad_out.values());
}

Tensor softmax(const Tensor& x) {
  const double peak = x.values().maxCoeff();
  // Scalar libm exp: Eigen's packet exp can differ in the last bit.
  Tensor::Vector e = (x.values().array() - peak).unaryExpr([](double v) { return std::exp(v); }).matrix();
  e /= e.sum();
  return Tensor(x.shape(), std::move(e));
}

Tensor softmax_backward(const Tensor& grad_out, const Tensor& y) {
  const double dot = grad_out.values().dot(y.values());
  Tensor::Vector g = (y.values().array() * (grad_out.values().array() - dot)).matrix();
  return Tensor(y.shape(), std::move(g));
}

}  // namespace vsel::ops
