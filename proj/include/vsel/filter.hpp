#pragma once

#include <cmath>
#include <vector>

#include "vsel/error.hpp"
#include "vsel/tensor.hpp"

namespace vsel {

/// Normalised 1-D Gaussian taps for offsets -ceil(2 sigma) .. ceil(2 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  const auto half = static_cast<Index>(std::ceil(2.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * half + 1));
  double sum = 0;
  for (Index k = -half; k <= half; ++k) {
    const double w = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(k + half)] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

/// Separable Gaussian blur with a truncated kernel (half-width ceil(2 sigma))
/// and replicated borders. sigma = 0 returns the input unchanged.
template <typename Derived>
GridT<typename Derived::Scalar> gaussian_blur(const Eigen::DenseBase<Derived>& src, double sigma) {
  using G = GridT<typename Derived::Scalar>;
  if (!(sigma >= 0)) throw DataError("blur sigma must be >= 0");
  G in = src.derived();
  if (sigma == 0) return in;
  const std::vector<double> taps = gaussian_kernel(sigma);
  const auto half = static_cast<Index>(taps.size() / 2);
  const Index rows = in.rows(), cols = in.cols();

  G tmp(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      double acc = 0;
      for (Index k = -half; k <= half; ++k) {
        const Index cc = std::clamp<Index>(c + k, 0, cols - 1);
        acc += taps[static_cast<std::size_t>(k + half)] * in(r, cc);
      }
      tmp(r, c) = acc;
    }
  }
  G out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      double acc = 0;
      for (Index k = -half; k <= half; ++k) {
        const Index rr = std::clamp<Index>(r + k, 0, rows - 1);
        acc += taps[static_cast<std::size_t>(k + half)] * tmp(rr, c);
      }
      out(r, c) = acc;
    }
  }
  return out;
}

}  // namespace vsel
