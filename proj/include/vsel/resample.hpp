#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "vsel/tensor.hpp"

namespace vsel {

/// Bilinear resize with half-pixel centres and edge clamping (the convention
/// of common image libraries without corner alignment). Same-size input is
/// returned unchanged.
template <typename Derived>
GridT<typename Derived::Scalar> resize_bilinear(const Eigen::DenseBase<Derived>& src, Index rows,
                                                Index cols) {
  using Scalar = typename Derived::Scalar;
  if (rows <= 0 || cols <= 0 || src.rows() == 0 || src.cols() == 0) {
    throw ShapeError("resize requires positive dimensions");
  }
  if (rows == src.rows() && cols == src.cols()) return src.derived();
  GridT<Scalar> out(rows, cols);
  const double sy = static_cast<double>(src.rows()) / static_cast<double>(rows);
  const double sx = static_cast<double>(src.cols()) / static_cast<double>(cols);
  const Index max_r = src.rows() - 1, max_c = src.cols() - 1;
  for (Index r = 0; r < rows; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(max_r));
    const Index y0 = static_cast<Index>(std::floor(fy));
    const Index y1 = std::min(y0 + 1, max_r);
    const double wy = fy - static_cast<double>(y0);
    for (Index c = 0; c < cols; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, static_cast<double>(max_c));
      const Index x0 = static_cast<Index>(std::floor(fx));
      const Index x1 = std::min(x0 + 1, max_c);
      const double wx = fx - static_cast<double>(x0);
      const double top = (1 - wx) * src(y0, x0) + wx * src(y0, x1);
      const double bottom = (1 - wx) * src(y1, x0) + wx * src(y1, x1);
      out(r, c) = static_cast<Scalar>((1 - wy) * top + wy * bottom);
    }
  }
  return out;
}

/// Rotate counter-clockwise by quarter_turns x 90 degrees.
template <typename Derived>
GridT<typename Derived::Scalar> rotate90(const Eigen::DenseBase<Derived>& src, int quarter_turns) {
  using G = GridT<typename Derived::Scalar>;
  const int q = ((quarter_turns % 4) + 4) % 4;
  G g = src.derived();
  switch (q) {
    case 1:
      return G(g.transpose().colwise().reverse());
    case 2:
      return G(g.reverse());
    case 3:
      return G(g.transpose().rowwise().reverse());
    default:
      return g;
  }
}

/// Catmull-Rom cubic weights (a = -0.5) for fractional offset t in [0, 1).
inline std::array<double, 4> catmull_rom_weights(double t) {
  constexpr double a = -0.5;
  auto w = [](double x) {
    x = std::abs(x);
    if (x <= 1) return (a + 2) * x * x * x - (a + 3) * x * x + 1;
    if (x < 2) return a * x * x * x - 5 * a * x * x + 8 * a * x - 4 * a;
    return 0.0;
  };
  return {w(1 + t), w(t), w(1 - t), w(2 - t)};
}

/// Knot placement for cubic upsampling: knot (i, j) sits at output pixel
/// coordinate (origin_y + i * step_y, origin_x + j * step_x).
struct KnotLayout {
  double origin_x = 0;
  double origin_y = 0;
  double step_x = 1;
  double step_y = 1;
};

/// Bicubic (Catmull-Rom) interpolation of a knot grid onto an output
/// lattice. Knot indices are clamped at the border, so constants are
/// preserved everywhere and knot values are reproduced exactly at knots.
template <typename Derived>
GridT<typename Derived::Scalar> interpolate_bicubic(const Eigen::DenseBase<Derived>& knots,
                                                    Index rows, Index cols,
                                                    const KnotLayout& layout) {
  using Scalar = typename Derived::Scalar;
  GridT<Scalar> out(rows, cols);
  const Index kr = knots.rows(), kc = knots.cols();
  auto at = [&](Index i, Index j) {
    return static_cast<double>(knots(std::clamp<Index>(i, 0, kr - 1), std::clamp<Index>(j, 0, kc - 1)));
  };
  for (Index r = 0; r < rows; ++r) {
    const double u = (static_cast<double>(r) - layout.origin_y) / layout.step_y;
    const double fu = std::floor(u);
    const auto wy = catmull_rom_weights(u - fu);
    const Index i0 = static_cast<Index>(fu);
    for (Index c = 0; c < cols; ++c) {
      const double v = (static_cast<double>(c) - layout.origin_x) / layout.step_x;
      const double fv = std::floor(v);
      const auto wx = catmull_rom_weights(v - fv);
      const Index j0 = static_cast<Index>(fv);
      double acc = 0;
      for (int a = 0; a < 4; ++a) {
        double row = 0;
        for (int b = 0; b < 4; ++b) row += wx[b] * at(i0 - 1 + a, j0 - 1 + b);
        acc += wy[a] * row;
      }
      out(r, c) = static_cast<Scalar>(acc);
    }
  }
  return out;
}

}  // namespace vsel
