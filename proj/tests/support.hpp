#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vsel/graph.hpp"
#include "vsel/tape.hpp"
#include "vsel/tensor.hpp"

namespace vsel::testkit {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = n(rng);
  return t;
}

/// Small random graph: at most four layers and 64 parameters, drawn from
/// conv, ReLU, max-pool, batch-norm, GAP + linear and flatten + linear.
/// When `relu_free` is set no ReLU layers are drawn.
inline ModelGraph random_graph(std::mt19937_64& rng, bool relu_free = false) {
  std::uniform_int_distribution<int> pick(0, 99);
  const Index c = 1 + pick(rng) % 2, h = 3 + pick(rng) % 3, w = 3 + pick(rng) % 3;
  GraphBuilder b({c, h, w}, "random");
  Shape cur{c, h, w};
  int layers = 0, params = 0;
  const int target = 1 + pick(rng) % 4;
  int id = 0;
  bool vector = false;
  while (layers < target) {
    const std::string name = "l" + std::to_string(id++);
    const int choice = pick(rng) % 6;
    if (vector) {
      if (!relu_free && choice < 3) {
        b.relu(name);
      } else {
        const Index in = cur[0], out = 1 + pick(rng) % 3;
        if (params + in * out + out > 64) break;
        b.linear(name, random_tensor({out, in}, rng, 0.7), random_tensor({out}, rng, 0.3));
        params += static_cast<int>(in * out + out);
        cur = {out};
      }
    } else if (choice == 0) {
      const Index k = 1 + pick(rng) % 2, out = 1 + pick(rng) % 2, pad = pick(rng) % 2;
      if (params + out * cur[0] * k * k + out > 64) break;
      b.conv(name, random_tensor({out, cur[0], k, k}, rng, 0.7), random_tensor({out}, rng, 0.3), 1, pad);
      params += static_cast<int>(out * cur[0] * k * k + out);
      cur = {out, cur[1] + 2 * pad - k + 1, cur[2] + 2 * pad - k + 1};
    } else if (choice == 1 && !relu_free) {
      b.relu(name);
    } else if (choice == 2 && cur[1] >= 2 && cur[2] >= 2) {
      b.max_pool(2, 1, 0, name);
      cur = {cur[0], cur[1] - 1, cur[2] - 1};
    } else if (choice == 3) {
      if (params + 4 * cur[0] > 64) break;
      std::uniform_real_distribution<double> pos(0.5, 1.5);
      Tensor var({cur[0]});
      for (Index i = 0; i < cur[0]; ++i) var[i] = pos(rng);
      b.batch_norm(name, random_tensor({cur[0]}, rng, 0.5), random_tensor({cur[0]}, rng, 0.3),
                   random_tensor({cur[0]}, rng, 0.3), var);
      params += static_cast<int>(4 * cur[0]);
    } else if (choice == 4) {
      b.global_avg_pool(name);
      cur = {cur[0]};
      vector = true;
    } else {
      b.flatten(name);
      cur = {cur[0] * cur[1] * cur[2]};
      vector = true;
    }
    ++layers;
  }
  return b.build();
}

/// ||a - b||_2 / max(||b||_2, 1e-12); 0 when both vanish.
inline double relative_error(const Tensor& a, const Tensor& b) {
  const double diff = (a.values() - b.values()).norm();
  const double ref = std::max(a.values().norm(), b.values().norm());
  if (ref == 0) return diff;
  return diff / ref;
}

/// Fresh, unique scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  std::ostringstream name;
  name << "vsel_" << tag << "_" << std::chrono::steady_clock::now().time_since_epoch().count() << "_"
       << counter++;
  const auto p = std::filesystem::temp_directory_path() / name.str();
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Every regular file under `root`, keyed by relative path.
inline std::map<std::string, std::string> tree_contents(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[std::filesystem::relative(e.path(), root).generic_string()] =
        std::string(std::istreambuf_iterator<char>(in), {});
  }
  return out;
}

// Cyclic Jacobi rotations on a symmetric matrix; returns the eigenvector of
// the largest eigenvalue.
inline Eigen::VectorXd jacobi_top_eigenvector(Eigen::MatrixXd a, double* top_value) {
  const Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  Index best = 0;
  for (Index i = 1; i < n; ++i)
    if (a(i, i) > a(best, best)) best = i;
  *top_value = a(best, best);
  return v.col(best);
}

// Six correlated kinds over `m` random images.

}  // namespace vsel::testkit
