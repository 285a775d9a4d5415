#include "vsel/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "vsel/stats.hpp"

namespace vsel::synthetic {

const std::vector<std::string>& shape_labels() {
  static const std::vector<std::string> labels{"square", "disk", "triangle"};
  return labels;
}

namespace {

bool inside(int label, double x, double y, double cx, double cy, double r) {
  const double dx = x - cx, dy = y - cy;
  switch (label) {
    case 0:
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case 1:
      return dx * dx + dy * dy <= r * r;
    default: {
      // Upward triangle with apex at (cx, cy - r) and base at cy + r.
      if (dy < -r || dy > r) return false;
      const double half = r * (dy + r) / (2.0 * r);
      return std::abs(dx) <= half;
    }
  }
}

}  // namespace

ShapeSample make_shape(int label, Rng& rng, Index size) {
  if (label < 0 || label > 2) throw ConfigError("shape label must be 0, 1 or 2");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.04);
  const auto s = static_cast<double>(size);
  ShapeSample out;
  out.label = label;
  out.radius = s * (0.16 + 0.10 * unit(rng));
  const double margin = out.radius + 1.0;
  out.cx = margin + (s - 1.0 - 2.0 * margin) * unit(rng);
  out.cy = margin + (s - 1.0 - 2.0 * margin) * unit(rng);
  const double base = 0.10 + 0.08 * unit(rng);
  std::array<double, 3> colour{};
  for (double& c : colour) c = 0.55 + 0.45 * unit(rng);
  out.image.planes.assign(3, Grid::Constant(size, size, base));
  for (Index r = 0; r < size; ++r) {
    for (Index c = 0; c < size; ++c) {
      // 3 x 3 supersampling for soft edges.
      double cover = 0;
      for (int sy = 0; sy < 3; ++sy)
        for (int sx = 0; sx < 3; ++sx)
          cover += inside(label, c + (sx - 1) / 3.0, r + (sy - 1) / 3.0, out.cx, out.cy, out.radius);
      cover /= 9.0;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double v = base + cover * (colour[ch] - base) + noise(rng);
        out.image.planes[ch](r, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

std::vector<ShapeSample> make_shape_dataset(std::size_t count, std::uint64_t seed, Index size,
                                            const std::string& prefix) {
  std::vector<ShapeSample> out;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    ShapeSample s = make_shape(static_cast<int>(i % 3), rng, size);
    char id[32];
    std::snprintf(id, sizeof id, "%04zu", i);
    s.image_id = prefix + id;
    out.push_back(std::move(s));
  }
  return out;
}

HumanDataset make_study(const std::vector<ShapeSample>& samples, std::uint64_t seed,
                        const StudyConfig& cfg) {
  HumanDataset d;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ShapeSample& s = samples[i];
    const double w = static_cast<double>(s.image.width());
    const double h = static_cast<double>(s.image.height());
    const double spread = 1.5 * s.radius;
    auto salience = [&](double x, double y) {
      const double d2 = (x - s.cx) * (x - s.cx) + (y - s.cy) * (y - s.cy);
      return std::exp(-d2 / (2.0 * spread * spread));
    };
    auto clamp_x = [&](double x) { return std::clamp(x, 0.0, w - 1e-3); };
    auto clamp_y = [&](double y) { return std::clamp(y, 0.0, h - 1e-3); };

    Rng rng(derive_seed(seed, i, 1));
    for (int p = 0; p < cfg.rating_participants; ++p) {
      const std::string pid = "r" + std::to_string(p);
      for (int gr = 0; gr < kPatchGridSize; ++gr) {
        for (int gc = 0; gc < kPatchGridSize; ++gc) {
          const double x = (gc + 0.5) * w / kPatchGridSize - 0.5;
          const double y = (gr + 0.5) * h / kPatchGridSize - 0.5;
          const double v = 1.0 + 5.0 * salience(x, y) + 0.8 * gauss(rng);
          const int rating = std::clamp(static_cast<int>(std::lround(v)), 1, 6);
          d.ratings.push_back({s.image_id, gr, gc, pid, rating});
        }
      }
    }

    rng.seed(derive_seed(seed, i, 2));
    for (int p = 0; p < cfg.discrimination_participants; ++p) {
      const std::string pid = "d" + std::to_string(p);
      for (int py = 0; py < cfg.probe_count; ++py) {
        for (int px = 0; px < cfg.probe_count; ++px) {
          const double step_x = (w - 4.0) / (cfg.probe_count - 1);
          const double step_y = (h - 4.0) / (cfg.probe_count - 1);
          const double x = 2.0 + px * step_x, y = 2.0 + py * step_y;
          const double dp = 0.3 + 2.5 * salience(x, y);
          const double hit = stats::normal_cdf(dp / 2.0), fa = stats::normal_cdf(-dp / 2.0);
          for (int t = 0; t < cfg.trials_per_condition; ++t) {
            d.discrimination.push_back({s.image_id, x, y, Judgement::Shifted,
                                        unit(rng) < hit ? Judgement::Shifted : Judgement::Same, pid});
            d.discrimination.push_back({s.image_id, x, y, Judgement::Same,
                                        unit(rng) < fa ? Judgement::Shifted : Judgement::Same, pid});
          }
        }
      }
    }

    rng.seed(derive_seed(seed, i, 3));
    for (int c = 0; c < cfg.chains; ++c) {
      const std::string cid = "c" + std::to_string(c);
      double x = w * unit(rng), y = h * unit(rng);
      for (int it = 0; it <= kFinalChainIteration; ++it) {
        d.chains.push_back({s.image_id, cid, it, clamp_x(x), clamp_y(y)});
        x += 0.2 * (s.cx - x) + 1.5 * gauss(rng);
        y += 0.2 * (s.cy - y) + 1.5 * gauss(rng);
      }
    }

    rng.seed(derive_seed(seed, i, 4));
    const std::array<std::pair<FixationTask, double>, 3> tasks{
        {{FixationTask::Free, 1.4}, {FixationTask::Saliency, 1.0}, {FixationTask::Object, 0.6}}};
    for (const auto& [task, scale] : tasks) {
      for (int f = 0; f < cfg.fixations_per_task; ++f) {
        // A tenth of fixations land anywhere on the image.
        const bool stray = unit(rng) < 0.1;
        const double x = stray ? w * unit(rng) : s.cx + scale * s.radius * gauss(rng);
        const double y = stray ? h * unit(rng) : s.cy + scale * s.radius * gauss(rng);
        d.fixations.push_back({s.image_id, task, clamp_x(x), clamp_y(y)});
      }
    }
  }
  return d;
}

}  // namespace vsel::synthetic
