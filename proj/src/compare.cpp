#include "vsel/compare.hpp"

#include <algorithm>
#include <numeric>

#include "vsel/parallel.hpp"
#include "vsel/resample.hpp"
#include "vsel/stats.hpp"
#include "vsel/text.hpp"

namespace vsel {

void SmoothingSearchConfig::validate() const {
  if (!(sigma_min >= 0) || !(sigma_max >= sigma_min)) {
    throw ConfigError("smoothing search needs 0 <= sigma_min <= sigma_max");
  }
  if (!(sigma_step > 0)) throw ConfigError("smoothing search step must be positive");
  if (rows <= 0 || cols <= 0) throw ConfigError("smoothing search size must be positive");
}

std::vector<double> SmoothingSearchConfig::grid() const {
  validate();
  std::vector<double> g;
  // Multiply rather than accumulate so grid points are exact multiples.
  for (std::size_t i = 0;; ++i) {
    const double s = sigma_min + static_cast<double>(i) * sigma_step;
    if (s > sigma_max + 1e-9 * sigma_step) break;
    g.push_back(s);
  }
  return g;
}

MapSet resample_set(const MapSet& maps, Index rows, Index cols) {
  MapSet out;
  for (const auto& [id, g] : maps) out.emplace(id, resize_bilinear(g, rows, cols));
  return out;
}

namespace {

void check_ids(const MapSet& ann, const MapSet& human) {
  std::string only_ann, only_human;
  for (const auto& [id, g] : ann)
    if (!human.count(id)) only_ann += " " + id;
  for (const auto& [id, g] : human)
    if (!ann.count(id)) only_human += " " + id;
  if (!only_ann.empty() || !only_human.empty()) {
    std::string msg = "image id mismatch;";
    if (!only_ann.empty()) msg += " only in ANN maps:" + only_ann + ";";
    if (!only_human.empty()) msg += " only in human maps:" + only_human + ";";
    msg.pop_back();
    throw DataError(msg);
  }
  if (ann.empty()) throw DataError("no maps to compare");
}

}  // namespace

double mean_correlation(const MapSet& ann, const MapSet& human, double sigma, int jobs,
                        std::vector<double>* per_image) {
  check_ids(ann, human);
  std::vector<const Grid*> a, h;
  std::vector<std::string> ids;
  for (const auto& [id, g] : ann) {
    ids.push_back(id);
    a.push_back(&g);
    h.push_back(&human.at(id));
  }
  std::vector<double> r(a.size());
  parallel_for(a.size(), jobs, [&](std::size_t i) {
    try {
      r[i] = pearson(gaussian_blur(*a[i], sigma), *h[i]);
    } catch (const DataError& e) {
      throw DataError("image '" + ids[i] + "': " + e.what());
    }
  });
  if (per_image) *per_image = r;
  return std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
}

ComparisonResult optimal_smoothing(const MapSet& ann, const MapSet& human,
                                   const SmoothingSearchConfig& cfg, int jobs) {
  check_ids(ann, human);
  const std::vector<double> sigmas = cfg.grid();
  const MapSet a = resample_set(ann, cfg.rows, cfg.cols);
  const MapSet h = resample_set(human, cfg.rows, cfg.cols);

  // Parallel over (sigma, image); each slot is written once and reduced in order.
  const std::size_t n_img = a.size();
  std::vector<const Grid*> ap, hp;
  std::vector<std::string> ids;
  for (const auto& [id, g] : a) {
    ids.push_back(id);
    ap.push_back(&g);
    hp.push_back(&h.at(id));
  }
  std::vector<double> r(sigmas.size() * n_img);
  parallel_for(r.size(), jobs, [&](std::size_t k) {
    const std::size_t s = k / n_img, i = k % n_img;
    try {
      r[k] = pearson(gaussian_blur(*ap[i], sigmas[s]), *hp[i]);
    } catch (const DataError& e) {
      throw DataError("image '" + ids[i] + "' at sigma " + format_number(sigmas[s]) + ": " +
                      e.what());
    }
  });

  ComparisonResult res;
  res.image_ids = ids;
  std::size_t best = 0;
  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    double sum = 0;
    for (std::size_t i = 0; i < n_img; ++i) sum += r[s * n_img + i];
    const double m = sum / static_cast<double>(n_img);
    res.sweep.push_back({sigmas[s], m});
    if (m > res.sweep[best].mean_r) best = s;
  }
  res.sigma_star = res.sweep[best].sigma;
  res.mean_r = res.sweep[best].mean_r;
  res.per_image_r.assign(r.begin() + static_cast<std::ptrdiff_t>(best * n_img),
                         r.begin() + static_cast<std::ptrdiff_t>((best + 1) * n_img));
  return res;
}

BootstrapSummary bootstrap(std::size_t replicates, std::uint64_t seed,
                           const std::function<double(Rng&)>& replicate, int jobs) {
  if (replicates < 2) throw ConfigError("bootstrap needs at least 2 replicates");
  const std::size_t cap = 10 * replicates;
  std::vector<double> values(replicates);
  std::vector<std::size_t> failures(replicates, 0);
  std::atomic<std::size_t> total_failures{0};
  parallel_for(replicates, jobs, [&](std::size_t b) {
    for (std::size_t attempt = 0;; ++attempt) {
      Rng rng(derive_seed(seed, b, attempt));
      try {
        values[b] = replicate(rng);
        return;
      } catch (const DataError& e) {
        ++failures[b];
        if (++total_failures > cap) {
          throw DataError("bootstrap gave up after " + std::to_string(cap) +
                          " failed resamples; last: " + e.what());
        }
      }
    }
  });
  BootstrapSummary out;
  out.values = values;
  out.failures = std::accumulate(failures.begin(), failures.end(), std::size_t{0});
  out.sd = stats::stddev(values);
  out.ci_lo = stats::percentile(values, 2.5);
  out.ci_hi = stats::percentile(values, 97.5);
  return out;
}

double variance_explained(const std::vector<double>& values, const std::vector<std::string>& groups) {
  if (values.size() != groups.size()) throw DataError("values and groups differ in length");
  std::map<std::string, std::pair<double, double>> by_group;  // sum, count
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& [sum, count] = by_group[groups[i]];
    sum += values[i];
    count += 1;
  }
  if (by_group.size() < 2) throw DataError("variance_explained needs at least two groups");
  const double grand = stats::mean(values);
  double total = 0, between = 0;
  for (double v : values) total += (v - grand) * (v - grand);
  for (const auto& [g, sc] : by_group) {
    const double gm = sc.first / sc.second;
    between += sc.second * (gm - grand) * (gm - grand);
  }
  if (!(total > 0)) throw DataError("variance_explained: zero total variance");
  return std::clamp(between / total, 0.0, 1.0);
}

PairedTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b,
                         int comparisons) {
  if (a.size() != b.size()) throw DataError("paired t test: length mismatch");
  if (a.size() < 2) throw DataError("paired t test needs at least two pairs");
  if (comparisons < 1) throw ConfigError("comparison count must be >= 1");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double sd = stats::stddev(d);
  if (!(sd > 0)) throw DataError("paired t test: differences have zero variance");
  PairedTest out;
  out.n = d.size();
  const auto n = static_cast<double>(d.size());
  out.t = stats::mean(d) / (sd / std::sqrt(n));
  out.p_raw = std::min(1.0, 2.0 * stats::student_t_cdf(-std::abs(out.t), n - 1));
  out.p_bonferroni = std::min(1.0, out.p_raw * comparisons);
  return out;
}

double paired_bootstrap_test(const std::vector<double>& a, const std::vector<double>& b,
                             std::size_t replicates, std::uint64_t seed) {
  if (a.size() != b.size()) throw DataError("paired bootstrap: length mismatch");
  if (a.empty()) throw DataError("paired bootstrap: no pairs");
  if (replicates < 1) throw ConfigError("paired bootstrap needs replicates");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
  std::size_t le = 0, ge = 0;
  for (std::size_t r = 0; r < replicates; ++r) {
    double sum = 0;
    for (std::size_t i = 0; i < d.size(); ++i) sum += d[pick(rng)];
    le += sum <= 0;
    ge += sum >= 0;
  }
  const double reps = static_cast<double>(replicates);
  return std::min(1.0, 2.0 * std::min(le / reps, ge / reps));
}

}  // namespace vsel
