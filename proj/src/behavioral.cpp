#include "vsel/behavioral.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "vsel/filter.hpp"
#include "vsel/stats.hpp"
#include "vsel/text.hpp"

namespace vsel {

namespace {

using Matrix = Eigen::MatrixXd;

// Separable Gaussian weights between lattice coordinates and centres, each
// row scaled so its largest entry is 1 (the scale cancels in ratios).
Matrix axis_weights(Index n, const std::vector<double>& centres, double sigma, bool row_scaled) {
  Matrix w(n, static_cast<Index>(centres.size()));
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (double c : centres) best = std::min(best, (i - c) * (i - c));
    for (std::size_t j = 0; j < centres.size(); ++j) {
      const double d2 = (i - centres[j]) * (i - centres[j]);
      w(i, static_cast<Index>(j)) =
          std::exp(-(d2 - (row_scaled ? best : 0.0)) / (2.0 * sigma * sigma));
    }
  }
  return w;
}

template <typename Record, typename Key>
std::map<std::string, std::vector<Record>> group_by_image(const std::vector<Record>& records,
                                                          Key&& keep) {
  std::map<std::string, std::vector<Record>> out;
  for (const Record& r : records)
    if (keep(r)) out[r.image_id].push_back(r);
  return out;
}

FixationTask task_of(MapKind kind) {
  switch (kind) {
    case MapKind::FreeFix:
      return FixationTask::Free;
    case MapKind::SaliencyFix:
      return FixationTask::Saliency;
    case MapKind::ObjectFix:
      return FixationTask::Object;
    default:
      throw ConfigError("'" + to_string(kind) + "' is not a fixation kind");
  }
}

// Spreads at rounding level (a constant pushed through weighted averages)
// count as flat.
SelectivityMap normalized(SelectivityMap m) {
  bool flat = false;
  const bool zero = !(m.grid.maxCoeff() > 0);
  const double lo = m.grid.minCoeff(), hi = m.grid.maxCoeff();
  if (hi - lo <= 1e-12 * std::max(std::abs(lo), std::abs(hi))) m.grid.setConstant(hi);
  m.grid = min_max_normalize(m.grid, &flat);
  m.zero = zero;
  return m;
}

}  // namespace

// ---- patch ratings -------------------------------------------------------

Grid patch_cell_means(const std::vector<PatchRating>& ratings, int grid_size) {
  if (ratings.empty()) throw DataError("no patch ratings");
  Grid sum = Grid::Zero(grid_size, grid_size);
  Grid count = Grid::Zero(grid_size, grid_size);
  for (const PatchRating& r : ratings) {
    if (r.grid_row < 0 || r.grid_row >= grid_size || r.grid_col < 0 || r.grid_col >= grid_size) {
      throw DataError("patch rating outside the grid");
    }
    sum(r.grid_row, r.grid_col) += r.rating;
    count(r.grid_row, r.grid_col) += 1;
  }
  std::string missing;
  for (Index i = 0; i < grid_size; ++i)
    for (Index j = 0; j < grid_size; ++j)
      if (count(i, j) == 0) missing += " (" + std::to_string(i) + "," + std::to_string(j) + ")";
  if (!missing.empty()) throw DataError("grid cells without ratings:" + missing);
  return sum / count;
}

double default_patch_sigma(Index rows, Index cols, int grid_size) {
  const double spacing = std::min(static_cast<double>(rows), static_cast<double>(cols)) / grid_size;
  return 0.5 * spacing;
}

Grid patch_interpolate(const Grid& cell_means, Index rows, Index cols, double kernel_sigma) {
  if (!(kernel_sigma > 0)) throw DataError("patch kernel sigma must be positive");
  std::vector<double> cy, cx;
  for (Index i = 0; i < cell_means.rows(); ++i)
    cy.push_back((i + 0.5) * static_cast<double>(rows) / cell_means.rows() - 0.5);
  for (Index j = 0; j < cell_means.cols(); ++j)
    cx.push_back((j + 0.5) * static_cast<double>(cols) / cell_means.cols() - 0.5);
  const Matrix wy = axis_weights(rows, cy, kernel_sigma, true);
  const Matrix wx = axis_weights(cols, cx, kernel_sigma, true);
  const Matrix num = wy * cell_means.matrix() * wx.transpose();
  const Matrix den = wy * Matrix::Ones(cell_means.rows(), cell_means.cols()) * wx.transpose();
  return (num.array() / den.array());
}

SelectivityMap patch_map(const std::vector<PatchRating>& ratings, Index rows, Index cols,
                         std::optional<double> kernel_sigma) {
  const Grid means = patch_cell_means(ratings);
  const double sigma = kernel_sigma.value_or(default_patch_sigma(rows, cols));
  SelectivityMap m;
  m.image_id = ratings.front().image_id;
  m.kind = MapKind::Patch;
  m.grid = patch_interpolate(means, rows, cols, sigma).square();
  return normalized(std::move(m));
}

// ---- d' -----------------------------------------------------------------

double dprime_point_raw(const std::vector<DiscriminationTrial>& trials) {
  double n_shift = 0, hits = 0, n_same = 0, fas = 0;
  for (const auto& t : trials) {
    const bool said_shift = t.response == Judgement::Shifted;
    if (t.condition == Judgement::Shifted) {
      n_shift += 1;
      hits += said_shift;
    } else {
      n_same += 1;
      fas += said_shift;
    }
  }
  if (n_shift == 0 || n_same == 0) {
    throw DataError("d' needs trials of both conditions (shifted: " +
                    std::to_string(static_cast<int>(n_shift)) +
                    ", same: " + std::to_string(static_cast<int>(n_same)) + ")");
  }
  return stats::dprime(stats::corrected_rate(hits, n_shift), stats::corrected_rate(fas, n_same));
}

double dprime_point(const std::vector<DiscriminationTrial>& trials) {
  return std::max(0.0, dprime_point_raw(trials));
}

DPrimeGrid dprime_grid(const std::vector<DiscriminationTrial>& trials) {
  if (trials.empty()) throw DataError("no discrimination trials");
  std::set<double> xs, ys;
  std::map<std::pair<double, double>, std::vector<DiscriminationTrial>> at;
  for (const auto& t : trials) {
    xs.insert(t.x);
    ys.insert(t.y);
    at[{t.y, t.x}].push_back(t);
  }
  DPrimeGrid g;
  g.xs.assign(xs.begin(), xs.end());
  g.ys.assign(ys.begin(), ys.end());
  g.values = Grid::Zero(static_cast<Index>(g.ys.size()), static_cast<Index>(g.xs.size()));
  std::string missing;
  for (std::size_t i = 0; i < g.ys.size(); ++i) {
    for (std::size_t j = 0; j < g.xs.size(); ++j) {
      auto it = at.find({g.ys[i], g.xs[j]});
      if (it == at.end()) {
        missing += " (" + format_point(g.xs[j], g.ys[i]) + ")";
        continue;
      }
      try {
        g.values(static_cast<Index>(i), static_cast<Index>(j)) = dprime_point(it->second);
      } catch (const DataError& e) {
        throw DataError("probe point (" + format_point(g.xs[j], g.ys[i]) + "): " + e.what());
      }
    }
  }
  if (!missing.empty()) throw DataError("d' grid has probe points without trials:" + missing);
  return g;
}

Grid dprime_surface(const Grid& grid_values, double smooth_sigma, Index rows, Index cols,
                    const KnotLayout& layout) {
  if (grid_values.rows() < 4 || grid_values.cols() < 4) {
    throw DataError("d' grid must be at least 4 x 4 for cubic interpolation, got " +
                    std::to_string(grid_values.rows()) + " x " + std::to_string(grid_values.cols()));
  }
  const Grid smoothed = gaussian_blur(grid_values, smooth_sigma);
  return interpolate_bicubic(smoothed, rows, cols, layout).square();
}

SelectivityMap dprime_map(const Grid& grid_values, double smooth_sigma, Index rows, Index cols,
                          const KnotLayout& layout) {
  SelectivityMap m;
  m.kind = MapKind::DPrime;
  m.grid = dprime_surface(grid_values, smooth_sigma, rows, cols, layout);
  return normalized(std::move(m));
}

KnotLayout dprime_layout(const DPrimeGrid& grid, double source_width, double source_height,
                         Index rows, Index cols) {
  auto axis = [](const std::vector<double>& v, const char* name) {
    if (v.size() < 2) throw DataError(std::string("d' grid needs two or more ") + name + " positions");
    const double step = (v.back() - v.front()) / static_cast<double>(v.size() - 1);
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (std::abs((v[i] - v[i - 1]) - step) > 1e-6 * std::max(1.0, step)) {
        throw DataError(std::string("d' probe ") + name + " positions are not evenly spaced");
      }
    }
    return step;
  };
  const double step_x = axis(grid.xs, "x");
  const double step_y = axis(grid.ys, "y");
  const double scale_x = static_cast<double>(cols) / source_width;
  const double scale_y = static_cast<double>(rows) / source_height;
  KnotLayout layout;
  layout.origin_x = (grid.xs.front() + 0.5) * scale_x - 0.5;
  layout.origin_y = (grid.ys.front() + 0.5) * scale_y - 0.5;
  layout.step_x = step_x * scale_x;
  layout.step_y = step_y * scale_y;
  return layout;
}

// ---- KDE ----------------------------------------------------------------

Bandwidth silverman_bandwidth(const std::vector<Point>& points, double floor_px) {
  if (points.empty()) throw DataError("bandwidth of an empty point set");
  const auto n = static_cast<double>(points.size());
  auto rule = [&](auto coord) {
    if (points.size() < 2) return floor_px;
    std::vector<double> v;
    for (const Point& p : points) v.push_back(coord(p));
    return std::max(floor_px, 1.06 * stats::stddev(v) * std::pow(n, -0.2));
  };
  return {rule([](const Point& p) { return p.x; }), rule([](const Point& p) { return p.y; })};
}

SelectivityMap kde_map(const std::vector<Point>& points, const Bandwidth& bandwidth, Index rows,
                       Index cols) {
  if (points.empty()) throw DataError("KDE needs at least one point");
  if (!(bandwidth.sx > 0 && bandwidth.sy > 0)) throw DataError("KDE bandwidths must be positive");
  std::vector<double> xs, ys;
  for (const Point& p : points) {
    xs.push_back(p.x);
    ys.push_back(p.y);
  }
  const Matrix gy = axis_weights(rows, ys, bandwidth.sy, false);
  const Matrix gx = axis_weights(cols, xs, bandwidth.sx, false);
  Grid density = (gy * gx.transpose()).array();
  const double total = density.sum();
  if (!(total > 0)) throw DataError("KDE underflow: bandwidth too small for the lattice");
  SelectivityMap m;
  m.kind = MapKind::SpatialKDE;
  m.grid = density / total;
  return m;
}

Point to_output_coords(Point p, double source_width, double source_height, Index rows, Index cols) {
  return {(p.x + 0.5) * static_cast<double>(cols) / source_width - 0.5,
          (p.y + 0.5) * static_cast<double>(rows) / source_height - 0.5};
}

SelectivityMap spatial_kde_map(const std::vector<ChainPoint>& chains, const Bandwidth& bandwidth,
                               Index rows, Index cols) {
  std::vector<Point> final_points;
  for (const ChainPoint& c : chains)
    if (c.iteration == kFinalChainIteration) final_points.push_back({c.x, c.y});
  if (final_points.empty()) {
    throw DataError("no chain reached iteration " + std::to_string(kFinalChainIteration));
  }
  SelectivityMap m = kde_map(final_points, bandwidth, rows, cols);
  m.image_id = chains.front().image_id;
  return m;
}

// ---- Human PC -------------------------------------------------------------

double HumanPCModel::explained_variance_ratio() const {
  double total = 0;
  for (double e : eigenvalues) total += e;
  return total > 0 ? eigenvalues[0] / total : 0.0;
}

namespace {

struct Standardized {
  Eigen::Matrix<double, Eigen::Dynamic, kHumanKinds> z;
  std::array<double, kHumanKinds> means{};
  std::array<double, kHumanKinds> stds{};
  Index rows = 0, cols = 0;
};

Standardized standardize(const std::vector<std::vector<Grid>>& maps) {
  if (maps.size() != kHumanKinds) {
    throw DataError("Human PC needs " + std::to_string(kHumanKinds) + " map kinds, got " +
                    std::to_string(maps.size()));
  }
  const std::size_t m = maps.front().size();
  if (m == 0) throw DataError("Human PC needs at least one image");
  Standardized s;
  s.rows = maps.front().front().rows();
  s.cols = maps.front().front().cols();
  const Index pixels = s.rows * s.cols;
  const Index n = pixels * static_cast<Index>(m);
  s.z.resize(n, kHumanKinds);
  for (int k = 0; k < kHumanKinds; ++k) {
    const auto kind = human_kinds()[static_cast<std::size_t>(k)];
    if (maps[static_cast<std::size_t>(k)].size() != m) {
      throw DataError("kind '" + to_string(kind) + "' has a different image count");
    }
    for (std::size_t i = 0; i < m; ++i) {
      const Grid& g = maps[static_cast<std::size_t>(k)][i];
      if (g.rows() != s.rows || g.cols() != s.cols) {
        throw ShapeError("Human PC maps must share one size; resample them first");
      }
      s.z.col(k).segment(static_cast<Index>(i) * pixels, pixels) =
          Eigen::Map<const Eigen::VectorXd>(g.data(), pixels);
    }
    const double mean = s.z.col(k).mean();
    const double var = (s.z.col(k).array() - mean).square().sum() / static_cast<double>(n - 1);
    if (!(var > 1e-24 * mean * mean) || n < 2) throw DataError("kind '" + to_string(kind) + "' has zero variance");
    s.means[static_cast<std::size_t>(k)] = mean;
    s.stds[static_cast<std::size_t>(k)] = std::sqrt(var);
    s.z.col(k) = (s.z.col(k).array() - mean) / std::sqrt(var);
  }
  return s;
}

}  // namespace

Eigen::Matrix<double, kHumanKinds, kHumanKinds> standardized_covariance(
    const std::vector<std::vector<Grid>>& maps) {
  const Standardized s = standardize(maps);
  return (s.z.transpose() * s.z) / static_cast<double>(s.z.rows() - 1);
}

HumanPCModel fit_human_pc(const std::vector<std::vector<Grid>>& maps, double fixation_downweight) {
  const Standardized s = standardize(maps);
  const Eigen::Matrix<double, kHumanKinds, kHumanKinds> cov =
      (s.z.transpose() * s.z) / static_cast<double>(s.z.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, kHumanKinds, kHumanKinds>> eig(cov);
  if (eig.info() != Eigen::Success) throw DataError("eigendecomposition failed");

  Eigen::Matrix<double, kHumanKinds, 1> pc = eig.eigenvectors().col(kHumanKinds - 1);
  const double sum = pc.sum();
  bool flip = sum < 0;
  if (sum == 0) {
    for (int k = 0; k < kHumanKinds; ++k) {
      if (pc[k] != 0) {
        flip = pc[k] < 0;
        break;
      }
    }
  }
  if (flip) pc = -pc;

  HumanPCModel model;
  model.fixation_downweight = fixation_downweight;
  model.means = s.means;
  model.stds = s.stds;
  model.rows = s.rows;
  model.cols = s.cols;
  for (int k = 0; k < kHumanKinds; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    model.pca_loadings[uk] = pc[k];
    model.loadings[uk] =
        pc[k] * (is_fixation_kind(human_kinds()[uk]) ? fixation_downweight : 1.0);
    model.eigenvalues[uk] = eig.eigenvalues()[kHumanKinds - 1 - k];
  }
  return model;
}

SelectivityMap project_human_pc(const HumanPCModel& model, const std::vector<Grid>& kind_maps,
                                const std::string& image_id) {
  if (kind_maps.size() != kHumanKinds) {
    throw DataError("Human PC projection needs all " + std::to_string(kHumanKinds) +
                    " kinds, got " + std::to_string(kind_maps.size()));
  }
  Grid acc = Grid::Zero(model.rows, model.cols);
  for (int k = 0; k < kHumanKinds; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const Grid g = resize_bilinear(kind_maps[uk], model.rows, model.cols);
    acc += model.loadings[uk] * (g - model.means[uk]) / model.stds[uk];
  }
  SelectivityMap m;
  m.image_id = image_id;
  m.kind = MapKind::HumanPC;
  bool flat = false;
  m.grid = min_max_normalize(acc, &flat);
  m.zero = flat && !(acc.maxCoeff() > 0);
  return m;
}

std::string human_pc_json(const HumanPCModel& model) {
  nlohmann::ordered_json j;
  std::vector<std::string> kinds;
  for (MapKind k : human_kinds()) kinds.push_back(to_string(k));
  j["kinds"] = kinds;
  j["pca_loadings"] = model.pca_loadings;
  j["loadings"] = model.loadings;
  j["fixation_downweight"] = model.fixation_downweight;
  j["means"] = model.means;
  j["stds"] = model.stds;
  j["eigenvalues"] = model.eigenvalues;
  j["explained_variance_ratio"] = model.explained_variance_ratio();
  j["size"] = {model.rows, model.cols};
  return j.dump(2);
}

HumanPCModel parse_human_pc_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    HumanPCModel m;
    m.pca_loadings = j.at("pca_loadings").get<std::array<double, kHumanKinds>>();
    m.loadings = j.at("loadings").get<std::array<double, kHumanKinds>>();
    m.means = j.at("means").get<std::array<double, kHumanKinds>>();
    m.stds = j.at("stds").get<std::array<double, kHumanKinds>>();
    m.eigenvalues = j.value("eigenvalues", std::array<double, kHumanKinds>{});
    m.fixation_downweight = j.at("fixation_downweight").get<double>();
    m.rows = j.at("size").at(0).get<Index>();
    m.cols = j.at("size").at(1).get<Index>();
    for (double s : m.stds)
      if (!(s > 0)) throw FormatError("PC model: std parameters must be positive");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("PC model: ") + e.what());
  }
}

// ---- whole-study estimation ---------------------------------------------

std::pair<double, double> HumanMapConfig::source_size(const std::string& image_id) const {
  auto it = source_sizes.find(image_id);
  return it == source_sizes.end() ? default_source_size : it->second;
}

std::vector<std::string> dataset_image_ids(const HumanDataset& data, MapKind kind) {
  std::set<std::string> ids;
  switch (kind) {
    case MapKind::Patch:
      for (const auto& r : data.ratings) ids.insert(r.image_id);
      break;
    case MapKind::DPrime:
      for (const auto& r : data.discrimination) ids.insert(r.image_id);
      break;
    case MapKind::SpatialKDE:
      for (const auto& r : data.chains) ids.insert(r.image_id);
      break;
    case MapKind::FreeFix:
    case MapKind::SaliencyFix:
    case MapKind::ObjectFix: {
      const FixationTask task = task_of(kind);
      for (const auto& r : data.fixations)
        if (r.task == task) ids.insert(r.image_id);
      break;
    }
    default:
      throw ConfigError("'" + to_string(kind) + "' is not a behavioural map kind");
  }
  return {ids.begin(), ids.end()};
}

namespace {

SelectivityMap estimate_one(const HumanDataset& data, MapKind kind, const HumanMapConfig& cfg,
                            const std::string& id,
                            const std::map<std::string, std::vector<PatchRating>>& ratings,
                            const std::map<std::string, std::vector<DiscriminationTrial>>& trials,
                            const std::map<std::string, std::vector<ChainPoint>>& chains,
                            const std::map<std::string, std::vector<Fixation>>& fixations) {
  (void)data;
  const auto [sw, sh] = cfg.source_size(id);
  auto check_bounds = [&](double x, double y) {
    if (x >= sw || y >= sh) {
      throw DataError("point (" + format_point(x, y) + ") outside the " + format_number(sw) +
                      " x " + format_number(sh) + " source image");
    }
  };
  auto kde_of = [&](std::vector<Point> pts) {
    for (Point& p : pts) {
      check_bounds(p.x, p.y);
      p = to_output_coords(p, sw, sh, cfg.rows, cfg.cols);
    }
    const Bandwidth bw = cfg.kde_bandwidth ? *cfg.kde_bandwidth : silverman_bandwidth(
        pts, std::max(1.0, 0.02 * static_cast<double>(std::max(cfg.rows, cfg.cols))));
    return kde_map(pts, bw, cfg.rows, cfg.cols);
  };
  SelectivityMap m;
  switch (kind) {
    case MapKind::Patch:
      m = patch_map(ratings.at(id), cfg.rows, cfg.cols, cfg.patch_sigma);
      break;
    case MapKind::DPrime: {
      for (const auto& t : trials.at(id)) check_bounds(t.x, t.y);
      const DPrimeGrid grid = dprime_grid(trials.at(id));
      m = dprime_map(grid.values, cfg.dprime_sigma, cfg.rows, cfg.cols,
                     dprime_layout(grid, sw, sh, cfg.rows, cfg.cols));
      break;
    }
    case MapKind::SpatialKDE: {
      std::vector<Point> pts;
      for (const auto& c : chains.at(id))
        if (c.iteration == kFinalChainIteration) pts.push_back({c.x, c.y});
      if (pts.empty()) {
        throw DataError("no chain reached iteration " + std::to_string(kFinalChainIteration));
      }
      m = normalized(kde_of(std::move(pts)));
      break;
    }
    default: {
      std::vector<Point> pts;
      for (const auto& f : fixations.at(id)) pts.push_back({f.x, f.y});
      m = normalized(kde_of(std::move(pts)));
      break;
    }
  }
  m.image_id = id;
  m.kind = kind;
  return m;
}

}  // namespace

std::map<std::string, SelectivityMap> estimate_human_maps(
    const HumanDataset& data, MapKind kind, const HumanMapConfig& cfg,
    std::map<std::string, std::string>* failures) {
  const auto ids = dataset_image_ids(data, kind);
  std::map<std::string, std::vector<PatchRating>> ratings;
  std::map<std::string, std::vector<DiscriminationTrial>> trials;
  std::map<std::string, std::vector<ChainPoint>> chains;
  std::map<std::string, std::vector<Fixation>> fixations;
  if (kind == MapKind::Patch) ratings = group_by_image(data.ratings, [](auto&) { return true; });
  if (kind == MapKind::DPrime) {
    trials = group_by_image(data.discrimination, [](auto&) { return true; });
  }
  if (kind == MapKind::SpatialKDE) chains = group_by_image(data.chains, [](auto&) { return true; });
  if (is_fixation_kind(kind)) {
    const FixationTask task = task_of(kind);
    fixations = group_by_image(data.fixations, [&](const Fixation& f) { return f.task == task; });
  }
  std::map<std::string, SelectivityMap> out;
  for (const auto& id : ids) {
    try {
      out.emplace(id, estimate_one(data, kind, cfg, id, ratings, trials, chains, fixations));
    } catch (const DataError& e) {
      const std::string msg = to_string(kind) + " map for image '" + id + "': " + e.what();
      if (!failures) throw DataError(msg);
      (*failures)[id] = msg;
    }
  }
  return out;
}

std::map<std::string, SelectivityMap> estimate_human_pc_maps(const HumanDataset& data,
                                                             const HumanPCModel& model,
                                                             const HumanMapConfig& cfg) {
  std::vector<std::map<std::string, SelectivityMap>> per_kind;
  for (MapKind k : human_kinds()) per_kind.push_back(estimate_human_maps(data, k, cfg));
  std::map<std::string, SelectivityMap> out;
  for (const auto& [id, first] : per_kind.front()) {
    std::vector<Grid> grids;
    for (const auto& kind_maps : per_kind) {
      auto it = kind_maps.find(id);
      if (it == kind_maps.end()) break;
      grids.push_back(it->second.grid);
    }
    if (grids.size() != kHumanKinds) continue;
    out.emplace(id, project_human_pc(model, grids, id));
  }
  return out;
}

namespace {

template <typename Record, typename KeyFn>
std::vector<Record> resample_units(const std::vector<Record>& records, KeyFn key,
                                   std::mt19937_64& rng) {
  std::map<std::string, std::vector<const Record*>> units;
  for (const Record& r : records) units[key(r)].push_back(&r);
  if (units.empty()) return {};
  std::vector<const std::vector<const Record*>*> index;
  for (const auto& [k, v] : units) index.push_back(&v);
  std::uniform_int_distribution<std::size_t> pick(0, index.size() - 1);
  std::vector<Record> out;
  for (std::size_t draw = 0; draw < index.size(); ++draw) {
    for (const Record* r : *index[pick(rng)]) out.push_back(*r);
  }
  return out;
}

}  // namespace

HumanDataset resample_dataset(const HumanDataset& data, MapKind kind, std::mt19937_64& rng) {
  HumanDataset out = data;
  switch (kind) {
    case MapKind::Patch:
      out.ratings = resample_units(data.ratings, [](const PatchRating& r) { return r.participant_id; }, rng);
      break;
    case MapKind::DPrime:
      out.discrimination = resample_units(
          data.discrimination, [](const DiscriminationTrial& r) { return r.participant_id; }, rng);
      break;
    case MapKind::SpatialKDE: {
      out.chains.clear();
      auto by_image = group_by_image(data.chains, [](auto&) { return true; });
      for (const auto& [id, pts] : by_image) {
        // Chains drawn twice must stay distinct, so relabel per draw.
        std::map<std::string, std::vector<const ChainPoint*>> units;
        for (const ChainPoint& c : pts) units[c.chain_id].push_back(&c);
        std::vector<const std::vector<const ChainPoint*>*> index;
        for (const auto& [k, v] : units) index.push_back(&v);
        std::uniform_int_distribution<std::size_t> pick(0, index.size() - 1);
        for (std::size_t draw = 0; draw < index.size(); ++draw) {
          for (const ChainPoint* c : *index[pick(rng)]) {
            ChainPoint copy = *c;
            copy.chain_id += "#" + std::to_string(draw);
            out.chains.push_back(std::move(copy));
          }
        }
      }
      break;
    }
    case MapKind::FreeFix:
    case MapKind::SaliencyFix:
    case MapKind::ObjectFix: {
      const FixationTask task = task_of(kind);
      out.fixations.clear();
      std::map<std::string, std::vector<const Fixation*>> points;
      for (const Fixation& f : data.fixations) {
        if (f.task == task) {
          points[f.image_id].push_back(&f);
        } else {
          out.fixations.push_back(f);
        }
      }
      for (const auto& [id, pts] : points) {
        std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
        for (std::size_t draw = 0; draw < pts.size(); ++draw) out.fixations.push_back(*pts[pick(rng)]);
      }
      break;
    }
    case MapKind::HumanPC:
      for (MapKind k : human_kinds()) out = resample_dataset(out, k, rng);
      break;
    default:
      throw ConfigError("'" + to_string(kind) + "' is not a behavioural map kind");
  }
  return out;
}

}  // namespace vsel
