// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Tolerances, trial counts and time budgets are fixed here, and so are all seeds.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "support.hpp"
#include "vsel/attribution.hpp"
#include "vsel/behavioral.hpp"
#include "vsel/compare.hpp"
#include "vsel/filter.hpp"
#include "vsel/mask_eval.hpp"
#include "vsel/model.hpp"
#include "vsel/stats.hpp"

using namespace vsel;
namespace fs = std::filesystem;

namespace {

const fs::path kToyDir = fs::path(VSEL_SOURCE_DIR) / "models/toy_shapes";

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

// ---- shared oracles --------------------------------------------------------

// conv(C -> K, 3x3, pad 1) -> ReLU -> GAP -> linear(K -> classes).
ModelGraph cam_net(std::mt19937_64& rng, Index channels, Index k, Index classes, Index size) {
  return GraphBuilder({channels, size, size})
      .conv("conv", testkit::random_tensor({k, channels, 3, 3}, rng, 0.5), testkit::random_tensor({k}, rng, 0.1), 1, 1)
      .relu("relu")
      .global_avg_pool("gap")
      .linear("fc", testkit::random_tensor({classes, k}, rng), testkit::random_tensor({classes}, rng, 0.1))
      .build();
}

Grid normalised(const Grid& g) { return (g - g.minCoeff()) / (g.maxCoeff() - g.minCoeff()); }

double bisect_quantile(double p) {
  long double lo = -40, hi = 40;
  for (int i = 0; i < 200; ++i) {
    const long double mid = (lo + hi) / 2;
    const long double cdf = 0.5L * std::erfc(-mid / std::sqrt(2.0L));
    (cdf < p ? lo : hi) = mid;
  }
  return static_cast<double>((lo + hi) / 2);
}

Grid uniform_grid(std::mt19937_64& rng, Index rows, Index cols) {
  std::uniform_real_distribution<double> u(0, 1);
  Grid g(rows, cols);
  for (Index i = 0; i < g.size(); ++i) g(i) = u(rng);
  return g;
}

int vsel(const std::vector<std::string>& args, std::string* err = nullptr) {
  std::ostringstream out, e;
  const int code = cli::run(args, out, e);
  if (err) *err = e.str();
  return code;
}

// ---- criteria --------------------------------------------------------------

Outcome gradient_oracle() {
  constexpr int kGraphs = 200;
  constexpr double kTol = 1e-4;
  std::mt19937_64 rng(1001);
  double worst = 0;
  for (int trial = 0; trial < kGraphs; ++trial) {
    const ModelGraph g = testkit::random_graph(rng);
    const Tensor x = testkit::random_tensor(g.input_shape(), rng);
    const Index cls = static_cast<Index>(rng() % static_cast<std::uint64_t>(g.output_shape().back()));
    Tensor seed(g.output_shape());
    seed[cls] = 1;
    ComputationTape tape = record_forward(g, x);
    const Tensor grad = tape.backward(seed, GradientGate::Standard);
    worst = std::max(worst, testkit::relative_error(grad, finite_difference_gradient(g, x, cls, 1e-6)));
  }
  return {worst < kTol, "max relative error " + fmt("%.2e", worst) + " over 200 graphs (limit 1e-4)"};
}

Outcome gate_identity() {
  std::mt19937_64 rng(1002);
  int mismatches = 0, total = 0;
  for (int trial = 0; trial < 100; ++trial, ++total) {
    const ModelGraph g = testkit::random_graph(rng, true);
    const Tensor x = testkit::random_tensor(g.input_shape(), rng);
    const Index cls = static_cast<Index>(rng() % static_cast<std::uint64_t>(g.output_shape().back()));
    const auto a = channel_reduce(raw_gradient(g, x, cls, GradientGate::Standard));
    const auto b = channel_reduce(raw_gradient(g, x, cls, GradientGate::GuidedReLU));
    if (!(a.grid == b.grid).all()) ++mismatches;
  }
  // Positive weights and inputs keep every activation and every gradient
  // reaching a ReLU positive.
  std::uniform_real_distribution<double> pos(0.1, 1.0);
  auto positive = [&](Shape s) {
    Tensor t(std::move(s));
    for (Index i = 0; i < t.size(); ++i) t[i] = pos(rng);
    return t;
  };
  for (int trial = 0; trial < 50; ++trial, ++total) {
    const Index c = 1 + trial % 3, size = 4 + trial % 5;
    const ModelGraph g = GraphBuilder({c, size, size})
                             .conv("c1", positive({3, c, 3, 3}), positive({3}), 1, 1)
                             .relu()
                             .max_pool(2, 1)
                             .conv("c2", positive({2, 3, 3, 3}), positive({2}))
                             .relu()
                             .global_avg_pool()
                             .linear("fc", positive({2, 2}), positive({2}))
                             .build();
    const ModelInput in = ModelInput::from_tensor(positive({c, size, size}));
    const Index cls = trial % 2;
    if (!(vanilla_gradient(g, in, cls).grid == guided_backprop(g, in, cls).grid).all()) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " bitwise mismatches over " + std::to_string(total) +
                               " graphs (100 ReLU-free, 50 all-positive)"};
}

Outcome cam_equivalence() {
  constexpr double kTol = 1e-6;
  std::mt19937_64 rng(1003);
  double worst = 0;
  int used = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const ModelGraph g = cam_net(rng, 1 + trial % 3, 2 + trial % 5, 3, 5 + trial % 6);
    const Tensor x = testkit::random_tensor(g.input_shape(), rng);
    const Index cls = top_class(predict(g, x).logits);
    const Tensor act = evaluate(g, x, 2);
    const Tensor& fc = g.layers()[3].params[0];
    Grid cam = Grid::Zero(act.height(), act.width());
    for (Index k = 0; k < act.channels(); ++k) cam += fc[cls * act.channels() + k] * act.channel(k);
    cam = cam.cwiseMax(0.0);
    if (!(cam.maxCoeff() > cam.minCoeff())) continue;
    ++used;
    const SelectivityMap m = grad_cam(g, ModelInput::from_tensor(x), cls, "conv");
    worst = std::max(worst, (m.grid - normalised(cam)).abs().maxCoeff());
  }
  return {used >= 40 && worst < kTol,
          "max |grad-cam - explicit cam| " + fmt("%.2e", worst) + " over " + std::to_string(used) +
              " nets (limit 1e-6)"};
}

Outcome score_cam_oracle() {
  std::mt19937_64 rng(1004);
  int mismatches = 0;
  constexpr int kNets = 20;
  constexpr Index n = 6;
  for (int trial = 0; trial < kNets; ++trial) {
    const ModelGraph g = cam_net(rng, 1, 2, 3, n);
    const Tensor x = testkit::random_tensor(g.input_shape(), rng);
    const Index cls = trial % 3;
    const Tensor act = evaluate(g, x, 2);
    double w[2];
    for (Index k = 0; k < 2; ++k) {
      double lo = act.channel(k)(0, 0), hi = lo;
      for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c) {
          lo = std::min(lo, act.channel(k)(r, c));
          hi = std::max(hi, act.channel(k)(r, c));
        }
      Tensor masked = x;
      for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c) masked.channel(0)(r, c) *= hi > lo ? (act.channel(k)(r, c) - lo) / (hi - lo) : 0.0;
      const Tensor logits = evaluate(g, masked);
      double peak = logits[0];
      for (Index j = 1; j < 3; ++j) peak = std::max(peak, logits[j]);
      double z = 0;
      for (Index j = 0; j < 3; ++j) z += std::exp(logits[j] - peak);
      w[k] = std::exp(logits[cls] - peak) / z;
    }
    Grid cam(n, n);
    for (Index r = 0; r < n; ++r)
      for (Index c = 0; c < n; ++c) cam(r, c) = std::max(0.0, w[0] * act.channel(0)(r, c) + w[1] * act.channel(1)(r, c));
    const CamParts parts = score_cam_parts(g, x, cls, "conv");
    if (!(parts.weights[0] == w[0] && parts.weights[1] == w[1] && (parts.cam == cam).all())) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " inexact results over 20 two-map nets"};
}

Outcome normal_quantile() {
  constexpr double kTol = 1e-8;
  double worst = 0;
  // Log-spaced tails plus a uniform body.
  std::vector<double> ps;
  for (int i = 0; i <= 300; ++i) {
    const double p = std::pow(10.0, -4.0 + 3.0 * i / 300.0);
    ps.push_back(p);
    ps.push_back(1 - p);
  }
  for (int i = 1; i < 1000; ++i) ps.push_back(i / 1000.0);
  for (double p : ps) worst = std::max(worst, std::abs(stats::normal_quantile(p) - bisect_quantile(p)));
  const double d = stats::dprime(0.8, 0.2);
  return {worst < kTol && std::abs(d - 1.68324) < 1e-4,
          "max |Z - oracle| " + fmt("%.2e", worst) + " over " + std::to_string(ps.size()) +
              " p in [1e-4, 1-1e-4] (limit 1e-8); d'(0.8, 0.2) = " + fmt("%.6f", d)};
}

Outcome kde_normalization() {
  std::mt19937_64 rng(1006);
  std::uniform_real_distribution<double> u(-0.1, 1.1), bw(0.5, 25);
  std::uniform_int_distribution<int> count(1, 60), side(10, 100);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    // Points fall on the lattice or slightly past its edges.
    const Index rows = side(rng), cols = side(rng);
    std::vector<Point> pts(static_cast<std::size_t>(count(rng)));
    for (Point& p : pts) p = {u(rng) * static_cast<double>(cols), u(rng) * static_cast<double>(rows)};
    const SelectivityMap m = kde_map(pts, {bw(rng), bw(rng)}, rows, cols);
    worst = std::max(worst, std::abs(m.grid.sum() - 1.0));
  }
  return {worst < 1e-6, "max |sum - 1| " + fmt("%.2e", worst) + " over 1000 point sets (limit 1e-6)"};
}

Outcome mask_support() {
  std::mt19937_64 rng(1007);
  int wrong = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const SelectivityMap m = threshold_mask({"img", MapKind::GBP, uniform_grid(rng, 100, 100), false}, 0.5);
    if ((m.grid > 0).count() != 5000) ++wrong;
  }
  return {wrong == 0, std::to_string(wrong) + " of 100 random 100x100 maps without exactly 5000 revealed pixels"};
}

Outcome sigma_recovery() {
  std::mt19937_64 rng(1008);
  MapSet ann;
  for (int i = 0; i < 3; ++i) ann.emplace("img" + std::to_string(i), uniform_grid(rng, 100, 100));
  const SmoothingSearchConfig cfg;  // 0..30 in steps of 0.5 at 100x100
  bool ok = true;
  std::string detail = "sigma* for";
  for (double truth : {2.0, 5.0, 10.0, 20.0}) {
    MapSet human;
    for (const auto& [id, g] : ann) human.emplace(id, gaussian_blur(g, truth));
    const ComparisonResult res = optimal_smoothing(ann, human, cfg);
    ok = ok && std::abs(res.sigma_star - truth) <= cfg.sigma_step;
    detail += " " + fmt("%g", truth) + " -> " + fmt("%g", res.sigma_star) + ";";
  }
  return {ok, detail + " tolerance one grid step (0.5)"};
}

Outcome pca_oracle() {
  std::mt19937_64 rng(1009);
  std::normal_distribution<double> n(0, 1);
  const double mix[kHumanKinds] = {0.9, 0.7, 0.5, 0.8, 0.3, -0.4};
  double worst = 0;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<Grid>> maps(kHumanKinds);
    for (int i = 0; i < 4; ++i) {
      Grid common(12, 12);
      for (Index p = 0; p < common.size(); ++p) common(p) = n(rng);
      for (int k = 0; k < kHumanKinds; ++k) {
        Grid g(12, 12);
        for (Index p = 0; p < g.size(); ++p) g(p) = mix[k] * common(p) + n(rng) * (0.3 + 0.1 * k);
        maps[static_cast<std::size_t>(k)].push_back(g);
      }
    }
    const HumanPCModel model = fit_human_pc(maps);
    double top = 0;
    Eigen::VectorXd v = testkit::jacobi_top_eigenvector(standardized_covariance(maps), &top);
    if (v.sum() < 0) v = -v;
    for (int k = 0; k < kHumanKinds; ++k)
      worst = std::max(worst, std::abs(model.pca_loadings[static_cast<std::size_t>(k)] - v[k]));
  }
  // Every kind equal to one common map: the PC map is that map.
  std::vector<std::vector<Grid>> same(kHumanKinds);
  std::vector<Grid> commons;
  for (int i = 0; i < 3; ++i) {
    commons.push_back(uniform_grid(rng, 16, 16));
    for (auto& kind : same) kind.push_back(commons.back());
  }
  const HumanPCModel rank1 = fit_human_pc(same);
  const SelectivityMap pc = project_human_pc(rank1, std::vector<Grid>(kHumanKinds, commons[2]));
  const double rank1_err = (pc.grid - min_max_normalize(commons[2])).abs().maxCoeff();
  return {worst < 1e-8 && rank1_err < 1e-8,
          "max loading error " + fmt("%.2e", worst) + " over 10 fits (limit 1e-8); rank-1 PC map error " +
              fmt("%.2e", rank1_err)};
}

// Shared end-to-end workspace: fixture, toy-model SGBP and GBP maps, human maps.
struct Workspace {
  fs::path root;
  std::string error;
};

const Workspace& workspace() {
  static const Workspace ws = [] {
    Workspace w{testkit::scratch_dir("acceptance"), {}};
    const std::string fx = (w.root / "fx").string();
    const std::vector<std::string> model = {"--model", (kToyDir / "manifest.json").string(), "--weights",
                                            (kToyDir / "weights.selw").string()};
    std::vector<std::string> attribute = {"attribute", "--images", fx + "/images", "--out", (w.root / "ann").string(),
                                          "--methods", "sgbp,gbp"};
    attribute.insert(attribute.end(), model.begin(), model.end());
    std::string err;
    if (vsel({"export-fixture", "--out", fx, "--count", "30", "--seed", "505"}, &err) != 0 ||
        vsel(attribute, &err) != 0 ||
        vsel({"maps", "--config", fx + "/config.json", "--out", (w.root / "human").string()}, &err) != 0)
      w.error = err;
    return w;
  }();
  return ws;
}

std::vector<std::string> evaluate_args(const fs::path& out, const std::string& kinds, const std::string& jobs) {
  const Workspace& w = workspace();
  return {"evaluate", "--model", (kToyDir / "manifest.json").string(), "--weights",
          (kToyDir / "weights.selw").string(), "--images", (w.root / "fx/images").string(), "--maps",
          (w.root / "ann").string(), "--kinds", kinds, "--out", out.string(), "--jobs", jobs};
}

Outcome directional_masking() {
  const Workspace& w = workspace();
  if (!w.error.empty()) return {false, "pipeline failed: " + w.error};
  const auto report = nlohmann::json::parse(std::ifstream(kToyDir / "training_report.json"));
  const double accuracy = report["test_accuracy"].get<double>();
  std::string err;
  if (vsel(evaluate_args(w.root / "directional", "sgbp", "1"), &err) != 0) return {false, "evaluate failed: " + err};
  const auto summary = nlohmann::json::parse(std::ifstream(w.root / "directional/summary.json")).front();
  const double correct = summary["mean_correct"], incorrect = summary["mean_incorrect"], p = summary["bootstrap_p"];
  const std::size_t images = summary["image_ids"].size();
  return {accuracy >= 0.9 && images >= 20 && correct > incorrect && p < 0.05,
          "toy model accuracy " + fmt("%.3f", accuracy) + ", " + std::to_string(images) +
              " images all-vs-all, mean inverse rank correct " + fmt("%.4f", correct) + " vs incorrect " +
              fmt("%.4f", incorrect) + ", paired bootstrap p " + fmt("%.4f", p) + " (limit 0.05)"};
}

Outcome determinism() {
  const Workspace& w = workspace();
  if (!w.error.empty()) return {false, "pipeline failed: " + w.error};
  std::string err;
  for (const std::string jobs : {"1", "8"}) {
    if (vsel(evaluate_args(w.root / ("ev" + jobs), "sgbp,gbp", jobs), &err) != 0)
      return {false, "evaluate failed: " + err};
    if (vsel({"correlate", "--ann", (w.root / "ann").string(), "--human", (w.root / "human").string(), "--data",
              (w.root / "fx/human").string(), "--bootstrap", "20", "--out", (w.root / ("co" + jobs)).string(),
              "--jobs", jobs},
             &err) != 0)
      return {false, "correlate failed: " + err};
  }
  const auto ev1 = testkit::tree_contents(w.root / "ev1"), co1 = testkit::tree_contents(w.root / "co1");
  const bool same_ev = ev1 == testkit::tree_contents(w.root / "ev8");
  const bool same_co = co1 == testkit::tree_contents(w.root / "co8");
  return {same_ev && same_co, std::string("evaluate ") + (same_ev ? "identical" : "differs") + " (" +
                                  std::to_string(ev1.size()) + " files), correlate " +
                                  (same_co ? "identical" : "differs") + " (" + std::to_string(co1.size()) +
                                  " files) between --jobs 1 and --jobs 8"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const double kNoBudget = std::numeric_limits<double>::infinity();
  const std::vector<Criterion> criteria{
      {"gradient-oracle", 30, gradient_oracle},
      {"gate-identity", 1, gate_identity},
      {"cam-equivalence", kNoBudget, cam_equivalence},
      {"score-cam-oracle", kNoBudget, score_cam_oracle},
      {"normal-quantile", kNoBudget, normal_quantile},
      {"kde-normalization", kNoBudget, kde_normalization},
      {"mask-support", kNoBudget, mask_support},
      {"sigma-recovery", 120, sigma_recovery},
      {"pca-oracle", kNoBudget, pca_oracle},
      {"directional-masking", 600, directional_masking},
      {"determinism", kNoBudget, determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::string timing = fmt("%.2f s", secs);
    if (std::isfinite(c.budget_s)) timing += " (limit " + fmt("%g", c.budget_s) + " s)";
    std::cout << (pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << "; " << timing << std::endl;
  }
  fs::remove_all(workspace().root);
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << "\n";
  return failed ? 1 : 0;
}
