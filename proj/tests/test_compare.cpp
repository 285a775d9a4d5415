#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>

#include "support.hpp"
#include "vsel/behavioral.hpp"
#include "vsel/compare.hpp"
#include "vsel/stats.hpp"

using namespace vsel;

namespace {

Grid noise(std::mt19937_64& rng, Index rows, Index cols) {
  std::uniform_real_distribution<double> u(0, 1);
  Grid g(rows, cols);
  for (Index i = 0; i < g.size(); ++i) g(i) = u(rng);
  return g;
}

MapSet noise_set(std::mt19937_64& rng, int n, Index size) {
  MapSet s;
  for (int i = 0; i < n; ++i) s.emplace("img" + std::to_string(i), noise(rng, size, size));
  return s;
}

}  // namespace

TEST(Blur, ZeroSigmaIsIdentity) {
  std::mt19937_64 rng(1);
  const Grid g = noise(rng, 7, 9);
  EXPECT_TRUE((gaussian_blur(g, 0.0) == g).all());
  EXPECT_THROW(gaussian_blur(g, -1.0), DataError);
}

TEST(Blur, PreservesConstantsAndMass) {
  EXPECT_LT((gaussian_blur(Grid::Constant(20, 15, 0.7), 3.3) - 0.7).abs().maxCoeff(), 1e-14);
  Grid impulse = Grid::Zero(41, 41);
  impulse(20, 20) = 1;
  const Grid b = gaussian_blur(impulse, 4.0);
  EXPECT_NEAR(b.sum(), 1.0, 1e-12);
  EXPECT_NEAR(b(20, 24), b(24, 20), 1e-15);
  EXPECT_NEAR(b(16, 20), b(24, 20), 1e-15);
}

TEST(Blur, ImpulseCentreEqualsCentreTap) {
  // Taps exp(-k^2 / 2), |k| <= 2, normalised: centre 1 / (1 + 2e^-1/2 + 2e^-2).
  Grid row = Grid::Zero(1, 9);
  row(0, 4) = 1;
  const Grid b = gaussian_blur(row, 1.0);
  EXPECT_NEAR(b(0, 4), 0.402620, 1e-6);
  EXPECT_NEAR(b(0, 4), 1 / (1 + 2 * std::exp(-0.5) + 2 * std::exp(-2.0)), 1e-15);
  EXPECT_EQ(b(0, 1), 0.0);
}

TEST(Pearson, KnownValuesAndInvariances) {
  const Grid a = (Grid(1, 4) << 1, 0, 1, 0).finished();
  const Grid b = (Grid(1, 4) << 1, 1, 0, 0).finished();
  EXPECT_NEAR(pearson(a, b), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(pearson(a, a), 1.0);
  std::mt19937_64 rng(2);
  const Grid x = noise(rng, 10, 10), y = x + 0.5 * noise(rng, 10, 10);
  const double r = pearson(x, y);
  EXPECT_NEAR(pearson(Grid(3 * x + 2), y), r, 1e-12);
  EXPECT_NEAR(pearson(Grid(-x), y), -r, 1e-12);
  EXPECT_NEAR(pearson(x, y), pearson(y, x), 1e-15);
  EXPECT_THROW(pearson(Grid::Ones(3, 3), x.block(0, 0, 3, 3)), DataError);
  EXPECT_THROW(pearson(a, x), ShapeError);
}

TEST(SmoothingSearch, GridAndValidation) {
  const SmoothingSearchConfig cfg;
  const auto g = cfg.grid();
  EXPECT_EQ(g.size(), 61u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g[7], 3.5);
  EXPECT_EQ(g.back(), 30.0);
  SmoothingSearchConfig bad;
  bad.sigma_step = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.sigma_min = 5;
  bad.sigma_max = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(SmoothingSearch, SelfComparisonPicksZero) {
  std::mt19937_64 rng(3);
  const MapSet s = noise_set(rng, 4, 30);
  SmoothingSearchConfig cfg;
  cfg.rows = cfg.cols = 30;
  cfg.sigma_max = 5;
  const ComparisonResult res = optimal_smoothing(s, s, cfg);
  EXPECT_EQ(res.sigma_star, 0.0);
  EXPECT_NEAR(res.mean_r, 1.0, 1e-12);
  EXPECT_EQ(res.per_image_r.size(), 4u);
  EXPECT_EQ(res.sweep.size(), 11u);
}

TEST(SmoothingSearch, RecoversBlurOfHumanMaps) {
  std::mt19937_64 rng(4);
  const MapSet ann = noise_set(rng, 3, 60);
  MapSet human;
  for (const auto& [id, g] : ann) human.emplace(id, gaussian_blur(g, 5.0));
  SmoothingSearchConfig cfg;
  cfg.rows = cfg.cols = 60;
  cfg.sigma_max = 12;
  const ComparisonResult res = optimal_smoothing(ann, human, cfg, 3);
  EXPECT_NEAR(res.sigma_star, 5.0, cfg.sigma_step);
  EXPECT_GT(res.mean_r, 0.99);
}

TEST(SmoothingSearch, AntiCorrelatedSetsGiveNegativeR) {
  std::mt19937_64 rng(5);
  const MapSet ann = noise_set(rng, 3, 20);
  MapSet human;
  for (const auto& [id, g] : ann) human.emplace(id, 1.0 - g);
  SmoothingSearchConfig cfg;
  cfg.rows = cfg.cols = 20;
  cfg.sigma_max = 3;
  const ComparisonResult res = optimal_smoothing(ann, human, cfg);
  EXPECT_LT(res.mean_r, 0.0);
  EXPECT_NEAR(res.sweep.front().mean_r, -1.0, 1e-12);
}

TEST(SmoothingSearch, IdMismatchIsReported) {
  std::mt19937_64 rng(6);
  MapSet ann = noise_set(rng, 2, 10), human = ann;
  human.erase("img1");
  human.emplace("other", noise(rng, 10, 10));
  try {
    optimal_smoothing(ann, human);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("img1"), std::string::npos);
    EXPECT_NE(msg.find("other"), std::string::npos);
  }
}

TEST(SmoothingSearch, DeterministicAcrossJobs) {
  std::mt19937_64 rng(7);
  const MapSet ann = noise_set(rng, 5, 25), human = noise_set(rng, 5, 25);
  SmoothingSearchConfig cfg;
  cfg.rows = cfg.cols = 25;
  cfg.sigma_max = 4;
  const auto a = optimal_smoothing(ann, human, cfg, 1);
  const auto b = optimal_smoothing(ann, human, cfg, 6);
  EXPECT_EQ(a.sigma_star, b.sigma_star);
  EXPECT_EQ(a.mean_r, b.mean_r);
  EXPECT_EQ(a.per_image_r, b.per_image_r);
}

TEST(Bootstrap, DegenerateDataHasZeroSpread) {
  const BootstrapSummary s = bootstrap(50, 1, [](Rng&) { return 0.25; });
  EXPECT_EQ(s.sd, 0.0);
  EXPECT_EQ(s.ci_lo, 0.25);
  EXPECT_EQ(s.ci_hi, 0.25);
  EXPECT_THROW(bootstrap(1, 1, [](Rng&) { return 0.0; }), ConfigError);
}

TEST(Bootstrap, DeterministicAndRedrawsFailures) {
  auto draw = [](Rng& rng) {
    const double v = std::uniform_real_distribution<double>(0, 1)(rng);
    if (v < 0.2) throw DataError("unlucky");
    return v;
  };
  const BootstrapSummary a = bootstrap(200, 9, draw, 1);
  const BootstrapSummary b = bootstrap(200, 9, draw, 4);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.failures, b.failures);
  EXPECT_GT(a.failures, 0u);
  EXPECT_EQ(a.values.size(), 200u);
  EXPECT_THROW(bootstrap(10, 1, [](Rng&) -> double { throw DataError("never"); }), DataError);
}

TEST(Bootstrap, SpreadOfResampledMeanMatchesBinomialTheory) {
  // Bootstrap of a cell-mean estimate from 0/1 ratings: SD ~ sqrt(p(1-p)/n).
  std::vector<PatchRating> ratings;
  const int n = 200;
  for (int i = 0; i < n; ++i) ratings.push_back({"img", 0, 0, "p" + std::to_string(i), i % 10 < 3 ? 2 : 1});
  HumanDataset data;
  data.ratings = ratings;
  const BootstrapSummary s = bootstrap(2000, 5, [&](Rng& rng) {
    const HumanDataset r = resample_dataset(data, MapKind::Patch, rng);
    return patch_cell_means(r.ratings, 1)(0, 0) - 1.0;
  });
  const double expected = std::sqrt(0.3 * 0.7 / n);
  EXPECT_NEAR(s.sd, expected, 0.25 * expected);
  EXPECT_LT(s.ci_lo, 0.3);
  EXPECT_GT(s.ci_hi, 0.3);
}

TEST(VarianceExplained, BetweenOverTotal) {
  EXPECT_NEAR(variance_explained({1, 2, 3, 5}, {"A", "A", "B", "B"}), 6.25 / 8.75, 1e-12);
  EXPECT_NEAR(variance_explained({1, 1, 4, 4}, {"A", "A", "B", "B"}), 1.0, 1e-12);
  EXPECT_THROW(variance_explained({1, 2}, {"A", "A"}), DataError);
  EXPECT_THROW(variance_explained({1, 2}, {"A"}), DataError);
}

TEST(PairedTest, MatchesBoostStudentT) {
  const std::vector<double> a{0.61, 0.72, 0.55, 0.80, 0.66, 0.59, 0.71};
  const std::vector<double> b{0.52, 0.70, 0.49, 0.71, 0.69, 0.50, 0.60};
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) d.push_back(a[i] - b[i]);
  const double t = stats::mean(d) / (stats::stddev(d) / std::sqrt(static_cast<double>(d.size())));
  const boost::math::students_t dist(static_cast<double>(d.size() - 1));
  const double p = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  const PairedTest res = paired_t_test(a, b, 3);
  EXPECT_NEAR(res.t, t, 1e-12);
  EXPECT_NEAR(res.p_raw, p, 1e-6);
  EXPECT_NEAR(res.p_bonferroni, std::min(1.0, 3 * p), 1e-6);
  EXPECT_EQ(res.n, 7u);
  EXPECT_THROW(paired_t_test(a, a), DataError);
  EXPECT_THROW(paired_t_test({1}, {2}), DataError);
}

TEST(PairedBootstrap, SignOfDifferences) {
  const std::vector<double> a{3, 4, 5, 6, 7}, b{1, 2, 3, 4, 5};
  EXPECT_EQ(paired_bootstrap_test(a, b, 1000, 1), 0.0);
  EXPECT_EQ(paired_bootstrap_test(a, a, 1000, 1), 1.0);
  const std::vector<double> c{1, -1, 2, -2, 0.5, -0.5}, z(6, 0.0);
  const double p = paired_bootstrap_test(c, z, 2000, 2);
  EXPECT_GT(p, 0.5);
  EXPECT_EQ(p, paired_bootstrap_test(c, z, 2000, 2));
  EXPECT_THROW(paired_bootstrap_test(a, {1}, 10, 1), DataError);
}
