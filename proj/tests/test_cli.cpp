#include <gtest/gtest.h>

#include <fstream>
#include <json.hpp>

#include "cli.hpp"
#include "support.hpp"
#include "vsel/compare.hpp"
#include "vsel/filter.hpp"
#include "vsel/map.hpp"

using namespace vsel;
namespace fs = std::filesystem;

namespace {

const fs::path kToyDir = fs::path(VSEL_SOURCE_DIR) / "models/toy_shapes";

struct CliResult {
  int code;
  std::string out, err;
};

CliResult vsel_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

// Smooth-ish random maps under <root>/<set>/img<i>.selm; `human` receives the
// same maps blurred by `sigma`.
void write_pair(const fs::path& ann, const fs::path& human, int n, Index size, double sigma,
                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < n; ++i) {
    Grid g(size, size);
    for (Index k = 0; k < g.size(); ++k) g(k) = u(rng);
    const std::string id = "img" + std::to_string(i);
    selm::write(map_path(ann, "gbp", id), g);
    selm::write(map_path(human, "patch", id), gaussian_blur(g, sigma));
  }
}

std::vector<std::string> model_args() {
  return {"--model", (kToyDir / "manifest.json").string(), "--weights", (kToyDir / "weights.selw").string()};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<std::string> csv_row(const std::string& csv, std::size_t row) {
  std::istringstream in(csv);
  std::string line;
  for (std::size_t i = 0; i <= row; ++i) std::getline(in, line);
  std::vector<std::string> cells;
  std::istringstream cl(line);
  for (std::string c; std::getline(cl, c, ',');) cells.push_back(c);
  return cells;
}

}  // namespace

TEST(Cli, UnknownSubcommandOrOptionIsAConfigError) {
  EXPECT_EQ(vsel_run({"frobnicate"}).code, cli::kExitConfig);
  EXPECT_EQ(vsel_run({}).code, cli::kExitConfig);
  EXPECT_EQ(vsel_run({"pc", "--no-such-flag", "1"}).code, cli::kExitConfig);
  EXPECT_EQ(vsel_run({"--help"}).code, cli::kExitOk);
}

TEST(Cli, BadNumbersAndMissingPathsAreConfigErrors) {
  const fs::path dir = testkit::scratch_dir("cli_bad");
  const CliResult r = vsel_run(concat({"attribute", "--images", dir.string(), "--out", (dir / "o").string(),
                                 "--samples", "ten"},
                                model_args()));
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("--samples"), std::string::npos) << r.err;
  const CliResult missing = vsel_run({"pc", "--maps", (dir / "absent").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(missing.code, cli::kExitConfig);
  EXPECT_NE(missing.err.find("absent"), std::string::npos) << missing.err;
}

TEST(Cli, AttributeOnEmptyDirectoryDoesNothing) {
  const fs::path dir = testkit::scratch_dir("cli_empty");
  fs::create_directories(dir / "images");
  const CliResult r = vsel_run(concat({"attribute", "--images", (dir / "images").string(), "--out", (dir / "o").string()},
                                model_args()));
  EXPECT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_NE(r.out.find("0 images"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "o/manifest.json"));
}

TEST(Cli, AttributeWritesOneMapPerMethodAndRepeats) {
  const fs::path dir = testkit::scratch_dir("cli_attr");
  ASSERT_EQ(vsel_run({"export-fixture", "--out", (dir / "fx").string(), "--count", "1", "--no-study"}).code, 0);
  const auto args = [&](const std::string& out) {
    return concat({"attribute", "--images", (dir / "fx/images").string(), "--out", (dir / out).string(),
                   "--methods", "gbp,gradcam"},
                  model_args());
  };
  const CliResult a = vsel_run(args("a"));
  ASSERT_EQ(a.code, cli::kExitOk) << a.err;
  const CliResult b = vsel_run(args("b"));
  ASSERT_EQ(b.code, cli::kExitOk) << b.err;
  const auto ta = testkit::tree_contents(dir / "a");
  EXPECT_EQ(ta.size(), 3u);
  EXPECT_TRUE(ta.count("gbp/img0000.selm"));
  EXPECT_TRUE(ta.count("gradcam/img0000.selm"));
  EXPECT_EQ(ta, testkit::tree_contents(dir / "b"));

  const Grid g = selm::read(dir / "a/gradcam/img0000.selm");
  EXPECT_EQ(g.rows(), 32);
  EXPECT_GE(g.minCoeff(), 0.0);
  EXPECT_LE(g.maxCoeff(), 1.0);
}

TEST(Cli, MapsNamesTheMissingRecords) {
  const fs::path dir = testkit::scratch_dir("cli_maps");
  ASSERT_EQ(vsel_run({"export-fixture", "--out", (dir / "fx").string(), "--count", "6", "--size", "24"}).code, 0);
  fs::remove(dir / "fx/human/fixations.csv");
  const CliResult r = vsel_run({"maps", "--config", (dir / "fx/config.json").string(), "--out", (dir / "o").string(),
                          "--size", "24"});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("free_fix"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("fixations.csv"), std::string::npos) << r.err;

  // Without the fixation kinds the remaining maps build.
  const CliResult ok = vsel_run({"maps", "--config", (dir / "fx/config.json").string(), "--out", (dir / "o").string(),
                           "--size", "24", "--kinds", "patch,dprime,spatial"});
  ASSERT_EQ(ok.code, cli::kExitOk) << ok.err;
  EXPECT_TRUE(fs::exists(dir / "o/patch/img0000.selm"));
  EXPECT_FALSE(fs::exists(dir / "o/free_fix"));
}

TEST(Cli, CorrelateRecoversTheSmoothing) {
  const fs::path dir = testkit::scratch_dir("cli_corr");
  write_pair(dir / "ann", dir / "human", 3, 40, 5.0, 7);
  const auto corr = [&](const fs::path& ann, const fs::path& human, const std::string& out) {
    return vsel_run({"correlate", "--ann", ann.string(), "--human", human.string(), "--out", (dir / out).string(),
                     "--size", "40", "--sigma-max", "10", "--methods", "gbp", "--kinds", "patch"});
  };
  const CliResult r = corr(dir / "ann", dir / "human", "blurred");
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  const auto row = csv_row(testkit::tree_contents(dir / "blurred").at("results.csv"), 1);
  ASSERT_GE(row.size(), 4u);
  EXPECT_EQ(row[0], "gbp");
  EXPECT_EQ(row[1], "patch");
  EXPECT_NEAR(std::stod(row[2]), 5.0, 0.5);

  // A set correlated with itself peaks before any blur.
  const CliResult s = vsel_run({"correlate", "--ann", (dir / "ann").string(), "--human", (dir / "ann").string(),
                          "--out", (dir / "self_out").string(), "--size", "40", "--sigma-max", "4",
                          "--methods", "gbp", "--kinds", "gbp"});
  ASSERT_EQ(s.code, cli::kExitOk) << s.err;
  const auto self_row = csv_row(testkit::tree_contents(dir / "self_out").at("results.csv"), 1);
  EXPECT_EQ(std::stod(self_row[2]), 0.0);
  EXPECT_NEAR(std::stod(self_row[3]), 1.0, 1e-12);
}

TEST(Cli, CorrelateReportsMismatchedImageIds) {
  const fs::path dir = testkit::scratch_dir("cli_ids");
  write_pair(dir / "ann", dir / "human", 2, 20, 1.0, 9);
  fs::rename(dir / "human/patch/img1.selm", dir / "human/patch/stray.selm");
  const CliResult r = vsel_run({"correlate", "--ann", (dir / "ann").string(), "--human", (dir / "human").string(),
                          "--out", (dir / "o").string(), "--size", "20", "--methods", "gbp", "--kinds", "patch"});
  EXPECT_NE(r.code, cli::kExitOk);
  EXPECT_NE(r.err.find("img1"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("stray"), std::string::npos) << r.err;
}

TEST(Cli, CommandLineOverridesConfig) {
  const fs::path dir = testkit::scratch_dir("cli_cfg");
  write_pair(dir / "ann", dir / "human", 2, 20, 1.0, 10);
  write_text(dir / "cfg/run.json",
             R"({"ann": "../ann", "human": "../human", "methods": ["gbp"], "kinds": "patch",
                 "size": 20, "sigma_max": 2, "sigma-step": 1})");
  const auto sweep_max = [](const fs::path& out) {
    const auto j = nlohmann::json::parse(testkit::tree_contents(out).at("sweep.json"));
    double m = 0;
    for (const auto& p : j.front()["sweep"]) m = std::max(m, p["sigma"].get<double>());
    return m;
  };
  ASSERT_EQ(vsel_run({"correlate", "--config", (dir / "cfg/run.json").string(), "--out", (dir / "a").string()}).code,
            0);
  EXPECT_EQ(sweep_max(dir / "a"), 2.0);
  ASSERT_EQ(vsel_run({"correlate", "--config", (dir / "cfg/run.json").string(), "--out", (dir / "b").string(),
                      "--sigma-max", "4"})
                .code,
            0);
  EXPECT_EQ(sweep_max(dir / "b"), 4.0);

  write_text(dir / "cfg/broken.json", "{\"size\": ");
  EXPECT_EQ(vsel_run({"correlate", "--config", (dir / "cfg/broken.json").string(), "--out", (dir / "c").string()})
                .code,
            cli::kExitConfig);
}

TEST(Cli, EvaluateAndCorrelateIgnoreJobCount) {
  const fs::path dir = testkit::scratch_dir("cli_jobs");
  ASSERT_EQ(vsel_run({"export-fixture", "--out", (dir / "fx").string(), "--count", "6", "--size", "32"}).code, 0);
  ASSERT_EQ(vsel_run(concat({"attribute", "--images", (dir / "fx/images").string(), "--out",
                             (dir / "ann").string(), "--methods", "gbp,sgbp", "--samples", "4"},
                            model_args()))
                .code,
            0);
  ASSERT_EQ(vsel_run({"maps", "--config", (dir / "fx/config.json").string(), "--out", (dir / "human").string(),
                      "--size", "32", "--kinds", "patch,spatial"})
                .code,
            0);
  for (const std::string jobs : {"1", "8"}) {
    const CliResult e = vsel_run(concat({"evaluate", "--images", (dir / "fx/images").string(), "--maps",
                                   (dir / "ann").string(), "--kinds", "gbp,sgbp", "--bootstrap", "200",
                                   "--out", (dir / ("ev" + jobs)).string(), "--jobs", jobs},
                                  model_args()));
    ASSERT_EQ(e.code, cli::kExitOk) << e.err;
    const CliResult c = vsel_run({"correlate", "--ann", (dir / "ann").string(), "--human", (dir / "human").string(),
                            "--data", (dir / "fx/human").string(), "--bootstrap", "5", "--size", "32",
                            "--sigma-max", "4", "--out", (dir / ("co" + jobs)).string(), "--jobs", jobs});
    ASSERT_EQ(c.code, cli::kExitOk) << c.err;
  }
  EXPECT_EQ(testkit::tree_contents(dir / "ev1"), testkit::tree_contents(dir / "ev8"));
  EXPECT_EQ(testkit::tree_contents(dir / "co1"), testkit::tree_contents(dir / "co8"));
  EXPECT_TRUE(fs::exists(dir / "ev1/sgbp/inverse_rank.csv"));
}
