#include "vsel/mask_eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "vsel/binary_io.hpp"
#include "vsel/filter.hpp"
#include "vsel/model.hpp"
#include "vsel/parallel.hpp"
#include "vsel/random.hpp"
#include "vsel/resample.hpp"
#include "vsel/stats.hpp"
#include "vsel/text.hpp"

namespace vsel {

Index reveal_count(Index pixels, double reveal_fraction) {
  if (!(reveal_fraction > 0 && reveal_fraction < 1)) {
    throw ConfigError("reveal fraction must lie in (0, 1)");
  }
  // The small offset keeps exact products such as 0.5 * 10000 from rounding up.
  const auto k = static_cast<Index>(std::ceil(reveal_fraction * static_cast<double>(pixels) - 1e-9));
  return std::clamp<Index>(k, 1, pixels);
}

SelectivityMap threshold_mask(const SelectivityMap& map, double reveal_fraction) {
  const Index n = map.grid.size();
  const Index k = reveal_count(n, reveal_fraction);
  const double* v = map.grid.data();
  const double hi = map.grid.maxCoeff();
  if (!(hi > map.grid.minCoeff())) throw DataError("cannot threshold a constant map");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v[a] > v[b]; });
  const double t = v[order[static_cast<std::size_t>(k)]];

  // float min so that the support survives the f32 SELM container.
  const double floor = std::numeric_limits<float>::min();
  SelectivityMap out = map;
  out.grid.setZero();
  out.zero = false;
  double* o = out.grid.data();
  for (Index i = 0; i < k; ++i) {
    const Index p = order[static_cast<std::size_t>(i)];
    o[p] = hi > t ? std::max(floor, (v[p] - t) / (hi - t)) : 1.0;
  }
  return out;
}

Image apply_mask(const Image& image, const Grid& mask, bool grayscale) {
  if (image.empty()) throw ShapeError("cannot mask an empty image");
  Image out = grayscale ? to_grayscale(image) : image;
  const Grid m = resize_bilinear(mask, out.height(), out.width());
  for (Grid& plane : out.planes) plane *= m;
  return out;
}

IncorrectMask make_incorrect_mask(const SelectivityMap& correct,
                                  const std::vector<SelectivityMap>& donor_pool, std::uint64_t seed,
                                  const IncorrectMaskConfig& cfg) {
  std::vector<const SelectivityMap*> eligible;
  for (const auto& d : donor_pool)
    if (d.image_id != correct.image_id) eligible.push_back(&d);
  if (eligible.empty()) throw DataError("no donor maps from other images");
  if (cfg.max_attempts < 1) throw ConfigError("incorrect-mask attempts must be positive");

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  std::uniform_int_distribution<int> turn(0, 3);
  double best = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const SelectivityMap& donor = *eligible[pick(rng)];
    const int turns = cfg.rotate ? turn(rng) : 0;
    Grid g = rotate90(donor.grid, turns);
    if (g.rows() != correct.rows() || g.cols() != correct.cols()) {
      g = resize_bilinear(g, correct.rows(), correct.cols());
    }
    double r = 0;
    try {
      r = pearson(g, correct.grid);
    } catch (const DataError&) {
      continue;
    }
    best = std::min(best, r);
    if (r < cfg.max_corr) {
      IncorrectMask out;
      out.mask = {correct.image_id, donor.kind, std::move(g), donor.zero};
      out.donor_id = donor.image_id;
      out.quarter_turns = turns;
      out.r = r;
      return out;
    }
  }
  throw DataError("no donor for '" + correct.image_id + "' with r < " + format_number(cfg.max_corr) +
                  " after " + std::to_string(cfg.max_attempts) + " draws; best r = " +
                  (std::isfinite(best) ? format_number(best) : std::string("n/a")));
}

RankConvention parse_rank_convention(const std::string& name) {
  if (name == "distance") return RankConvention::Distance;
  if (name == "position") return RankConvention::Position;
  throw ConfigError("unknown rank convention '" + name + "' (expected distance or position)");
}

std::string to_string(RankConvention c) {
  return c == RankConvention::Distance ? "distance" : "position";
}

double inverse_rank_value(Index r, Index n) {
  if (n < 1 || r < 0) throw DataError("inverse rank needs r >= 0 and N >= 1");
  return static_cast<double>(n) / static_cast<double>(r + n);
}

namespace {

InverseRankResult score_masked(const ModelGraph& model, Index truth, const Image& image,
                               const Grid* mask, bool grayscale, RankConvention convention) {
  const Prediction p = mask ? predict(model, preprocess(apply_mask(image, *mask, grayscale), model))
                            : predict(model, preprocess(image, model));
  InverseRankResult res;
  res.n = p.probabilities.size();
  const Index rank = rank_of_class(p.probabilities, truth);
  res.rank_distance = convention == RankConvention::Distance ? rank - 1 : rank;
  res.inverse_rank = inverse_rank_value(res.rank_distance, res.n);
  return res;
}

Index baseline_class(const ModelGraph& model, const Image& image) {
  return top_class(predict(model, preprocess(image, model)).probabilities);
}

}  // namespace

InverseRankResult inverse_rank(const ModelGraph& model, const Image& image, const Grid* mask,
                               bool grayscale, RankConvention convention) {
  return score_masked(model, baseline_class(model, image), image, mask, grayscale, convention);
}

double recognition_dprime(const std::vector<RecognitionTrial>& trials,
                          const std::string& target_label_set, bool raw) {
  double n_target = 0, hits = 0, n_foil = 0, fas = 0;
  for (const auto& t : trials) {
    const bool chosen = t.selected_label_set == target_label_set;
    if (t.true_label_set == target_label_set) {
      n_target += 1;
      hits += chosen;
    } else {
      n_foil += 1;
      fas += chosen;
    }
  }
  if (n_target == 0) throw DataError("label set '" + target_label_set + "' never shown");
  if (n_foil == 0) throw DataError("label set '" + target_label_set + "' has no foil trials");
  const double d =
      stats::dprime(stats::corrected_rate(hits, n_target), stats::corrected_rate(fas, n_foil));
  return raw ? d : std::max(0.0, d);
}

std::vector<RecognitionScore> recognition_scores(const std::vector<RecognitionTrial>& trials) {
  std::map<std::string, std::string> label_of;
  for (const auto& t : trials) {
    auto [it, inserted] = label_of.emplace(t.image_id, t.true_label_set);
    if (!inserted && it->second != t.true_label_set) {
      throw DataError("image '" + t.image_id + "' has inconsistent true label sets");
    }
  }
  std::vector<RecognitionScore> out;
  for (MaskCondition c : {MaskCondition::Correct, MaskCondition::Incorrect}) {
    std::vector<RecognitionTrial> subset;
    std::set<std::string> shown;
    for (const auto& t : trials) {
      if (t.condition == c) {
        subset.push_back(t);
        shown.insert(t.image_id);
      }
    }
    for (const auto& id : shown) {
      RecognitionScore s{id, label_of.at(id), c, 0};
      try {
        s.dprime = recognition_dprime(subset, s.label_set);
      } catch (const DataError& e) {
        throw DataError("image '" + id + "', " + to_string(c) + ": " + e.what());
      }
      out.push_back(std::move(s));
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  return out;
}

MaskingExperiment run_masking_experiment(const ModelGraph& model,
                                         const std::vector<MaskingItem>& images,
                                         const MapSet& maps, const MaskingConfig& cfg) {
  if (images.size() < 2) throw DataError("masking needs at least two images to pair masks");
  std::vector<const MaskingItem*> items;
  for (const auto& it : images) items.push_back(&it);
  std::sort(items.begin(), items.end(),
            [](const auto* a, const auto* b) { return a->image_id < b->image_id; });
  std::string missing;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0 && items[i]->image_id == items[i - 1]->image_id) {
      throw DataError("duplicate image id '" + items[i]->image_id + "'");
    }
    if (!maps.count(items[i]->image_id)) missing += " " + items[i]->image_id;
  }
  if (!missing.empty()) throw DataError("no map for images:" + missing);

  const std::size_t m = items.size();
  std::vector<Grid> masks(m);
  std::vector<Index> truth(m);
  parallel_for(m, cfg.jobs, [&](std::size_t i) {
    SelectivityMap sm{items[i]->image_id, MapKind::GBP,
                      gaussian_blur(maps.at(items[i]->image_id), cfg.smooth_sigma), false};
    try {
      masks[i] = threshold_mask(sm, cfg.reveal_fraction).grid;
    } catch (const DataError& e) {
      throw DataError("map for '" + items[i]->image_id + "': " + e.what());
    }
    truth[i] = baseline_class(model, items[i]->image);
  });

  struct Pair {
    std::size_t image, donor;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < m; ++i) {
    pairs.push_back({i, i});
    std::vector<std::size_t> donors;
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) donors.push_back(j);
    if (cfg.pairing == Pairing::Sampled) {
      Rng rng(derive_seed(cfg.seed, i));
      std::shuffle(donors.begin(), donors.end(), rng);
      donors.resize(std::min(donors.size(), std::max<std::size_t>(1, cfg.sampled_donors)));
      std::sort(donors.begin(), donors.end());
    }
    for (std::size_t j : donors) pairs.push_back({i, j});
  }

  MaskingExperiment out;
  out.rows.resize(pairs.size());
  parallel_for(pairs.size(), cfg.jobs, [&](std::size_t k) {
    const Pair& p = pairs[k];
    InverseRankResult r = score_masked(model, truth[p.image], items[p.image]->image,
                                       &masks[p.donor], cfg.grayscale, cfg.rank_convention);
    r.image_id = items[p.image]->image_id;
    r.mask_source = items[p.donor]->image_id;
    r.condition = p.image == p.donor ? MaskCondition::Correct : MaskCondition::Incorrect;
    out.rows[k] = std::move(r);
  });
  out.summary = summarize_masking(out.rows, cfg.bootstrap_replicates, derive_seed(cfg.seed, m, 1));
  return out;
}

MaskingSummary summarize_masking(const std::vector<InverseRankResult>& rows,
                                 std::size_t bootstrap_replicates, std::uint64_t seed) {
  std::map<std::string, std::array<std::vector<double>, 2>> by_image;
  for (const auto& r : rows) {
    by_image[r.image_id][r.condition == MaskCondition::Correct ? 0 : 1].push_back(r.inverse_rank);
  }
  MaskingSummary s;
  for (const auto& [id, v] : by_image) {
    if (v[0].empty() || v[1].empty()) continue;
    s.image_ids.push_back(id);
    s.correct.push_back(stats::mean(v[0]));
    s.incorrect.push_back(stats::mean(v[1]));
  }
  if (s.image_ids.empty()) throw DataError("no image has both correct and incorrect results");
  s.mean_correct = stats::mean(s.correct);
  s.mean_incorrect = stats::mean(s.incorrect);
  if (s.image_ids.size() >= 2) {
    try {
      s.t_test = paired_t_test(s.correct, s.incorrect);
    } catch (const DataError&) {
      s.t_test.reset();
    }
  }
  s.bootstrap_p = paired_bootstrap_test(s.correct, s.incorrect, bootstrap_replicates, seed);
  return s;
}

std::string inverse_rank_csv(const std::vector<InverseRankResult>& rows) {
  std::string out = "image_id,mask_source,condition,rank_distance,N,inverse_rank\n";
  for (const auto& r : rows) {
    out += r.image_id + "," + r.mask_source + "," + to_string(r.condition) + "," +
           std::to_string(r.rank_distance) + "," + std::to_string(r.n) + "," +
           format_number(r.inverse_rank) + "\n";
  }
  return out;
}

std::vector<StimulusSet> plan_stimuli(const std::vector<std::string>& image_ids,
                                      const StimulusConfig& cfg) {
  const std::size_t m = image_ids.size();
  if (m < 2) throw DataError("stimulus sets need at least two images");
  const std::size_t k = cfg.set_size ? cfg.set_size : std::min<std::size_t>(10, m - m % 2);
  if (k < 2 || k % 2 != 0 || k > m) {
    throw ConfigError("set size must be even and between 2 and the image count (" +
                      std::to_string(m) + ")");
  }
  const std::size_t sets = cfg.set_count ? cfg.set_count : m;
  if (sets % m != 0) {
    throw ConfigError("set count must be a multiple of the image count (" + std::to_string(m) +
                      ") for balanced conditions");
  }
  std::vector<StimulusSet> out(sets);
  for (std::size_t s = 0; s < sets; ++s) {
    for (std::size_t t = 0; t < k; ++t) {
      StimulusTrial trial;
      trial.image_id = image_ids[(s + t) % m];
      trial.condition = t < k / 2 ? MaskCondition::Correct : MaskCondition::Incorrect;
      out[s].trials.push_back(std::move(trial));
    }
    Rng rng(derive_seed(cfg.seed, s));
    std::shuffle(out[s].trials.begin(), out[s].trials.end(), rng);
  }
  return out;
}

std::vector<StimulusSet> export_stimuli(const std::vector<MaskingItem>& images, const MapSet& maps,
                                        const StimulusConfig& cfg,
                                        const std::filesystem::path& out_dir) {
  std::map<std::string, const Image*> by_id;
  for (const auto& it : images) by_id[it.image_id] = &it.image;
  std::vector<std::string> ids;
  std::vector<SelectivityMap> masks;
  for (const auto& [id, img] : by_id) {
    auto it = maps.find(id);
    if (it == maps.end()) throw DataError("no map for image '" + id + "'");
    ids.push_back(id);
    SelectivityMap sm{id, MapKind::GBP, gaussian_blur(it->second, cfg.smooth_sigma), false};
    masks.push_back(threshold_mask(sm, cfg.reveal_fraction));
  }
  std::vector<StimulusSet> sets = plan_stimuli(ids, cfg);

  nlohmann::ordered_json manifest;
  manifest["reveal_fraction"] = cfg.reveal_fraction;
  manifest["smooth_sigma"] = cfg.smooth_sigma;
  manifest["max_corr"] = cfg.incorrect.max_corr;
  manifest["seed"] = cfg.seed;
  manifest["sets"] = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < sets.size(); ++s) {
    nlohmann::ordered_json jset = nlohmann::ordered_json::array();
    for (std::size_t t = 0; t < sets[s].trials.size(); ++t) {
      StimulusTrial& trial = sets[s].trials[t];
      const auto idx = static_cast<std::size_t>(
          std::lower_bound(ids.begin(), ids.end(), trial.image_id) - ids.begin());
      Grid mask;
      if (trial.condition == MaskCondition::Correct) {
        mask = masks[idx].grid;
        trial.mask_source = trial.image_id;
      } else {
        IncorrectMask im = make_incorrect_mask(masks[idx], masks, derive_seed(cfg.seed, s, t + 1),
                                               cfg.incorrect);
        mask = std::move(im.mask.grid);
        trial.mask_source = im.donor_id;
        trial.quarter_turns = im.quarter_turns;
        trial.r = im.r;
      }
      char name[64];
      std::snprintf(name, sizeof name, "set_%03zu/trial_%02zu.png", s, t);
      trial.file = name;
      write_png(out_dir / trial.file, apply_mask(*by_id.at(trial.image_id), mask, true));
      nlohmann::ordered_json jt;
      jt["file"] = trial.file;
      jt["image_id"] = trial.image_id;
      jt["condition"] = to_string(trial.condition);
      jt["mask_source"] = trial.mask_source;
      jt["rotation_deg"] = 90 * trial.quarter_turns;
      if (trial.condition == MaskCondition::Incorrect) jt["r"] = trial.r;
      jset.push_back(std::move(jt));
    }
    manifest["sets"].push_back(std::move(jset));
  }
  const std::string text = manifest.dump(2) + "\n";
  detail::write_file(out_dir / "manifest.json", std::vector<unsigned char>(text.begin(), text.end()));
  return sets;
}

}  // namespace vsel
