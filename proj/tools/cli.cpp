#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "vsel/attribution.hpp"
#include "vsel/behavioral.hpp"
#include "vsel/binary_io.hpp"
#include "vsel/compare.hpp"
#include "vsel/error.hpp"
#include "vsel/image.hpp"
#include "vsel/map.hpp"
#include "vsel/mask_eval.hpp"
#include "vsel/model.hpp"
#include "vsel/parallel.hpp"
#include "vsel/records.hpp"
#include "vsel/stats.hpp"
#include "vsel/synthetic.hpp"
#include "vsel/text.hpp"

namespace vsel::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// ---- option plumbing -------------------------------------------------------

/// Command-line values layered over an optional JSON config file. Config
/// keys match the flag names (dashes or underscores); relative config paths
/// resolve against the config file's directory.
class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {
    add("config", "JSON config file; flags override its values");
  }

  void add(const std::string& name, const std::string& help) {
    options_[name] = app_->add_option("--" + name, values_[name], help);
  }

  void add_flag(const std::string& name, const std::string& help) {
    options_[name] = app_->add_flag("--" + name, flags_[name], help);
  }

  void load_config() {
    if (!on_command_line("config")) return;
    const fs::path path = values_["config"];
    const auto bytes = detail::read_file(path);
    try {
      config_ = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
      throw ConfigError("config " + path.string() + ": " + e.what());
    }
    if (!config_.is_object()) throw ConfigError("config " + path.string() + ": expected an object");
    base_ = path.parent_path();
  }

  bool has(const std::string& name) const { return on_command_line(name) || config_value(name); }

  std::string text(const std::string& name, const std::string& fallback = {}) const {
    if (on_command_line(name)) return values_.at(name);
    if (const json* v = config_value(name)) {
      if (v->is_string()) return v->get<std::string>();
      return v->dump();
    }
    return fallback;
  }

  long long integer(const std::string& name, long long fallback) const {
    if (!has(name)) return fallback;
    const std::string s = text(name);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("--" + name + ": expected an integer, got '" + s + "'");
    }
  }

  std::uint64_t seed(const std::string& name = "seed") const {
    const long long v = integer(name, 0);
    if (v < 0) throw ConfigError("--" + name + " must be non-negative");
    return static_cast<std::uint64_t>(v);
  }

  double real(const std::string& name, double fallback) const {
    if (!has(name)) return fallback;
    const std::string s = text(name);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("--" + name + ": expected a number, got '" + s + "'");
    }
  }

  bool flag(const std::string& name) const {
    if (on_command_line(name)) return true;
    if (const json* v = config_value(name)) {
      if (!v->is_boolean()) throw ConfigError("config '" + name + "' must be true or false");
      return v->get<bool>();
    }
    return false;
  }

  std::vector<std::string> list(const std::string& name) const {
    std::vector<std::string> out;
    if (!on_command_line(name)) {
      if (const json* v = config_value(name); v && v->is_array()) {
        for (const auto& e : *v) out.push_back(e.is_string() ? e.get<std::string>() : e.dump());
        return out;
      }
    }
    for (const auto& part : split(text(name), ',')) {
      const std::string t = trim(part);
      if (!t.empty()) out.push_back(t);
    }
    return out;
  }

  std::optional<fs::path> path(const std::string& name) const {
    if (on_command_line(name)) return fs::path(values_.at(name));
    if (const json* v = config_value(name)) {
      if (!v->is_string()) throw ConfigError("config '" + name + "' must be a path string");
      fs::path p = v->get<std::string>();
      return p.is_relative() ? base_ / p : p;
    }
    return std::nullopt;
  }

  fs::path existing(const std::string& name) const {
    const auto p = path(name);
    if (!p) throw ConfigError("missing required --" + name);
    if (!fs::exists(*p)) throw ConfigError("--" + name + ": " + p->string() + " does not exist");
    return *p;
  }

  fs::path required(const std::string& name) const {
    const auto p = path(name);
    if (!p) throw ConfigError("missing required --" + name);
    return *p;
  }

  int jobs() const {
    const long long j = integer("jobs", 1);
    if (j < 1 || j > 1024) throw ConfigError("--jobs must be between 1 and 1024");
    return static_cast<int>(j);
  }

 private:
  bool on_command_line(const std::string& name) const {
    auto it = options_.find(name);
    return it != options_.end() && it->second->count() > 0;
  }

  const json* config_value(const std::string& name) const {
    if (!config_.is_object()) return nullptr;
    std::string underscored = name;
    std::replace(underscored.begin(), underscored.end(), '-', '_');
    for (const std::string& key : {name, underscored}) {
      auto it = config_.find(key);
      if (it != config_.end() && !it->is_null()) return &*it;
    }
    return nullptr;
  }

  CLI::App* app_;
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> flags_;
  std::map<std::string, CLI::Option*> options_;
  json config_;
  fs::path base_;
};

// ---- file helpers ----------------------------------------------------------

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

/// Image files of a directory, sorted by id (file stem).
std::vector<std::pair<std::string, fs::path>> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError(dir.string() + " is not a directory");
  std::vector<std::pair<std::string, fs::path>> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string ext = lower(e.path().extension().string());
    if (e.is_regular_file() && (ext == ".png" || ext == ".pgm" || ext == ".ppm")) {
      out.emplace_back(e.path().stem().string(), e.path());
    }
  }
  std::sort(out.begin(), out.end());
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].first == out[i - 1].first) {
      throw ConfigError("two images share the id '" + out[i].first + "' in " + dir.string());
    }
  }
  return out;
}

std::vector<MaskingItem> load_images(const fs::path& dir) {
  std::vector<MaskingItem> items;
  for (const auto& [id, path] : list_images(dir)) items.push_back({id, read_image(path)});
  return items;
}

MapSet load_map_set(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("map set " + dir.string() + " not found");
  MapSet out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".selm") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out.emplace(f.stem().string(), selm::read(f));
  return out;
}

/// Names of subdirectories holding at least one SELM file, sorted.
std::vector<std::string> map_sets_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError(dir.string() + " is not a directory");
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_directory()) continue;
    for (const auto& f : fs::directory_iterator(e.path())) {
      if (f.path().extension() == ".selm") {
        out.push_back(e.path().filename().string());
        break;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  detail::write_file(path, std::vector<unsigned char>(text.begin(), text.end()));
}

std::string read_text_file(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  return {bytes.begin(), bytes.end()};
}

/// Collects written artifacts for manifest.json.
class Manifest {
 public:
  Manifest(fs::path root, std::string command) : root_(std::move(root)), command_(std::move(command)) {}

  void add(const std::string& rel, const std::vector<unsigned char>& bytes, json extra = {}) {
    detail::write_file(root_ / rel, bytes);
    json e;
    e["file"] = rel;
    if (extra.is_object())
      for (auto it = extra.begin(); it != extra.end(); ++it) e[it.key()] = it.value();
    e["fnv1a"] = detail::hex64(detail::fnv1a(bytes));
    entries_.push_back(std::move(e));
  }

  void add_text(const std::string& rel, const std::string& text, json extra = {}) {
    add(rel, std::vector<unsigned char>(text.begin(), text.end()), std::move(extra));
  }

  void write(json extra = {}) const {
    json m;
    m["command"] = command_;
    if (extra.is_object())
      for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    json list = entries_;
    std::sort(list.begin(), list.end(),
              [](const json& a, const json& b) { return a["file"] < b["file"]; });
    m["outputs"] = list;
    write_text(root_ / "manifest.json", m.dump(2) + "\n");
  }

  std::size_t size() const { return entries_.size(); }

 private:
  fs::path root_;
  std::string command_;
  std::vector<json> entries_;
};

std::uint64_t id_hash(const std::string& s) {
  return detail::fnv1a(std::vector<unsigned char>(s.begin(), s.end()));
}

std::vector<MapKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<MapKind> out;
  for (const auto& n : names) out.push_back(parse_map_kind(n));
  return out;
}

std::string number_or_empty(double v) { return std::isfinite(v) ? format_number(v) : std::string(); }

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void report_failures(std::ostream& err, const std::map<std::string, std::string>& failures) {
  for (const auto& [item, msg] : failures) err << "error: " << item << ": " << msg << "\n";
}

// ---- human-map settings ----------------------------------------------------

HumanMapConfig human_config(const Options& o) {
  HumanMapConfig cfg;
  const long long size = o.integer("size", 100);
  if (size < 4 || size > 4096) throw ConfigError("--size must be between 4 and 4096");
  cfg.rows = cfg.cols = size;
  if (o.has("patch-sigma")) cfg.patch_sigma = o.real("patch-sigma", 0);
  cfg.dprime_sigma = o.real("dprime-sigma", cfg.dprime_sigma);
  if (cfg.dprime_sigma < 0) throw ConfigError("--dprime-sigma must be >= 0");
  if (o.has("kde-bandwidth")) {
    const double b = o.real("kde-bandwidth", 0);
    if (!(b > 0)) throw ConfigError("--kde-bandwidth must be positive");
    cfg.kde_bandwidth = Bandwidth{b, b};
  }
  if (o.has("source-size")) {
    const auto parts = o.list("source-size");
    if (parts.size() != 2) throw ConfigError("--source-size expects W,H");
    try {
      cfg.default_source_size = {std::stod(parts[0]), std::stod(parts[1])};
    } catch (const std::exception&) {
      throw ConfigError("--source-size expects two numbers");
    }
  }
  if (const auto images = o.path("images")) {
    for (const auto& [id, path] : list_images(*images)) {
      const Image img = read_image(path);
      cfg.source_sizes[id] = {static_cast<double>(img.width()), static_cast<double>(img.height())};
    }
  }
  return cfg;
}

json human_config_json(const HumanMapConfig& cfg) {
  json j;
  j["rows"] = cfg.rows;
  j["cols"] = cfg.cols;
  j["patch_sigma"] = cfg.patch_sigma ? json(*cfg.patch_sigma) : json(nullptr);
  j["dprime_sigma"] = cfg.dprime_sigma;
  j["kde_bandwidth"] = cfg.kde_bandwidth ? json(cfg.kde_bandwidth->sx) : json(nullptr);
  j["default_source_size"] = {cfg.default_source_size.first, cfg.default_source_size.second};
  json sizes = json::object();
  for (const auto& [id, wh] : cfg.source_sizes) sizes[id] = {wh.first, wh.second};
  j["source_sizes"] = sizes;
  return j;
}

HumanMapConfig parse_human_config(const std::string& text) {
  try {
    const auto j = json::parse(text);
    HumanMapConfig cfg;
    cfg.rows = j.at("rows").get<Index>();
    cfg.cols = j.at("cols").get<Index>();
    if (!j.at("patch_sigma").is_null()) cfg.patch_sigma = j.at("patch_sigma").get<double>();
    cfg.dprime_sigma = j.at("dprime_sigma").get<double>();
    if (!j.at("kde_bandwidth").is_null()) {
      const double b = j.at("kde_bandwidth").get<double>();
      cfg.kde_bandwidth = Bandwidth{b, b};
    }
    cfg.default_source_size = {j.at("default_source_size").at(0).get<double>(),
                               j.at("default_source_size").at(1).get<double>()};
    for (const auto& [id, wh] : j.at("source_sizes").items()) {
      cfg.source_sizes[id] = {wh.at(0).get<double>(), wh.at(1).get<double>()};
    }
    return cfg;
  } catch (const json::exception& e) {
    throw FormatError(std::string("maps_config.json: ") + e.what());
  }
}

const char* source_file(MapKind kind) {
  switch (kind) {
    case MapKind::Patch:
      return "patch_ratings.csv";
    case MapKind::DPrime:
      return "discrimination.csv";
    case MapKind::SpatialKDE:
      return "chains.csv";
    default:
      return "fixations.csv";
  }
}

// ---- attribute -------------------------------------------------------------

int cmd_attribute(const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path images_dir = o.existing("images");
  const fs::path out_dir = o.required("out");
  const auto images = list_images(images_dir);
  const std::vector<MapKind> methods = parse_kinds(o.list("methods").empty()
                                                       ? std::vector<std::string>{"gbp"}
                                                       : o.list("methods"));
  for (MapKind m : methods) {
    if (!is_attribution_kind(m)) throw ConfigError("'" + to_string(m) + "' is not a model map method");
  }
  const ModelGraph model = load_model(o.existing("model"), o.existing("weights"));
  SmoothGradConfig sg;
  sg.sample_count = static_cast<int>(o.integer("samples", sg.sample_count));
  sg.noise_level = o.real("noise", sg.noise_level);
  sg.validate();
  std::optional<Index> cls;
  if (o.has("class")) cls = o.integer("class", 0);
  const std::uint64_t seed = o.seed();
  const int jobs = o.jobs();

  Manifest manifest(out_dir, "attribute");
  if (images.empty()) {
    out << "0 images in " << images_dir.string() << "; nothing to do\n";
    manifest.write();
    return kExitOk;
  }

  const std::size_t n = images.size() * methods.size();
  std::vector<std::vector<unsigned char>> results(n);
  std::vector<std::string> errors(n);
  std::vector<std::shared_ptr<const ModelInput>> inputs(images.size());
  std::vector<std::string> load_errors(images.size());
  parallel_for(images.size(), jobs, [&](std::size_t i) {
    try {
      inputs[i] = std::make_shared<const ModelInput>(
          ModelInput::from_image(read_image(images[i].second), model, images[i].first));
    } catch (const Error& e) {
      load_errors[i] = e.what();
    }
  });
  parallel_for(n, jobs, [&](std::size_t k) {
    const std::size_t i = k / methods.size();
    const MapKind method = methods[k % methods.size()];
    if (!inputs[i]) {
      errors[k] = load_errors[i];
      return;
    }
    try {
      SmoothGradConfig cfg = sg;
      cfg.seed = derive_seed(seed, id_hash(images[i].first));
      cfg.jobs = 1;
      results[k] = selm::serialize(attribute(method, model, *inputs[i], cfg, cls, 1).grid);
    } catch (const Error& e) {
      errors[k] = e.what();
    }
  });

  std::map<std::string, std::string> failures;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& id = images[k / methods.size()].first;
    const std::string method = to_string(methods[k % methods.size()]);
    if (!errors[k].empty()) {
      failures[id + " (" + method + ")"] = errors[k];
      continue;
    }
    manifest.add(method + "/" + id + ".selm", results[k], {{"image_id", id}, {"method", method}});
  }
  manifest.write({{"model", model.name()}, {"seed", seed}});
  report_failures(err, failures);
  out << manifest.size() << " maps written to " << out_dir.string() << "\n";
  return failures.empty() ? kExitOk : kExitPartial;
}

// ---- maps / pc -------------------------------------------------------------

HumanPCModel fit_pc_from(const std::vector<MapSet>& per_kind, std::vector<std::string>* ids_out,
                         double downweight) {
  std::vector<std::string> ids;
  for (const auto& [id, g] : per_kind.front()) {
    bool all = true;
    for (const auto& set : per_kind) all = all && set.count(id);
    if (all) ids.push_back(id);
  }
  if (ids.empty()) throw DataError("no image has all six human map kinds");
  const Index rows = per_kind.front().at(ids.front()).rows();
  const Index cols = per_kind.front().at(ids.front()).cols();
  std::vector<std::vector<Grid>> maps(kHumanKinds);
  for (int k = 0; k < kHumanKinds; ++k) {
    for (const auto& id : ids) {
      maps[static_cast<std::size_t>(k)].push_back(
          resize_bilinear(per_kind[static_cast<std::size_t>(k)].at(id), rows, cols));
    }
  }
  *ids_out = ids;
  return fit_human_pc(maps, downweight);
}

void write_pc(Manifest& manifest, const HumanPCModel& pc, const std::vector<MapSet>& per_kind,
              const std::vector<std::string>& ids) {
  for (const auto& id : ids) {
    std::vector<Grid> grids;
    for (const auto& set : per_kind) grids.push_back(set.at(id));
    const SelectivityMap m = project_human_pc(pc, grids, id);
    manifest.add("human_pc/" + id + ".selm", selm::serialize(m.grid),
                 {{"image_id", id}, {"kind", "human_pc"}});
  }
  manifest.add_text("human_pc_model.json", human_pc_json(pc) + "\n");
}

int cmd_maps(const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path data_dir = o.existing("data");
  const fs::path out_dir = o.required("out");
  std::vector<std::string> names = o.list("kinds");
  if (names.empty()) {
    for (MapKind k : human_kinds()) names.push_back(to_string(k));
    names.push_back(to_string(MapKind::HumanPC));
  }
  const std::vector<MapKind> kinds = parse_kinds(names);
  const bool want_pc = std::count(kinds.begin(), kinds.end(), MapKind::HumanPC) > 0;
  for (MapKind k : kinds) {
    if (k != MapKind::HumanPC && !is_fixation_kind(k) &&
        std::find(human_kinds().begin(), human_kinds().end(), k) == human_kinds().end()) {
      throw ConfigError("'" + to_string(k) + "' is not a human map kind");
    }
  }
  const HumanMapConfig cfg = human_config(o);
  const HumanDataset data = read_human_dataset(data_dir);

  std::vector<MapKind> estimate;
  for (MapKind k : human_kinds()) {
    if (want_pc || std::count(kinds.begin(), kinds.end(), k)) estimate.push_back(k);
  }
  for (MapKind k : estimate) {
    if (dataset_image_ids(data, k).empty()) {
      throw ConfigError(to_string(k) + " maps " + (want_pc ? "(needed for human_pc) " : "") +
                        "have no records; expected " + source_file(k) + " in " +
                        data_dir.string());
    }
  }

  Manifest manifest(out_dir, "maps");
  std::map<std::string, std::string> failures;
  std::vector<MapSet> per_kind;
  for (MapKind k : estimate) {
    std::map<std::string, std::string> kind_failures;
    const auto maps = estimate_human_maps(data, k, cfg, &kind_failures);
    for (const auto& [id, msg] : kind_failures) failures[id + " (" + to_string(k) + ")"] = msg;
    MapSet set;
    for (const auto& [id, m] : maps) {
      set.emplace(id, m.grid);
      if (std::count(kinds.begin(), kinds.end(), k)) {
        manifest.add(to_string(k) + "/" + id + ".selm", selm::serialize(m.grid),
                     {{"image_id", id}, {"kind", to_string(k)}});
      }
    }
    per_kind.push_back(std::move(set));
  }
  if (want_pc) {
    std::vector<std::string> ids;
    const HumanPCModel pc =
        fit_pc_from(per_kind, &ids, o.real("downweight", kFixationDownweight));
    write_pc(manifest, pc, per_kind, ids);
    out << "human_pc explains " << format_number(pc.explained_variance_ratio())
        << " of the standardised variance over " << ids.size() << " images\n";
  }
  manifest.add_text("maps_config.json", human_config_json(cfg).dump(2) + "\n");
  manifest.write();
  report_failures(err, failures);
  out << manifest.size() << " files written to " << out_dir.string() << "\n";
  return failures.empty() ? kExitOk : kExitPartial;
}

int cmd_pc(const Options& o, std::ostream& out, std::ostream&) {
  const fs::path maps_dir = o.existing("maps");
  const fs::path out_dir = o.required("out");
  std::vector<MapSet> per_kind;
  for (MapKind k : human_kinds()) {
    const fs::path dir = maps_dir / to_string(k);
    if (!fs::is_directory(dir)) {
      throw ConfigError("human_pc needs " + to_string(k) + " maps; " + dir.string() + " not found");
    }
    per_kind.push_back(load_map_set(dir));
  }
  Manifest manifest(out_dir, "pc");
  std::vector<std::string> ids;
  HumanPCModel pc;
  if (const auto loadings = o.path("loadings")) {
    pc = parse_human_pc_json(read_text_file(*loadings));
    for (const auto& [id, g] : per_kind.front()) {
      bool all = true;
      for (const auto& set : per_kind) all = all && set.count(id);
      if (all) ids.push_back(id);
    }
  } else {
    pc = fit_pc_from(per_kind, &ids, o.real("downweight", kFixationDownweight));
  }
  write_pc(manifest, pc, per_kind, ids);
  manifest.write();
  out << ids.size() << " human_pc maps written to " << out_dir.string() << "\n";
  return kExitOk;
}

// ---- correlate -------------------------------------------------------------

/// method-id fields split on '-', used as extra variance factors when every
/// method id has the same number of fields.
std::vector<std::vector<std::string>> method_fields(const std::vector<std::string>& methods) {
  std::vector<std::vector<std::string>> fields;
  for (const auto& m : methods) fields.push_back(split(m, '-'));
  for (const auto& f : fields)
    if (f.size() != fields.front().size()) return {};
  if (fields.empty() || fields.front().size() < 2) return {};
  return fields;
}

int cmd_correlate(const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path ann_dir = o.existing("ann");
  const fs::path human_dir = o.existing("human");
  const fs::path out_dir = o.required("out");
  std::vector<std::string> methods = o.list("methods");
  if (methods.empty()) methods = map_sets_in(ann_dir);
  std::vector<std::string> kinds = o.list("kinds");
  if (kinds.empty()) kinds = map_sets_in(human_dir);
  for (const auto& k : kinds) parse_map_kind(k);
  if (methods.empty() || kinds.empty()) throw ConfigError("no map sets to correlate");

  SmoothingSearchConfig search;
  search.sigma_min = o.real("sigma-min", search.sigma_min);
  search.sigma_max = o.real("sigma-max", search.sigma_max);
  search.sigma_step = o.real("sigma-step", search.sigma_step);
  const long long size = o.integer("size", 100);
  if (size < 2 || size > 4096) throw ConfigError("--size must be between 2 and 4096");
  search.rows = search.cols = size;
  search.validate();
  const int jobs = o.jobs();
  const std::uint64_t seed = o.seed();
  const long long replicates = o.integer("bootstrap", 100);

  std::optional<HumanDataset> data;
  std::optional<HumanMapConfig> hcfg;
  std::optional<HumanPCModel> pc;
  if (const auto d = o.path("data")) {
    if (!fs::is_directory(*d)) throw ConfigError("--data: " + d->string() + " not found");
    if (replicates < 2) throw ConfigError("--bootstrap needs at least 2 replicates");
    data = read_human_dataset(*d);
    const fs::path mc = human_dir / "maps_config.json";
    if (!fs::exists(mc)) {
      throw ConfigError("bootstrap needs " + mc.string() + " (written by the maps command)");
    }
    hcfg = parse_human_config(read_text_file(mc));
    if (std::count(kinds.begin(), kinds.end(), "human_pc")) {
      const fs::path pm = human_dir / "human_pc_model.json";
      if (!fs::exists(pm)) throw ConfigError("bootstrap of human_pc needs " + pm.string());
      pc = parse_human_pc_json(read_text_file(pm));
    }
  }

  std::map<std::string, MapSet> ann_sets, human_sets;
  for (const auto& m : methods) ann_sets[m] = load_map_set(ann_dir / m);
  for (const auto& k : kinds) human_sets[k] = load_map_set(human_dir / k);

  std::vector<ComparisonResult> results;
  std::map<std::string, std::string> failures;
  for (const auto& m : methods) {
    for (const auto& k : kinds) {
      try {
        ComparisonResult res = optimal_smoothing(ann_sets[m], human_sets[k], search, jobs);
        res.method_id = m;
        res.human_kind = k;
        if (data) {
          const MapKind kind = parse_map_kind(k);
          const MapSet ann = resample_set(ann_sets[m], search.rows, search.cols);
          auto replicate = [&](Rng& rng) {
            const HumanDataset resampled = resample_dataset(*data, kind, rng);
            const auto est = kind == MapKind::HumanPC
                                 ? estimate_human_pc_maps(resampled, *pc, *hcfg)
                                 : estimate_human_maps(resampled, kind, *hcfg);
            MapSet h;
            for (const auto& [id, g] : ann) {
              auto it = est.find(id);
              if (it == est.end()) throw DataError("resample lost image '" + id + "'");
              h.emplace(id, resize_bilinear(it->second.grid, search.rows, search.cols));
            }
            return mean_correlation(ann, h, res.sigma_star, 1);
          };
          const BootstrapSummary b = bootstrap(static_cast<std::size_t>(replicates),
                                               derive_seed(seed, id_hash(m + "/" + k)), replicate,
                                               jobs);
          res.bootstrap_sd = b.sd;
          res.ci_lo = b.ci_lo;
          res.ci_hi = b.ci_hi;
          res.bootstrap_r = b.values;
        }
        results.push_back(std::move(res));
      } catch (const DataError& e) {
        failures[m + " vs " + k] = e.what();
      }
    }
  }

  Manifest manifest(out_dir, "correlate");
  std::string csv = "method,human_kind,sigma_star,mean_r,bootstrap_sd,ci_lo,ci_hi\n";
  json sweep = json::array();
  for (const auto& r : results) {
    csv += r.method_id + "," + r.human_kind + "," + format_number(r.sigma_star) + "," +
           format_number(r.mean_r) + "," + number_or_empty(r.bootstrap_sd) + "," +
           number_or_empty(r.ci_lo) + "," + number_or_empty(r.ci_hi) + "\n";
    json j;
    j["method"] = r.method_id;
    j["human_kind"] = r.human_kind;
    j["sigma_star"] = r.sigma_star;
    j["mean_r"] = r.mean_r;
    j["image_ids"] = r.image_ids;
    j["per_image_r"] = r.per_image_r;
    json pts = json::array();
    for (const auto& p : r.sweep) pts.push_back({{"sigma", p.sigma}, {"mean_r", p.mean_r}});
    j["sweep"] = pts;
    if (!r.bootstrap_r.empty()) j["bootstrap_r"] = r.bootstrap_r;
    sweep.push_back(std::move(j));
  }
  manifest.add_text("results.csv", csv);
  manifest.add_text("sweep.json", sweep.dump(2) + "\n");

  // Single-factor R^2 of the per-pair mean r for each grouping.
  json variance;
  variance["model"] = "single-factor R^2 (between-group / total sum of squares)";
  json factors = json::object();
  std::vector<double> values;
  std::map<std::string, std::vector<std::string>> groups;
  std::vector<std::string> pair_methods;
  for (const auto& r : results) {
    values.push_back(r.mean_r);
    groups["method"].push_back(r.method_id);
    groups["human_kind"].push_back(r.human_kind);
    pair_methods.push_back(r.method_id);
  }
  const auto fields = method_fields(pair_methods);
  for (std::size_t f = 0; !fields.empty() && f < fields.front().size(); ++f) {
    for (const auto& row : fields) groups["method_field_" + std::to_string(f)].push_back(row[f]);
  }
  for (const auto& [name, g] : groups) {
    try {
      factors[name] = variance_explained(values, g);
    } catch (const DataError& e) {
      factors[name] = nullptr;
    }
  }
  variance["factors"] = factors;
  manifest.add_text("variance.json", variance.dump(2) + "\n");
  manifest.write({{"seed", seed}});
  report_failures(err, failures);
  out << results.size() << " comparisons written to " << (out_dir / "results.csv").string() << "\n";
  return failures.empty() ? kExitOk : kExitPartial;
}

// ---- mask / evaluate / export-stimuli --------------------------------------

int cmd_mask(const Options& o, std::ostream& out, std::ostream& err) {
  const MapSet maps = load_map_set(o.existing("maps"));
  const fs::path out_dir = o.required("out");
  const double reveal = o.real("reveal", 0.5);
  const double sigma = o.real("smooth-sigma", 0);
  const bool gray = o.flag("grayscale");
  std::map<std::string, Image> images;
  if (const auto dir = o.path("images")) {
    for (auto& item : load_images(*dir)) images.emplace(item.image_id, std::move(item.image));
  }
  Manifest manifest(out_dir, "mask");
  std::map<std::string, std::string> failures;
  for (const auto& [id, g] : maps) {
    try {
      const SelectivityMap m = threshold_mask({id, MapKind::GBP, gaussian_blur(g, sigma), false}, reveal);
      manifest.add("masks/" + id + ".selm", selm::serialize(m.grid), {{"image_id", id}});
      if (auto it = images.find(id); it != images.end()) {
        const fs::path png = out_dir / "masked" / (id + ".png");
        write_png(png, apply_mask(it->second, m.grid, gray));
        manifest.add("masked/" + id + ".png", detail::read_file(png), {{"image_id", id}});
      }
    } catch (const DataError& e) {
      failures[id] = e.what();
    }
  }
  manifest.write({{"reveal_fraction", reveal}, {"smooth_sigma", sigma}});
  report_failures(err, failures);
  out << manifest.size() << " files written to " << out_dir.string() << "\n";
  return failures.empty() ? kExitOk : kExitPartial;
}

int cmd_recognition(const Options& o, std::ostream& out) {
  const fs::path csv = o.existing("recognition");
  const fs::path out_dir = o.required("out");
  const auto scores = recognition_scores(parse_recognition(read_text_file(csv)));
  Manifest manifest(out_dir, "evaluate");
  std::string table = "image_id,label_set,condition,dprime\n";
  std::map<std::string, std::array<double, 2>> by_image;
  std::map<std::string, std::array<bool, 2>> seen;
  for (const auto& s : scores) {
    table += s.image_id + "," + s.label_set + "," + to_string(s.condition) + "," +
             format_number(s.dprime) + "\n";
    const int c = s.condition == MaskCondition::Correct ? 0 : 1;
    by_image[s.image_id][static_cast<std::size_t>(c)] = s.dprime;
    seen[s.image_id][static_cast<std::size_t>(c)] = true;
  }
  manifest.add_text("recognition_dprime.csv", table);
  std::vector<double> correct, incorrect;
  for (const auto& [id, v] : by_image) {
    if (seen[id][0] && seen[id][1]) {
      correct.push_back(v[0]);
      incorrect.push_back(v[1]);
    }
  }
  json summary;
  summary["images_with_both_conditions"] = correct.size();
  if (!correct.empty()) {
    summary["mean_correct"] = stats::mean(correct);
    summary["mean_incorrect"] = stats::mean(incorrect);
  }
  try {
    const PairedTest t = paired_t_test(correct, incorrect);
    summary["t"] = t.t;
    summary["p"] = t.p_raw;
  } catch (const DataError& e) {
    summary["t"] = nullptr;
    summary["p"] = nullptr;
    summary["note"] = e.what();
  }
  manifest.add_text("recognition_summary.json", summary.dump(2) + "\n");
  manifest.write();
  out << scores.size() << " d' scores written to " << out_dir.string() << "\n";
  return kExitOk;
}

MaskingConfig masking_config(const Options& o) {
  MaskingConfig cfg;
  cfg.reveal_fraction = o.real("reveal", cfg.reveal_fraction);
  cfg.smooth_sigma = o.real("smooth-sigma", cfg.smooth_sigma);
  cfg.grayscale = o.flag("grayscale");
  const std::string pairing = o.text("pairing", "all");
  if (pairing == "all") {
    cfg.pairing = Pairing::AllVsAll;
  } else if (pairing == "sampled") {
    cfg.pairing = Pairing::Sampled;
  } else {
    throw ConfigError("--pairing must be 'all' or 'sampled'");
  }
  const long long donors = o.integer("donors", 1);
  if (donors < 1) throw ConfigError("--donors must be >= 1");
  cfg.sampled_donors = static_cast<std::size_t>(donors);
  cfg.rank_convention = parse_rank_convention(o.text("rank-convention", "distance"));
  const long long reps = o.integer("bootstrap", 10000);
  if (reps < 1) throw ConfigError("--bootstrap must be >= 1");
  cfg.bootstrap_replicates = static_cast<std::size_t>(reps);
  cfg.seed = o.seed();
  cfg.jobs = o.jobs();
  return cfg;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.has("recognition")) return cmd_recognition(o, out);
  const MaskingConfig cfg = masking_config(o);
  const fs::path maps_dir = o.existing("maps");
  const fs::path out_dir = o.required("out");
  const ModelGraph model = load_model(o.existing("model"), o.existing("weights"));
  const std::vector<MaskingItem> images = load_images(o.existing("images"));

  std::vector<std::string> sets = o.list("kinds");
  const bool flat = sets.empty() && map_sets_in(maps_dir).empty();
  if (sets.empty()) sets = flat ? std::vector<std::string>{maps_dir.filename().string()} : map_sets_in(maps_dir);

  Manifest manifest(out_dir, "evaluate");
  std::map<std::string, std::string> failures;
  std::vector<std::pair<std::string, MaskingSummary>> summaries;
  for (const auto& set : sets) {
    try {
      const MapSet maps = load_map_set(flat ? maps_dir : maps_dir / set);
      std::vector<MaskingItem> subset;
      for (const auto& it : images)
        if (maps.count(it.image_id)) subset.push_back(it);
      MaskingConfig c = cfg;
      c.seed = derive_seed(cfg.seed, id_hash(set));
      const MaskingExperiment ex = run_masking_experiment(model, subset, maps, c);
      manifest.add_text(set + "/inverse_rank.csv", inverse_rank_csv(ex.rows), {{"mask_kind", set}});
      summaries.emplace_back(set, ex.summary);
    } catch (const DataError& e) {
      failures[set] = e.what();
    }
  }

  const int comparisons = static_cast<int>(std::max<std::size_t>(1, summaries.size()));
  std::string csv = "mask_kind,images,mean_correct,mean_incorrect,t,p_raw,p_bonferroni,bootstrap_p\n";
  json js = json::array();
  for (auto& [set, s] : summaries) {
    double t = std::nan(""), p = std::nan(""), pb = std::nan("");
    if (s.t_test) {
      t = s.t_test->t;
      p = s.t_test->p_raw;
      pb = std::min(1.0, p * comparisons);
    }
    csv += set + "," + std::to_string(s.image_ids.size()) + "," + format_number(s.mean_correct) +
           "," + format_number(s.mean_incorrect) + "," + number_or_empty(t) + "," +
           number_or_empty(p) + "," + number_or_empty(pb) + "," + format_number(s.bootstrap_p) +
           "\n";
    json j;
    j["mask_kind"] = set;
    j["rank_convention"] = to_string(cfg.rank_convention);
    j["pairing"] = cfg.pairing == Pairing::AllVsAll ? "all" : "sampled";
    j["mean_correct"] = s.mean_correct;
    j["mean_incorrect"] = s.mean_incorrect;
    j["t"] = number_or_null(t);
    j["p_raw"] = number_or_null(p);
    j["p_bonferroni"] = number_or_null(pb);
    j["bootstrap_p"] = s.bootstrap_p;
    j["bootstrap_replicates"] = cfg.bootstrap_replicates;
    j["image_ids"] = s.image_ids;
    j["per_image_correct"] = s.correct;
    j["per_image_incorrect"] = s.incorrect;
    js.push_back(std::move(j));
  }
  manifest.add_text("summary.csv", csv);
  manifest.add_text("summary.json", js.dump(2) + "\n");
  manifest.write({{"model", model.name()}, {"seed", cfg.seed}});
  report_failures(err, failures);
  for (const auto& [set, s] : summaries) {
    out << set << ": mean inverse-rank correct " << format_number(s.mean_correct) << ", incorrect "
        << format_number(s.mean_incorrect) << ", paired bootstrap p " << format_number(s.bootstrap_p)
        << "\n";
  }
  return failures.empty() ? kExitOk : kExitPartial;
}

int cmd_export_stimuli(const Options& o, std::ostream& out, std::ostream&) {
  const std::vector<MaskingItem> images = load_images(o.existing("images"));
  const MapSet maps = load_map_set(o.existing("maps"));
  const fs::path out_dir = o.required("out");
  StimulusConfig cfg;
  const long long size = o.integer("set-size", 0), count = o.integer("sets", 0);
  if (size < 0 || count < 0) throw ConfigError("--set-size and --sets must be non-negative");
  cfg.set_size = static_cast<std::size_t>(size);
  cfg.set_count = static_cast<std::size_t>(count);
  cfg.reveal_fraction = o.real("reveal", cfg.reveal_fraction);
  cfg.smooth_sigma = o.real("smooth-sigma", cfg.smooth_sigma);
  cfg.incorrect.max_corr = o.real("max-corr", cfg.incorrect.max_corr);
  cfg.seed = o.seed();
  std::vector<MaskingItem> subset;
  for (const auto& it : images)
    if (maps.count(it.image_id)) subset.push_back(it);
  const auto sets = export_stimuli(subset, maps, cfg, out_dir);
  std::size_t trials = 0;
  for (const auto& s : sets) trials += s.trials.size();
  out << sets.size() << " stimulus sets (" << trials << " masked images) written to "
      << out_dir.string() << "\n";
  return kExitOk;
}

// ---- export-fixture --------------------------------------------------------

int cmd_export_fixture(const Options& o, std::ostream& out, std::ostream&) {
  const fs::path out_dir = o.required("out");
  const long long count = o.integer("count", 30);
  const long long size = o.integer("size", 32);
  if (count < 1 || count > 1000000) throw ConfigError("--count must be between 1 and 1e6");
  if (size < 8 || size > 1024) throw ConfigError("--size must be between 8 and 1024");
  const std::uint64_t seed = o.seed();
  const auto samples = synthetic::make_shape_dataset(static_cast<std::size_t>(count), seed, size);
  std::string labels = "image_id,label,class_name\n";
  for (const auto& s : samples) {
    write_png(out_dir / "images" / (s.image_id + ".png"), s.image);
    labels += s.image_id + "," + std::to_string(s.label) + "," +
              synthetic::shape_labels()[static_cast<std::size_t>(s.label)] + "\n";
  }
  write_text(out_dir / "labels.csv", labels);
  if (!o.flag("no-study")) {
    write_human_dataset(out_dir / "human", synthetic::make_study(samples, derive_seed(seed, 0x5eed)));
    json config;
    config["images"] = "images";
    config["data"] = "human";
    config["source-size"] = {size, size};
    config["seed"] = seed;
    write_text(out_dir / "config.json", config.dump(2) + "\n");
  }
  out << samples.size() << " images written to " << (out_dir / "images").string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Model and human visual-selectivity maps"};
  app.require_subcommand(1);
  using Command = std::function<int(const Options&, std::ostream&, std::ostream&)>;
  std::vector<std::tuple<CLI::App*, std::unique_ptr<Options>, Command>> commands;
  auto add = [&](const std::string& name, const std::string& help, Command fn,
                 const std::vector<std::pair<std::string, std::string>>& opts,
                 const std::vector<std::pair<std::string, std::string>>& flags = {}) {
    CLI::App* sub = app.add_subcommand(name, help);
    auto o = std::make_unique<Options>(sub);
    for (const auto& [n, h] : opts) o->add(n, h);
    for (const auto& [n, h] : flags) o->add_flag(n, h);
    commands.emplace_back(sub, std::move(o), std::move(fn));
  };
  const std::pair<std::string, std::string> jobs{"jobs", "worker threads (default 1)"};
  const std::pair<std::string, std::string> seed{"seed", "base random seed (default 0)"};
  const std::pair<std::string, std::string> out_dir{"out", "output directory"};

  add("attribute", "model maps for every image and method", cmd_attribute,
      {{"model", "model manifest JSON"},
       {"weights", "SELW weights"},
       {"images", "image directory"},
       out_dir,
       {"methods", "comma list: vanilla,gbp,gbpxim,sgbp,gradcam,scorecam"},
       {"samples", "SmoothGrad sample count"},
       {"noise", "SmoothGrad noise level"},
       {"class", "explain this class instead of the top-1"},
       seed,
       jobs});
  const std::vector<std::pair<std::string, std::string>> human_opts{
      {"data", "directory with the behavioural CSVs"},
      out_dir,
      {"kinds", "comma list of human kinds (default: all six and human_pc)"},
      {"size", "output map size (default 100)"},
      {"images", "image directory, for per-image source sizes"},
      {"source-size", "W,H of the source images when --images is absent"},
      {"patch-sigma", "patch interpolation kernel in output pixels"},
      {"dprime-sigma", "d' grid smoothing in grid units"},
      {"kde-bandwidth", "fixed KDE bandwidth in output pixels"},
      {"downweight", "Human PC weight of the fixation kinds"}};
  add("maps", "human maps from behavioural records", cmd_maps, human_opts);
  add("pc", "fit or apply the Human PC to existing maps", cmd_pc,
      {{"maps", "directory with one subdirectory per human kind"},
       out_dir,
       {"loadings", "existing human_pc_model.json to apply"},
       {"downweight", "Human PC weight of the fixation kinds"}});
  add("correlate", "smoothing-optimised correlation of model and human maps", cmd_correlate,
      {{"ann", "model map root (one subdirectory per method)"},
       {"human", "human map root (one subdirectory per kind)"},
       out_dir,
       {"methods", "comma list of model map sets"},
       {"kinds", "comma list of human map sets"},
       {"sigma-min", "smallest sigma (default 0)"},
       {"sigma-max", "largest sigma (default 30)"},
       {"sigma-step", "sigma grid step (default 0.5)"},
       {"size", "comparison size (default 100)"},
       {"data", "behavioural CSVs; enables the bootstrap"},
       {"bootstrap", "bootstrap replicates (default 100)"},
       seed,
       jobs});
  add("mask", "thresholded masks from a map set", cmd_mask,
      {{"maps", "directory of SELM maps"},
       out_dir,
       {"images", "optional image directory to write masked images"},
       {"reveal", "fraction of pixels kept (default 0.5)"},
       {"smooth-sigma", "blur applied before thresholding"}},
      {{"grayscale", "mask grayscale versions of the images"}});
  add("evaluate", "inverse-rank masking experiment, or recognition d'", cmd_evaluate,
      {{"model", "model manifest JSON"},
       {"weights", "SELW weights"},
       {"images", "image directory"},
       {"maps", "map root (subdirectories per kind) or a single map set"},
       {"kinds", "comma list of map sets under --maps"},
       out_dir,
       {"rank-convention", "distance (default) or position"},
       {"pairing", "all (default) or sampled"},
       {"donors", "donor masks per image when sampled"},
       {"reveal", "fraction of pixels kept (default 0.5)"},
       {"smooth-sigma", "blur applied before thresholding"},
       {"bootstrap", "paired bootstrap replicates (default 10000)"},
       {"recognition", "recognition.csv; scores human d' instead"},
       seed,
       jobs},
      {{"grayscale", "mask grayscale versions of the images"}});
  add("export-stimuli", "balanced masked-image sets for the recognition task", cmd_export_stimuli,
      {{"images", "image directory"},
       {"maps", "directory of SELM maps"},
       out_dir,
       {"set-size", "trials per set (even; default min(10, images))"},
       {"sets", "number of sets (multiple of the image count)"},
       {"reveal", "fraction of pixels kept (default 0.5)"},
       {"smooth-sigma", "blur applied before thresholding"},
       {"max-corr", "largest correlation allowed for incorrect masks (default 0.4)"},
       seed});
  add("export-fixture", "synthetic shape images and behavioural records", cmd_export_fixture,
      {out_dir,
       {"count", "number of images (default 30)"},
       {"size", "image size in pixels (default 32)"},
       seed},
      {{"no-study", "images only, without behavioural records"}});

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
  }
  for (auto& [sub, opts, fn] : commands) {
    if (!sub->parsed()) continue;
    try {
      opts->load_config();
      return fn(*opts, out, err);
    } catch (const ConfigError& e) {
      err << "config error: " << e.what() << "\n";
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
    } catch (const fs::filesystem_error& e) {
      err << "io error: " << e.what() << "\n";
    }
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace vsel::cli
