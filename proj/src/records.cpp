#include "vsel/records.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "vsel/error.hpp"
#include "vsel/text.hpp"

namespace vsel {

namespace {

class CsvTable {
 public:
  CsvTable(const std::string& text, const std::string& what, const std::vector<std::string>& required)
      : what_(what) {
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (header) {
        if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
        const auto names = split_csv_line(line);
        for (std::size_t i = 0; i < names.size(); ++i) columns_[trim(names[i])] = i;
        for (const auto& r : required) {
          if (!columns_.count(r)) throw FormatError(what_ + ": missing column '" + r + "'");
        }
        header = false;
        continue;
      }
      if (trim(line).empty()) continue;
      rows_.push_back(split_csv_line(line));
      if (rows_.back().size() != names_count()) {
        throw FormatError(what_ + ": row " + std::to_string(rows_.size()) + " has " +
                          std::to_string(rows_.back().size()) + " fields, expected " +
                          std::to_string(names_count()));
      }
    }
    if (header) throw FormatError(what_ + ": empty file (no header)");
  }

  std::size_t size() const { return rows_.size(); }

  std::string text(std::size_t row, const std::string& col) const {
    return trim(rows_[row][columns_.at(col)]);
  }

  double number(std::size_t row, const std::string& col) const {
    const std::string s = text(row, col);
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
      fail(row, "'" + col + "' is not a number: '" + s + "'");
    }
    return v;
  }

  int integer(std::size_t row, const std::string& col) const {
    const double v = number(row, col);
    if (v != std::floor(v)) fail(row, "'" + col + "' is not an integer");
    return static_cast<int>(v);
  }

  [[noreturn]] void fail(std::size_t row, const std::string& msg) const {
    throw FormatError(what_ + ": row " + std::to_string(row + 1) + ": " + msg);
  }

 private:
  std::size_t names_count() const { return columns_.size(); }

  std::string what_;
  std::unordered_map<std::string, std::size_t> columns_;
  std::vector<std::vector<std::string>> rows_;
};

Judgement parse_judgement(const CsvTable& t, std::size_t row, const std::string& col) {
  const std::string v = t.text(row, col);
  if (v == "same") return Judgement::Same;
  if (v == "shifted") return Judgement::Shifted;
  t.fail(row, "'" + col + "' must be same|shifted, got '" + v + "'");
}

void require_id(const CsvTable& t, std::size_t row, const std::string& col, const std::string& v) {
  if (v.empty()) t.fail(row, "'" + col + "' is empty");
}

}  // namespace

std::string to_string(Judgement j) { return j == Judgement::Same ? "same" : "shifted"; }

std::string to_string(FixationTask t) {
  switch (t) {
    case FixationTask::Free:
      return "free";
    case FixationTask::Saliency:
      return "saliency";
    case FixationTask::Object:
      return "object";
  }
  return "free";
}

std::string to_string(MaskCondition c) {
  return c == MaskCondition::Correct ? "correct" : "incorrect";
}

std::vector<PatchRating> parse_patch_ratings(const std::string& csv) {
  const CsvTable t(csv, "patch_ratings.csv",
                   {"image_id", "grid_row", "grid_col", "participant_id", "rating"});
  std::vector<PatchRating> out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    PatchRating p{t.text(r, "image_id"), t.integer(r, "grid_row"), t.integer(r, "grid_col"),
                  t.text(r, "participant_id"), t.integer(r, "rating")};
    require_id(t, r, "image_id", p.image_id);
    if (p.grid_row < 0 || p.grid_row >= kPatchGridSize || p.grid_col < 0 ||
        p.grid_col >= kPatchGridSize) {
      t.fail(r, "grid cell (" + std::to_string(p.grid_row) + ", " + std::to_string(p.grid_col) +
                    ") outside the 12 x 12 grid");
    }
    if (p.rating < 1 || p.rating > 6) t.fail(r, "rating " + std::to_string(p.rating) + " not in 1..6");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<DiscriminationTrial> parse_discrimination(const std::string& csv) {
  const CsvTable t(csv, "discrimination.csv",
                   {"image_id", "x", "y", "condition", "response", "participant_id"});
  std::vector<DiscriminationTrial> out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    DiscriminationTrial d{t.text(r, "image_id"),          t.number(r, "x"),
                          t.number(r, "y"),               parse_judgement(t, r, "condition"),
                          parse_judgement(t, r, "response"), t.text(r, "participant_id")};
    require_id(t, r, "image_id", d.image_id);
    if (d.x < 0 || d.y < 0) t.fail(r, "point lies outside the image");
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<ChainPoint> parse_chains(const std::string& csv) {
  const CsvTable t(csv, "chains.csv", {"image_id", "chain_id", "iteration", "x", "y"});
  std::vector<ChainPoint> out;
  std::map<std::tuple<std::string, std::string, int>, std::size_t> seen;
  for (std::size_t r = 0; r < t.size(); ++r) {
    ChainPoint c{t.text(r, "image_id"), t.text(r, "chain_id"), t.integer(r, "iteration"),
                 t.number(r, "x"), t.number(r, "y")};
    require_id(t, r, "image_id", c.image_id);
    if (c.iteration < 0 || c.iteration > kFinalChainIteration) {
      t.fail(r, "iteration " + std::to_string(c.iteration) + " not in 0..20");
    }
    if (c.x < 0 || c.y < 0) t.fail(r, "point lies outside the image");
    if (!seen.emplace(std::tuple{c.image_id, c.chain_id, c.iteration}, r).second) {
      t.fail(r, "duplicate point for chain '" + c.chain_id + "' iteration " +
                    std::to_string(c.iteration));
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Fixation> parse_fixations(const std::string& csv) {
  const CsvTable t(csv, "fixations.csv", {"image_id", "task", "x", "y"});
  std::vector<Fixation> out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    Fixation f;
    f.image_id = t.text(r, "image_id");
    require_id(t, r, "image_id", f.image_id);
    const std::string task = t.text(r, "task");
    if (task == "free") {
      f.task = FixationTask::Free;
    } else if (task == "saliency") {
      f.task = FixationTask::Saliency;
    } else if (task == "object") {
      f.task = FixationTask::Object;
    } else {
      t.fail(r, "task must be free|saliency|object, got '" + task + "'");
    }
    f.x = t.number(r, "x");
    f.y = t.number(r, "y");
    if (f.x < 0 || f.y < 0) t.fail(r, "point lies outside the image");
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<RecognitionTrial> parse_recognition(const std::string& csv) {
  const CsvTable t(csv, "recognition.csv",
                   {"image_id", "condition", "selected_label_set", "true_label_set",
                    "participant_id"});
  std::vector<RecognitionTrial> out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    RecognitionTrial tr;
    tr.image_id = t.text(r, "image_id");
    require_id(t, r, "image_id", tr.image_id);
    const std::string cond = t.text(r, "condition");
    if (cond == "correct") {
      tr.condition = MaskCondition::Correct;
    } else if (cond == "incorrect") {
      tr.condition = MaskCondition::Incorrect;
    } else {
      t.fail(r, "condition must be correct|incorrect, got '" + cond + "'");
    }
    tr.selected_label_set = t.text(r, "selected_label_set");
    tr.true_label_set = t.text(r, "true_label_set");
    tr.participant_id = t.text(r, "participant_id");
    if (tr.true_label_set.empty()) t.fail(r, "'true_label_set' is empty");
    out.push_back(std::move(tr));
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string patch_ratings_csv(const std::vector<PatchRating>& rows) {
  std::string s = "image_id,grid_row,grid_col,participant_id,rating\n";
  for (const auto& r : rows) {
    s += r.image_id + ',' + std::to_string(r.grid_row) + ',' + std::to_string(r.grid_col) + ',' +
         r.participant_id + ',' + std::to_string(r.rating) + '\n';
  }
  return s;
}

std::string discrimination_csv(const std::vector<DiscriminationTrial>& rows) {
  std::string s = "image_id,x,y,condition,response,participant_id\n";
  for (const auto& r : rows) {
    s += r.image_id + ',' + format_number(r.x) + ',' + format_number(r.y) + ',' +
         to_string(r.condition) + ',' + to_string(r.response) + ',' + r.participant_id + '\n';
  }
  return s;
}

std::string chains_csv(const std::vector<ChainPoint>& rows) {
  std::string s = "image_id,chain_id,iteration,x,y\n";
  for (const auto& r : rows) {
    s += r.image_id + ',' + r.chain_id + ',' + std::to_string(r.iteration) + ',' +
         format_number(r.x) + ',' + format_number(r.y) + '\n';
  }
  return s;
}

std::string fixations_csv(const std::vector<Fixation>& rows) {
  std::string s = "image_id,task,x,y\n";
  for (const auto& r : rows) {
    s += r.image_id + ',' + to_string(r.task) + ',' + format_number(r.x) + ',' +
         format_number(r.y) + '\n';
  }
  return s;
}

std::string recognition_csv(const std::vector<RecognitionTrial>& rows) {
  std::string s = "image_id,condition,selected_label_set,true_label_set,participant_id\n";
  for (const auto& r : rows) {
    s += r.image_id + ',' + to_string(r.condition) + ',' + r.selected_label_set + ',' +
         r.true_label_set + ',' + r.participant_id + '\n';
  }
  return s;
}

HumanDataset read_human_dataset(const std::filesystem::path& dir) {
  HumanDataset d;
  auto load = [&](const char* name, auto parse, auto& into) {
    const auto p = dir / name;
    if (std::filesystem::exists(p)) into = parse(read_text(p));
  };
  load("patch_ratings.csv", parse_patch_ratings, d.ratings);
  load("discrimination.csv", parse_discrimination, d.discrimination);
  load("chains.csv", parse_chains, d.chains);
  load("fixations.csv", parse_fixations, d.fixations);
  return d;
}

void write_human_dataset(const std::filesystem::path& dir, const HumanDataset& data) {
  std::filesystem::create_directories(dir);
  auto save = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + (dir / name).string());
    out << text;
  };
  save("patch_ratings.csv", patch_ratings_csv(data.ratings));
  save("discrimination.csv", discrimination_csv(data.discrimination));
  save("chains.csv", chains_csv(data.chains));
  save("fixations.csv", fixations_csv(data.fixations));
}

}  // namespace vsel
