#pragma once

// Prediction datasets: (score, label, optional features) triples with CSV and
// JSONL readers/writers and seeded splitting.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "regretcal/detail/text.hpp"
#include "regretcal/error.hpp"

namespace regretcal {

struct ScoredSample {
  double score = 0.0;
  int label = 0;
  std::vector<double> features;
};

/// Immutable collection of samples. Every sample carries the index of the row
/// it came from in its source dataset; subsets produced by `split` keep both
/// the source identity and the row ids so that fold overlap can be detected.
class ScoredDataset {
 public:
  ScoredDataset() = default;

  explicit ScoredDataset(std::vector<ScoredSample> samples)
      : ScoredDataset(std::move(samples), {}, next_source_id()) {}

  ScoredDataset(std::vector<ScoredSample> samples, std::vector<std::size_t> row_ids, std::uint64_t source_id)
      : samples_(std::move(samples)), row_ids_(std::move(row_ids)), source_id_(source_id) {
    if (row_ids_.empty()) {
      row_ids_.resize(samples_.size());
      std::iota(row_ids_.begin(), row_ids_.end(), std::size_t{0});
    }
    if (row_ids_.size() != samples_.size()) {
      throw Error(ErrorCode::LengthMismatch, "row ids and samples differ in length");
    }
    feature_dim_ = samples_.empty() ? 0 : samples_.front().features.size();
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (!(s.score >= 0.0 && s.score <= 1.0)) {
        throw Error(ErrorCode::ScoreOutOfRange, "sample " + std::to_string(i) + " has score " +
                                                    detail::format_double(s.score));
      }
      if (s.label != 0 && s.label != 1) {
        throw Error(ErrorCode::LabelNotBinary, "sample " + std::to_string(i));
      }
      if (s.features.size() != feature_dim_) {
        throw Error(ErrorCode::InconsistentFeatureDim,
                    "sample " + std::to_string(i) + " has " + std::to_string(s.features.size()) +
                        " features, expected " + std::to_string(feature_dim_));
      }
    }
  }

  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  std::span<const ScoredSample> samples() const noexcept { return samples_; }
  const ScoredSample& operator[](std::size_t i) const { return samples_[i]; }
  std::span<const std::size_t> row_ids() const noexcept { return row_ids_; }
  std::uint64_t source_id() const noexcept { return source_id_; }

  std::vector<double> scores() const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.score);
    return out;
  }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.label);
    return out;
  }

  /// Same rows (ids, labels, features) with scores replaced.
  ScoredDataset with_scores(std::span<const double> scores) const {
    if (scores.size() != samples_.size()) throw Error(ErrorCode::LengthMismatch, "score vector length");
    auto copy = samples_;
    for (std::size_t i = 0; i < copy.size(); ++i) copy[i].score = scores[i];
    return ScoredDataset(std::move(copy), row_ids_, source_id_);
  }

  /// Subset by positions into this dataset, keeping provenance.
  ScoredDataset subset(std::span<const std::size_t> positions) const {
    std::vector<ScoredSample> s;
    std::vector<std::size_t> ids;
    s.reserve(positions.size());
    ids.reserve(positions.size());
    for (auto p : positions) {
      s.push_back(samples_.at(p));
      ids.push_back(row_ids_[p]);
    }
    ScoredDataset out(std::move(s), std::move(ids), source_id_);
    out.feature_dim_ = feature_dim_;
    return out;
  }

  /// Concatenation of two subsets of the same source.
  static ScoredDataset concat(const ScoredDataset& a, const ScoredDataset& b) {
    if (a.source_id_ != b.source_id_) throw Error(ErrorCode::InvalidSplit, "cannot merge datasets of different sources");
    std::vector<ScoredSample> s(a.samples_);
    s.insert(s.end(), b.samples_.begin(), b.samples_.end());
    std::vector<std::size_t> ids(a.row_ids_);
    ids.insert(ids.end(), b.row_ids_.begin(), b.row_ids_.end());
    return ScoredDataset(std::move(s), std::move(ids), a.source_id_);
  }

  /// True when both datasets come from the same source and share a row.
  static bool overlaps(const ScoredDataset& a, const ScoredDataset& b) {
    if (a.source_id_ != b.source_id_) return false;
    std::vector<std::size_t> x(a.row_ids_.begin(), a.row_ids_.end());
    std::vector<std::size_t> y(b.row_ids_.begin(), b.row_ids_.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::vector<std::size_t> common;
    std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(common));
    return !common.empty();
  }

  static std::uint64_t next_source_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1);
  }

 private:
  std::vector<ScoredSample> samples_;
  std::vector<std::size_t> row_ids_;
  std::uint64_t source_id_ = 0;
  std::size_t feature_dim_ = 0;
};

struct CsvSchema {
  std::string label_column = "y";
  std::string score_column = "score";
  std::string feature_prefix = "f";
};

namespace detail {

inline bool parse_feature_index(std::string_view name, std::string_view prefix, std::size_t& index) {
  if (name.size() <= prefix.size() || name.substr(0, prefix.size()) != prefix) return false;
  auto digits = name.substr(prefix.size());
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  return ec == std::errc() && ptr == digits.data() + digits.size();
}

inline int parse_label(std::string_view cell, std::size_t line) {
  auto v = parse_double(cell);
  if (!v) throw Error(ErrorCode::MalformedRow, "unparsable label '" + std::string(trim(cell)) + "'", line);
  if (*v == 0.0) return 0;
  if (*v == 1.0) return 1;
  throw Error(ErrorCode::LabelNotBinary, "label " + std::string(trim(cell)), line);
}

inline double parse_score(std::string_view cell, std::size_t line) {
  auto v = parse_double(cell);
  if (!v) throw Error(ErrorCode::MalformedRow, "unparsable score '" + std::string(trim(cell)) + "'", line);
  if (!(*v >= 0.0 && *v <= 1.0)) throw Error(ErrorCode::ScoreOutOfRange, "score " + std::string(trim(cell)), line);
  return *v;
}

}  // namespace detail

inline ScoredDataset read_csv(std::istream& in, const CsvSchema& schema = {}) {
  std::string header_line;
  if (!std::getline(in, header_line)) throw Error(ErrorCode::EmptyDataset, "missing header row");
  if (header_line.size() >= 3 && header_line.compare(0, 3, "\xEF\xBB\xBF") == 0) header_line.erase(0, 3);
  auto header = detail::split(header_line, ',');

  std::optional<std::size_t> label_col, score_col;
  std::vector<std::pair<std::size_t, std::size_t>> feature_cols;  // (feature index, column)
  for (std::size_t c = 0; c < header.size(); ++c) {
    auto name = detail::trim(header[c]);
    std::size_t index = 0;
    if (name == schema.label_column) {
      label_col = c;
    } else if (name == schema.score_column) {
      score_col = c;
    } else if (detail::parse_feature_index(name, schema.feature_prefix, index)) {
      feature_cols.emplace_back(index, c);
    }
  }
  if (!score_col) throw Error(ErrorCode::MissingColumn, "missing score column '" + schema.score_column + "'");
  if (!label_col) throw Error(ErrorCode::MissingColumn, "missing label column '" + schema.label_column + "'");
  std::sort(feature_cols.begin(), feature_cols.end());

  std::vector<ScoredSample> samples;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split(line, ',');
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::MalformedRow,
                  "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()), line_no);
    }
    ScoredSample s;
    s.label = detail::parse_label(cells[*label_col], line_no);
    s.score = detail::parse_score(cells[*score_col], line_no);
    s.features.reserve(feature_cols.size());
    for (auto [idx, col] : feature_cols) {
      auto v = detail::parse_double(cells[col]);
      if (!v) throw Error(ErrorCode::MalformedRow, "unparsable feature in column " + std::to_string(col + 1), line_no);
      s.features.push_back(*v);
    }
    samples.push_back(std::move(s));
  }
  return ScoredDataset(std::move(samples));
}

inline ScoredDataset load_csv(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path);
  return read_csv(in, schema);
}

inline void write_csv(std::ostream& out, const ScoredDataset& ds, const CsvSchema& schema = {}) {
  out << schema.label_column << ',' << schema.score_column;
  for (std::size_t j = 0; j < ds.feature_dim(); ++j) out << ',' << schema.feature_prefix << j;
  out << '\n';
  for (const auto& s : ds.samples()) {
    out << s.label << ',' << detail::format_double(s.score);
    for (double f : s.features) out << ',' << detail::format_double(f);
    out << '\n';
  }
}

inline void save_csv(const std::string& path, const ScoredDataset& ds, const CsvSchema& schema = {}) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::FileNotFound, "cannot write " + path);
  write_csv(out, ds, schema);
}

inline ScoredDataset read_jsonl(std::istream& in) {
  std::vector<ScoredSample> samples;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> dim;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRow, e.what(), line_no);
    }
    if (!obj.is_object() || !obj.contains("y") || !obj.contains("score") || !obj["y"].is_number() ||
        !obj["score"].is_number()) {
      throw Error(ErrorCode::MalformedRow, "expected object with numeric 'y' and 'score'", line_no);
    }
    ScoredSample s;
    double y = obj["y"].get<double>();
    if (y != 0.0 && y != 1.0) throw Error(ErrorCode::LabelNotBinary, obj["y"].dump(), line_no);
    s.label = static_cast<int>(y);
    s.score = obj["score"].get<double>();
    if (!(s.score >= 0.0 && s.score <= 1.0)) throw Error(ErrorCode::ScoreOutOfRange, obj["score"].dump(), line_no);
    if (obj.contains("features")) {
      const auto& f = obj["features"];
      if (!f.is_array()) throw Error(ErrorCode::MalformedRow, "'features' must be an array", line_no);
      for (const auto& v : f) {
        if (!v.is_number()) throw Error(ErrorCode::MalformedRow, "non-numeric feature", line_no);
        s.features.push_back(v.get<double>());
      }
    }
    if (!dim) dim = s.features.size();
    if (s.features.size() != *dim) {
      throw Error(ErrorCode::InconsistentFeatureDim,
                  "got " + std::to_string(s.features.size()) + " features, expected " + std::to_string(*dim), line_no);
    }
    samples.push_back(std::move(s));
  }
  return ScoredDataset(std::move(samples));
}

inline ScoredDataset load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path);
  return read_jsonl(in);
}

inline void write_jsonl(std::ostream& out, const ScoredDataset& ds) {
  for (const auto& s : ds.samples()) {
    nlohmann::json obj{{"y", s.label}, {"score", s.score}};
    if (ds.feature_dim() > 0) obj["features"] = s.features;
    out << obj.dump() << '\n';
  }
}

/// Dispatches on extension: `.jsonl` / `.json` read as JSONL, anything else as CSV.
inline ScoredDataset load_dataset(const std::string& path, const CsvSchema& schema = {}) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".jsonl") || ends_with(".json")) return load_jsonl(path);
  return load_csv(path, schema);
}

struct SplitSpec {
  double fit_fraction = 0.5;
  double eval_fraction = 0.5;
  std::uint64_t seed = 0;
  bool honest = false;
};

struct SplitResult {
  ScoredDataset fit;   // whole fit part (fit1 ∪ fit2 when honest)
  ScoredDataset fit1;  // empty unless honest
  ScoredDataset fit2;  // empty unless honest
  ScoredDataset eval;
};

/// Seeded uniform permutation split. Each part keeps the original row order.
inline SplitResult split(const ScoredDataset& ds, const SplitSpec& spec) {
  if (!(spec.fit_fraction > 0.0) || !(spec.eval_fraction > 0.0) ||
      std::abs(spec.fit_fraction + spec.eval_fraction - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidSplit, "fractions must be positive and sum to 1");
  }
  const std::size_t n = ds.size();
  const std::size_t min_n = spec.honest ? 3 : 2;
  if (n < min_n || (spec.honest && n < 4)) {
    throw Error(ErrorCode::TooFewSamples, std::to_string(n) + " samples");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  auto n_fit = static_cast<std::size_t>(std::llround(spec.fit_fraction * static_cast<double>(n)));
  const std::size_t min_fit = spec.honest ? 2 : 1;
  n_fit = std::clamp(n_fit, min_fit, n - 1);

  auto sorted_range = [&](std::size_t lo, std::size_t hi) {
    std::vector<std::size_t> idx(perm.begin() + static_cast<std::ptrdiff_t>(lo), perm.begin() + static_cast<std::ptrdiff_t>(hi));
    std::sort(idx.begin(), idx.end());
    return idx;
  };

  SplitResult out;
  out.fit = ds.subset(sorted_range(0, n_fit));
  out.eval = ds.subset(sorted_range(n_fit, n));
  if (spec.honest) {
    const std::size_t n_fit1 = n_fit / 2;
    out.fit1 = ds.subset(sorted_range(0, n_fit1));
    out.fit2 = ds.subset(sorted_range(n_fit1, n_fit));
  }
  return out;
}

struct DatasetSummary {
  std::size_t n = 0;
  double positive_rate = 0.0;
  double score_min = 0.0;
  double score_max = 0.0;
  std::size_t feature_dim = 0;
};

inline DatasetSummary validate(const ScoredDataset& ds) {
  if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "");
  DatasetSummary out;
  out.n = ds.size();
  out.feature_dim = ds.feature_dim();
  std::size_t positives = 0;
  out.score_min = ds[0].score;
  out.score_max = ds[0].score;
  for (const auto& s : ds.samples()) {
    positives += static_cast<std::size_t>(s.label);
    out.score_min = std::min(out.score_min, s.score);
    out.score_max = std::max(out.score_max, s.score);
  }
  out.positive_rate = static_cast<double>(positives) / static_cast<double>(out.n);
  return out;
}

}  // namespace regretcal
