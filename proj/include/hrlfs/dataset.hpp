#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hrlfs/error.hpp"
#include "hrlfs/random.hpp"

namespace hrlfs {

enum class TaskKind { BinaryClassification, MulticlassClassification, Regression };

inline bool is_classification(TaskKind t) { return t != TaskKind::Regression; }

inline std::string to_string(TaskKind t) {
  switch (t) {
    case TaskKind::BinaryClassification: return "binary-classification";
    case TaskKind::MulticlassClassification: return "multiclass-classification";
    case TaskKind::Regression: return "regression";
  }
  return "unknown";
}

inline TaskKind task_kind_from_string(std::string_view s) {
  if (s == "binary-classification") return TaskKind::BinaryClassification;
  if (s == "multiclass-classification") return TaskKind::MulticlassClassification;
  if (s == "regression") return TaskKind::Regression;
  throw InputError("unknown task kind: " + std::string(s));
}

// Columnar numeric dataset. columns[j][r] is feature j at row r.
struct FeatureTable {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> columns;
  std::vector<double> labels;
  TaskKind task_kind = TaskKind::BinaryClassification;
  std::string label_name = "label";
  int num_classes = 0;  // 0 for regression

  std::size_t n_features() const { return columns.size(); }
  std::size_t n_rows() const { return labels.size(); }

  bool operator==(const FeatureTable&) const = default;
};

// Throws InputError if the table breaks a structural invariant.
inline void validate(const FeatureTable& t) {
  if (t.columns.size() < 2) throw InputError("table needs at least 2 features");
  if (t.feature_names.size() != t.columns.size()) throw InputError("feature name count does not match column count");
  if (t.labels.size() < 2) throw InputError("table needs at least 2 rows");
  for (std::size_t j = 0; j < t.columns.size(); ++j) {
    if (t.columns[j].size() != t.labels.size())
      throw InputError("column \"" + t.feature_names[j] + "\" has a different length than the label vector");
  }
  if (is_classification(t.task_kind)) {
    std::set<long> seen;
    for (double y : t.labels) {
      if (y < 0 || std::floor(y) != y) throw InputError("classification labels must be non-negative integers");
      seen.insert(static_cast<long>(y));
    }
    const long c = *seen.rbegin() + 1;
    if (static_cast<long>(seen.size()) != c)
      throw InputError("classification labels must cover classes 0..C-1 without gaps");
    if (t.task_kind == TaskKind::BinaryClassification && c > 2)
      throw InputError("binary task has " + std::to_string(c) + " classes");
    if (t.num_classes != 0 && t.num_classes < c)
      throw InputError("num_classes smaller than label range");
  }
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV record. Handles double-quoted fields with "" escapes; does not
// support embedded newlines.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.emplace_back(trim(cur));
  return out;
}

inline std::optional<double> parse_finite(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

// Parses CSV text; see load_table.
inline FeatureTable parse_table(std::istream& in, const std::string& label_column, TaskKind task_kind) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("CSV is empty (missing header row)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = detail::split_csv_line(line);

  std::ptrdiff_t label_idx = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) label_idx = static_cast<std::ptrdiff_t>(i);
  }
  if (label_idx < 0) throw InputError("unknown label column \"" + label_column + "\"");

  FeatureTable t;
  t.task_kind = task_kind;
  t.label_name = label_column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (static_cast<std::ptrdiff_t>(i) != label_idx) t.feature_names.push_back(header[i]);
  }
  if (t.feature_names.size() < 2) throw InputError("CSV has fewer than 2 feature columns");
  t.columns.resize(t.feature_names.size());

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw InputError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(header.size()));
    }
    std::size_t j = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto v = detail::parse_finite(cells[i]);
      if (!v) {
        throw InputError("non-numeric cell \"" + cells[i] + "\" at row " + std::to_string(row) + ", column \"" +
                         header[i] + "\"");
      }
      if (static_cast<std::ptrdiff_t>(i) == label_idx) {
        t.labels.push_back(*v);
      } else {
        t.columns[j++].push_back(*v);
      }
    }
  }
  if (is_classification(task_kind) && !t.labels.empty()) {
    double mx = 0.0;
    for (double y : t.labels) mx = std::max(mx, y);
    t.num_classes = static_cast<int>(mx) + 1;
  }
  validate(t);
  return t;
}

// Loads a CSV with a header row. Every non-label column becomes a feature,
// in header order.
inline FeatureTable load_table(const std::string& csv_path, const std::string& label_column, TaskKind task_kind) {
  std::ifstream in(csv_path);
  if (!in) throw InputError("cannot open dataset file: " + csv_path);
  return parse_table(in, label_column, task_kind);
}

inline void write_table(const FeatureTable& t, std::ostream& out) {
  for (const auto& name : t.feature_names) out << detail::csv_escape(name) << ',';
  out << detail::csv_escape(t.label_name) << '\n';
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    for (const auto& col : t.columns) out << detail::format_double(col[r]) << ',';
    out << detail::format_double(t.labels[r]) << '\n';
  }
}

inline void save_table(const FeatureTable& t, const std::string& csv_path) {
  std::ofstream out(csv_path);
  if (!out) throw Error("cannot write " + csv_path);
  write_table(t, out);
}

// Rows of `t` listed by `rows`, in that order.
inline FeatureTable select_rows(const FeatureTable& t, const std::vector<std::size_t>& rows) {
  FeatureTable out;
  out.feature_names = t.feature_names;
  out.task_kind = t.task_kind;
  out.label_name = t.label_name;
  out.num_classes = t.num_classes;
  out.columns.resize(t.n_features());
  out.labels.reserve(rows.size());
  for (auto& c : out.columns) c.reserve(rows.size());
  for (std::size_t r : rows) {
    out.labels.push_back(t.labels[r]);
    for (std::size_t j = 0; j < t.n_features(); ++j) out.columns[j].push_back(t.columns[j][r]);
  }
  return out;
}

// Population z-score per column. Constant columns become all zeros.
inline std::vector<double> zscore(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  std::vector<double> out(v.size(), 0.0);
  if (sd > 0.0 && std::isfinite(sd)) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd;
  }
  return out;
}

inline FeatureTable normalize_columns(const FeatureTable& t) {
  FeatureTable out = t;
  for (auto& c : out.columns) c = zscore(c);
  return out;
}

struct SplitPair {
  FeatureTable train;
  FeatureTable valid;
  std::vector<std::size_t> train_rows;  // source row indices, ascending
  std::vector<std::size_t> valid_rows;
};

// Seeded holdout split. Classification tables are stratified per class when
// every class has at least 2 rows; otherwise rows are shuffled globally.
inline SplitPair split_table(const FeatureTable& t, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw InputError("holdout fraction must lie in (0, 1)");
  const std::size_t m = t.n_rows();
  const double raw = static_cast<double>(m) * holdout_fraction;
  const auto n_valid = static_cast<std::size_t>(std::llround(raw));
  if (std::floor(raw) < 1.0 || n_valid >= m) {
    throw InputError("degenerate split: " + std::to_string(m) + " rows with holdout fraction " +
                     detail::format_double(holdout_fraction));
  }

  Rng rng(derive_seed(seed, {0x5b1170ULL}));
  std::vector<std::size_t> valid;

  std::map<long, std::vector<std::size_t>> by_class;
  bool stratify = is_classification(t.task_kind);
  if (stratify) {
    for (std::size_t r = 0; r < m; ++r) by_class[static_cast<long>(t.labels[r])].push_back(r);
    for (const auto& [c, rows] : by_class) {
      if (rows.size() < 2) stratify = false;
    }
  }

  if (stratify) {
    // Largest-remainder allocation of n_valid across classes, keeping at
    // least one training row per class.
    struct Quota {
      long cls;
      std::size_t take;
      double frac;
      std::size_t cap;
    };
    std::vector<Quota> quotas;
    std::size_t allotted = 0;
    for (const auto& [c, rows] : by_class) {
      const double q = static_cast<double>(rows.size()) * holdout_fraction;
      auto take = std::min(static_cast<std::size_t>(std::floor(q)), rows.size() - 1);
      quotas.push_back({c, take, q - std::floor(q), rows.size() - 1});
      allotted += take;
    }
    std::vector<std::size_t> order(quotas.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return quotas[a].frac > quotas[b].frac; });
    while (allotted < n_valid) {
      bool progressed = false;
      for (std::size_t i : order) {
        if (allotted == n_valid) break;
        if (quotas[i].take < quotas[i].cap) {
          ++quotas[i].take;
          ++allotted;
          progressed = true;
        }
      }
      if (!progressed) break;
    }
    for (const auto& q : quotas) {
      auto rows = by_class[q.cls];
      rng.shuffle(rows);
      valid.insert(valid.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(q.take));
    }
  } else {
    std::vector<std::size_t> rows(m);
    for (std::size_t r = 0; r < m; ++r) rows[r] = r;
    rng.shuffle(rows);
    valid.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_valid));
  }

  std::sort(valid.begin(), valid.end());
  std::vector<std::size_t> train;
  train.reserve(m - valid.size());
  std::size_t vi = 0;
  for (std::size_t r = 0; r < m; ++r) {
    if (vi < valid.size() && valid[vi] == r) {
      ++vi;
    } else {
      train.push_back(r);
    }
  }

  SplitPair out;
  out.train = select_rows(t, train);
  out.valid = select_rows(t, valid);
  out.train_rows = std::move(train);
  out.valid_rows = std::move(valid);
  return out;
}

struct FeatureMetadata {
  std::optional<std::string> dataset_description;
  std::map<std::string, std::string> descriptions;
  std::vector<std::string> missing;  // feature names without a description, in table order

  bool empty() const { return !dataset_description && descriptions.empty(); }
  bool operator==(const FeatureMetadata&) const = default;
};

// Metadata for a table with no descriptions at all.
inline FeatureMetadata empty_metadata(const std::vector<std::string>& feature_names) {
  FeatureMetadata md;
  md.missing = feature_names;
  return md;
}

inline FeatureMetadata parse_metadata(const std::string& text, const std::vector<std::string>& feature_names) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("malformed metadata JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("malformed metadata: top level must be an object");

  FeatureMetadata md;
  if (j.contains("dataset_description")) {
    const auto& d = j["dataset_description"];
    if (d.is_string()) md.dataset_description = d.get<std::string>();
    else if (!d.is_null()) throw InputError("malformed metadata: dataset_description must be a string or null");
  }
  const std::set<std::string> known(feature_names.begin(), feature_names.end());
  if (j.contains("features")) {
    if (!j["features"].is_array()) throw InputError("malformed metadata: features must be an array");
    for (const auto& f : j["features"]) {
      if (!f.is_object() || !f.contains("name") || !f["name"].is_string() || !f.contains("description") ||
          !f["description"].is_string()) {
        throw InputError("malformed metadata: each feature needs string fields name and description");
      }
      const auto name = f["name"].get<std::string>();
      if (!known.count(name)) throw InputError("metadata names unknown feature \"" + name + "\"");
      if (!md.descriptions.emplace(name, f["description"].get<std::string>()).second)
        throw InputError("malformed metadata: feature \"" + name + "\" listed twice");
    }
  }
  for (const auto& name : feature_names) {
    if (!md.descriptions.count(name)) md.missing.push_back(name);
  }
  return md;
}

inline FeatureMetadata load_metadata(const std::string& path, const FeatureTable& table) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open metadata file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_metadata(ss.str(), table.feature_names);
}

inline nlohmann::json metadata_to_json(const FeatureMetadata& md, const std::vector<std::string>& feature_names) {
  nlohmann::json j;
  j["dataset_description"] = md.dataset_description ? nlohmann::json(*md.dataset_description) : nlohmann::json();
  j["features"] = nlohmann::json::array();
  for (const auto& name : feature_names) {
    if (auto it = md.descriptions.find(name); it != md.descriptions.end())
      j["features"].push_back({{"name", name}, {"description", it->second}});
  }
  return j;
}

}  // namespace hrlfs
