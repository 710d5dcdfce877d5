#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>

#include "hrlfs/dataset.hpp"
#include "hrlfs/error.hpp"

namespace hrlfs {

enum class MetricKind { F1Micro, Accuracy, RecallMacro, OneMinusRae };

inline std::string to_string(MetricKind m) {
  switch (m) {
    case MetricKind::F1Micro: return "f1_micro";
    case MetricKind::Accuracy: return "accuracy";
    case MetricKind::RecallMacro: return "recall_macro";
    case MetricKind::OneMinusRae: return "one_minus_rae";
  }
  return "unknown";
}

inline MetricKind metric_from_string(std::string_view s) {
  if (s == "f1_micro") return MetricKind::F1Micro;
  if (s == "accuracy") return MetricKind::Accuracy;
  if (s == "recall_macro") return MetricKind::RecallMacro;
  if (s == "one_minus_rae") return MetricKind::OneMinusRae;
  throw InputError("unknown metric: " + std::string(s));
}

inline bool metric_supports(MetricKind m, TaskKind t) {
  return (m == MetricKind::OneMinusRae) == (t == TaskKind::Regression);
}

inline MetricKind default_metric(TaskKind t) {
  return t == TaskKind::Regression ? MetricKind::OneMinusRae : MetricKind::F1Micro;
}

namespace detail {

inline void check_lengths(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw InputError("prediction and label vectors differ in length");
  if (y.empty()) throw InputError("cannot score an empty prediction vector");
}

}  // namespace detail

inline double accuracy(std::span<const double> y, std::span<const double> yhat) {
  detail::check_lengths(y, yhat);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hit += y[i] == yhat[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

// F1 from class-pooled TP/FP/FN.
inline double f1_micro(std::span<const double> y, std::span<const double> yhat) {
  detail::check_lengths(y, yhat);
  std::set<double> classes(y.begin(), y.end());
  classes.insert(yhat.begin(), yhat.end());
  double tp = 0, fp = 0, fn = 0;
  for (double c : classes) {
    for (std::size_t i = 0; i < y.size(); ++i) {
      const bool truth = y[i] == c, pred = yhat[i] == c;
      tp += truth && pred;
      fp += !truth && pred;
      fn += truth && !pred;
    }
  }
  const double denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2 * tp / denom;
}

// Unweighted mean of per-class recall over the classes present in y.
inline double recall_macro(std::span<const double> y, std::span<const double> yhat) {
  detail::check_lengths(y, yhat);
  std::map<double, std::pair<double, double>> per;  // class -> (hits, support)
  for (std::size_t i = 0; i < y.size(); ++i) {
    auto& [hit, sup] = per[y[i]];
    sup += 1;
    hit += y[i] == yhat[i];
  }
  double sum = 0.0;
  for (const auto& [c, hs] : per) sum += hs.first / hs.second;
  return sum / static_cast<double>(per.size());
}

// 1 - sum|y - yhat| / sum|y - mean(y)|.
inline double one_minus_rae(std::span<const double> y, std::span<const double> yhat) {
  detail::check_lengths(y, yhat);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    num += std::abs(y[i] - yhat[i]);
    den += std::abs(y[i] - mean);
  }
  if (den == 0.0) throw NumericError("undefined 1-RAE: validation targets are constant");
  return 1.0 - num / den;
}

inline double compute_metric(MetricKind m, std::span<const double> y, std::span<const double> yhat) {
  switch (m) {
    case MetricKind::F1Micro: return f1_micro(y, yhat);
    case MetricKind::Accuracy: return accuracy(y, yhat);
    case MetricKind::RecallMacro: return recall_macro(y, yhat);
    case MetricKind::OneMinusRae: return one_minus_rae(y, yhat);
  }
  return 0.0;
}

}  // namespace hrlfs
