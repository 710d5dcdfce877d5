#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "hrlfs/error.hpp"

namespace hrlfs {

namespace detail {

inline bool all_zero(const std::vector<std::vector<double>>& vs) {
  for (const auto& v : vs)
    for (double x : v)
      if (x != 0.0) return false;
  return true;
}

inline std::vector<double> fit_length(const std::vector<double>& v, std::size_t k) {
  std::vector<double> out(k, 0.0);
  std::copy_n(v.begin(), std::min(k, v.size()), out.begin());
  return out;
}

}  // namespace detail

// Projects raw embedding vectors onto their top principal components.
//
// Vectors are L2-normalized (zero vectors stay zero), mean-centered, and
// projected onto the leading right singular vectors. At most
// min(n-1, d, target_k) components carry signal; the remaining output
// coordinates are zero. Each component's sign is fixed so its largest
// loading is positive. With fewer than two vectors the raw vectors are
// truncated or zero-padded instead.
inline std::vector<std::vector<double>> reduce_dimensions(const std::vector<std::vector<double>>& raw,
                                                          std::size_t target_k) {
  if (target_k < 1) throw InputError("target dimension must be positive");
  const std::size_t n = raw.size();
  if (n == 0) return {};
  const std::size_t d = raw.front().size();
  if (d < 1) throw InputError("embedding vectors must be non-empty");
  for (const auto& v : raw) {
    if (v.size() != d) throw InputError("embedding vectors have inconsistent lengths");
  }
  if (n < 2) return {detail::fit_length(raw.front(), target_k)};
  std::vector<std::vector<double>> out(n, std::vector<double>(target_k, 0.0));
  if (detail::all_zero(raw)) return out;

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (double v : raw[i]) norm += v * v;
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < d; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = norm > 0.0 ? raw[i][j] / norm : 0.0;
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const Eigen::MatrixXd& v = svd.matrixV();
  if (sv.size() == 0 || sv(0) <= 0.0) return out;

  const std::size_t usable = std::min({n - 1, d, target_k, static_cast<std::size_t>(sv.size())});
  for (std::size_t c = 0; c < usable; ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    if (sv(ci) <= 1e-12 * sv(0)) break;
    Eigen::VectorXd axis = v.col(ci);
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0.0) axis = -axis;
    const Eigen::VectorXd proj = x * axis;
    for (std::size_t i = 0; i < n; ++i) out[i][c] = proj(static_cast<Eigen::Index>(i));
  }
  return out;
}

}  // namespace hrlfs
