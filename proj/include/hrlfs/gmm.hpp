#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "hrlfs/dataset.hpp"
#include "hrlfs/error.hpp"
#include "hrlfs/random.hpp"

namespace hrlfs {

// One-dimensional Gaussian mixture. sigma holds standard deviations.
struct GmmParams {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> sigmas;

  std::size_t k() const { return weights.size(); }
  bool operator==(const GmmParams&) const = default;
};

struct GmmOptions {
  double tol = 1e-6;
  int max_iter = 200;
  double sigma_floor = 1e-6;
};

struct GmmFit {
  GmmParams params;
  double log_likelihood = 0.0;
  std::vector<double> ll_trace;  // log-likelihood before every M-step, plus the final value
  int iterations = 0;            // M-steps performed
  int requested_k = 0;
  bool degraded = false;  // k was reduced to the number of distinct values
};

inline double gmm_pdf(const GmmParams& g, double x) {
  double p = 0.0;
  for (std::size_t j = 0; j < g.k(); ++j) {
    const double u = (x - g.means[j]) / g.sigmas[j];
    p += g.weights[j] * std::exp(-0.5 * u * u) / (g.sigmas[j] * std::sqrt(2.0 * std::numbers::pi));
  }
  return p;
}

namespace detail {

inline double log_normal(double x, double mu, double sigma) {
  const double u = (x - mu) / sigma;
  return -0.5 * u * u - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

// Fills resp (m x k, row-major) with posterior responsibilities; returns the
// total log-likelihood.
inline double e_step(std::span<const double> x, const GmmParams& g, std::vector<double>& resp) {
  const std::size_t k = g.k();
  resp.assign(x.size() * k, 0.0);
  std::vector<double> logw(k);
  for (std::size_t j = 0; j < k; ++j)
    logw[j] = g.weights[j] > 0.0 ? std::log(g.weights[j]) : -std::numeric_limits<double>::infinity();
  double ll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double* r = resp.data() + i * k;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      r[j] = logw[j] + log_normal(x[i], g.means[j], g.sigmas[j]);
      mx = std::max(mx, r[j]);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      r[j] = std::exp(r[j] - mx);
      s += r[j];
    }
    for (std::size_t j = 0; j < k; ++j) r[j] /= s;
    ll += mx + std::log(s);
  }
  return ll;
}

inline void m_step(std::span<const double> x, const std::vector<double>& resp, double sigma_floor, GmmParams& g) {
  const std::size_t k = g.k();
  const double m = static_cast<double>(x.size());
  for (std::size_t j = 0; j < k; ++j) {
    double nj = 0.0, sx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      nj += resp[i * k + j];
      sx += resp[i * k + j] * x[i];
    }
    if (nj <= 1e-300) {
      g.weights[j] = 0.0;  // dead component; keep its location
      continue;
    }
    const double mu = sx / nj;
    double sv = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sv += resp[i * k + j] * (x[i] - mu) * (x[i] - mu);
    g.weights[j] = nj / m;
    g.means[j] = mu;
    g.sigmas[j] = std::max(std::sqrt(sv / nj), sigma_floor);
  }
  const double tot = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
  for (double& w : g.weights) w /= tot;
}

inline std::size_t count_distinct(std::span<const double> x) {
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

// k-means++ seeding followed by one hard assignment pass.
inline GmmParams kmeanspp_init(std::span<const double> x, std::size_t k, std::uint64_t seed, double sigma_floor) {
  Rng rng(seed);
  const std::size_t m = x.size();
  std::vector<double> centers;
  centers.push_back(x[rng.below(m)]);
  std::vector<double> d2(m);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (x[i] - c) * (x[i] - c));
      d2[i] = best;
      total += best;
    }
    double u = rng.uniform() * total;
    std::size_t pick = m - 1;
    for (std::size_t i = 0; i < m; ++i) {
      if (d2[i] <= 0.0) continue;
      if (u < d2[i]) {
        pick = i;
        break;
      }
      u -= d2[i];
    }
    // Guard against rounding landing on an existing center.
    if (d2[pick] <= 0.0) {
      pick = static_cast<std::size_t>(std::max_element(d2.begin(), d2.end()) - d2.begin());
    }
    centers.push_back(x[pick]);
  }

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(m);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double global_sd = std::sqrt(var / static_cast<double>(m));

  std::vector<double> n(k, 0.0), s(k, 0.0), ss(k, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (std::abs(x[i] - centers[j]) < std::abs(x[i] - centers[best])) best = j;
    }
    n[best] += 1.0;
    s[best] += x[i];
    ss[best] += x[i] * x[i];
  }
  GmmParams g;
  for (std::size_t j = 0; j < k; ++j) {
    const double mu = n[j] > 0 ? s[j] / n[j] : centers[j];
    double sd = n[j] > 1 ? std::sqrt(std::max(ss[j] / n[j] - mu * mu, 0.0)) : 0.0;
    if (sd <= sigma_floor) sd = std::max(global_sd / static_cast<double>(k), sigma_floor);
    g.weights.push_back(std::max(n[j], 1.0));
    g.means.push_back(mu);
    g.sigmas.push_back(sd);
  }
  const double tot = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
  for (double& w : g.weights) w /= tot;
  return g;
}

inline void sort_components(GmmParams& g) {
  std::vector<std::size_t> idx(g.k());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return g.means[a] < g.means[b]; });
  GmmParams out;
  for (std::size_t i : idx) {
    out.weights.push_back(g.weights[i]);
    out.means.push_back(g.means[i]);
    out.sigmas.push_back(g.sigmas[i]);
  }
  g = std::move(out);
}

}  // namespace detail

inline double log_likelihood(const GmmParams& g, std::span<const double> values) {
  std::vector<double> resp;
  return detail::e_step(values, g, resp);
}

// Fits a k-component mixture by EM. `values` are expected to be z-scored.
// If k exceeds the number of distinct values, k is reduced and the fit is
// flagged as degraded. Components are returned sorted by mean.
inline GmmFit fit_gmm(std::span<const double> values, int k, std::uint64_t seed, const GmmOptions& opt = {}) {
  if (k < 1) throw InputError("GMM component count must be positive");
  if (values.size() < static_cast<std::size_t>(k))
    throw InputError("GMM needs at least k values (" + std::to_string(values.size()) + " < " + std::to_string(k) + ")");

  GmmFit fit;
  fit.requested_k = k;
  const std::size_t distinct = detail::count_distinct(values);
  std::size_t keff = static_cast<std::size_t>(k);
  if (keff > distinct) {
    keff = distinct;
    fit.degraded = true;
  }

  GmmParams g = detail::kmeanspp_init(values, keff, seed, opt.sigma_floor);
  std::vector<double> resp;
  for (int iter = 0;; ++iter) {
    const double ll = detail::e_step(values, g, resp);
    fit.ll_trace.push_back(ll);
    if (iter > 0 && ll - fit.ll_trace[fit.ll_trace.size() - 2] < opt.tol) break;
    if (iter >= opt.max_iter) break;
    detail::m_step(values, resp, opt.sigma_floor, g);
    ++fit.iterations;
  }
  fit.log_likelihood = fit.ll_trace.back();
  detail::sort_components(g);
  fit.params = std::move(g);
  return fit;
}

// Pads a degraded fit with zero-weight components so every feature shares
// one parameter dimension.
inline GmmParams pad_components(GmmParams g, std::size_t k, double sigma_floor = GmmOptions{}.sigma_floor) {
  while (g.k() < k) {
    g.weights.push_back(0.0);
    g.means.push_back(0.0);
    g.sigmas.push_back(sigma_floor);
  }
  return g;
}

// BIC with 3k-1 free parameters (k means, k sigmas, k-1 weights).
inline double bic(const GmmFit& fit, std::size_t n_samples) {
  const double p = 3.0 * static_cast<double>(fit.params.k()) - 1.0;
  return -2.0 * fit.log_likelihood + p * std::log(static_cast<double>(n_samples));
}

inline std::uint64_t gmm_seed(std::uint64_t run_seed, std::size_t feature, int k) {
  return derive_seed(run_seed, {0x6a11ULL, feature, static_cast<std::uint64_t>(k)});
}

// BIC-optimal component count in [1, k_max] for a single z-scored column.
inline int bic_best_k(std::span<const double> column, int k_max, std::uint64_t seed, std::size_t feature_index,
                      const GmmOptions& opt = {}) {
  if (k_max < 1) throw InputError("k_max must be at least 1");
  const auto distinct = static_cast<int>(detail::count_distinct(column));
  int best_k = 1;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= std::min(k_max, std::max(distinct, 1)); ++k) {
    const auto fit = fit_gmm(column, k, gmm_seed(seed, feature_index, k), opt);
    const double b = bic(fit, column.size());
    if (b < best) {
      best = b;
      best_k = static_cast<int>(fit.params.k());
    }
  }
  return best_k;
}

// Per-feature BIC search; returns the largest per-feature optimum. Columns are
// z-scored here, so raw or already-normalized tables give the same answer.
inline int select_global_k(const FeatureTable& table, int k_max, std::uint64_t seed, const GmmOptions& opt = {}) {
  if (k_max < 1) throw InputError("k_max must be at least 1");
  int global = 1;
  for (std::size_t j = 0; j < table.n_features(); ++j) {
    const auto col = zscore(table.columns[j]);
    global = std::max(global, bic_best_k(col, k_max, seed, j, opt));
  }
  return global;
}

}  // namespace hrlfs
