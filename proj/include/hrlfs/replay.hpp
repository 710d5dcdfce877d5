#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <memory>
#include <vector>

#include "hrlfs/error.hpp"
#include "hrlfs/random.hpp"

namespace hrlfs {

using StatePtr = std::shared_ptr<const std::vector<double>>;

// One transition (s_t, a_t, r_t, s_{t+1}). States are shared between the
// agents that act in the same step.
struct Experience {
  StatePtr s;
  int action = 0;
  double reward = 0.0;
  StatePtr s_next;
};

struct SampledBatch {
  std::vector<std::size_t> indices;  // positions in the buffer, oldest = 0
  std::vector<Experience> items;
  std::vector<double> weights;  // importance weights, max-normalized
};

// Fixed-capacity FIFO buffer with proportional prioritized sampling.
class PrioritizedReplay {
public:
  explicit PrioritizedReplay(std::size_t capacity = 400) : capacity_(capacity) {
    if (capacity == 0) throw InputError("replay capacity must be positive");
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const Experience& at(std::size_t i) const { return items_.at(i); }
  double priority(std::size_t i) const { return priorities_.at(i); }

  double max_priority() const {
    return priorities_.empty() ? 1.0 : *std::max_element(priorities_.begin(), priorities_.end());
  }

  // New items get the current maximum priority (1.0 when empty).
  void push(Experience e) { push(std::move(e), max_priority()); }

  void push(Experience e, double priority) {
    if (!(priority > 0.0) || !std::isfinite(priority)) throw InputError("replay priority must be positive and finite");
    items_.push_back(std::move(e));
    priorities_.push_back(priority);
    if (items_.size() > capacity_) {
      items_.pop_front();
      priorities_.pop_front();
    }
  }

  void update_priorities(const std::vector<std::size_t>& indices, const std::vector<double>& values) {
    if (indices.size() != values.size()) throw InputError("priority update size mismatch");
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (!(values[i] > 0.0) || !std::isfinite(values[i])) throw InputError("replay priority must be positive and finite");
      priorities_.at(indices[i]) = values[i];
    }
  }

  // Sampling probability of item i: priority_i^alpha / sum_j priority_j^alpha.
  std::vector<double> probabilities(double alpha) const {
    std::vector<double> p(priorities_.size());
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = std::pow(priorities_[i], alpha);
      total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
  }

  // Draws `batch` items with replacement.
  SampledBatch sample(std::size_t batch, double alpha, double beta, Rng& rng) const {
    if (batch == 0 || items_.size() < batch)
      throw InputError("replay holds " + std::to_string(items_.size()) + " items, batch needs " + std::to_string(batch));
    const auto p = probabilities(alpha);
    std::vector<double> cdf(p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) cdf[i] = (acc += p[i]);

    SampledBatch out;
    const auto n = static_cast<double>(items_.size());
    double wmax = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const double u = rng.uniform() * acc;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      const auto idx = static_cast<std::size_t>(it - cdf.begin());
      out.indices.push_back(idx);
      out.items.push_back(items_[idx]);
      const double w = std::pow(n * p[idx], -beta);
      out.weights.push_back(w);
      wmax = std::max(wmax, w);
    }
    for (double& w : out.weights) w /= wmax;
    return out;
  }

private:
  std::size_t capacity_;
  std::deque<Experience> items_;
  std::deque<double> priorities_;
};

inline SampledBatch sample_batch(const PrioritizedReplay& replay, std::size_t batch, double per_alpha, double per_beta,
                                 Rng& rng) {
  return replay.sample(batch, per_alpha, per_beta, rng);
}

}  // namespace hrlfs
