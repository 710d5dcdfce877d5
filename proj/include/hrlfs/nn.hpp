#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hrlfs/error.hpp"
#include "hrlfs/random.hpp"

namespace hrlfs {

// Fully connected network with ReLU hidden layers and one linear scalar
// output. Parameters live in one flat vector, layer by layer: W (out x in,
// row-major) followed by b (out).
class Mlp {
public:
  Mlp() = default;

  // Weights and biases uniform in +-1/sqrt(fan_in).
  Mlp(std::vector<std::size_t> widths, std::uint64_t seed) : widths_(std::move(widths)) {
    check_widths();
    params_.resize(count_params(widths_));
    Rng rng(seed);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
      const std::size_t n = widths_[l + 1] * (widths_[l] + 1);
      for (std::size_t i = 0; i < n; ++i) params_[off + i] = rng.uniform(-bound, bound);
      off += n;
    }
  }

  static Mlp zeros(std::vector<std::size_t> widths) {
    Mlp m;
    m.widths_ = std::move(widths);
    m.check_widths();
    m.params_.assign(count_params(m.widths_), 0.0);
    return m;
  }

  // Activations recorded by forward() for use by backward().
  struct Tape {
    std::vector<std::vector<double>> act;  // act[0] = input, act[l] = post-ReLU (last: raw output)
  };

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t input_size() const { return widths_.front(); }
  std::size_t num_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  double forward(std::span<const double> x) const {
    Tape tape;
    return forward(x, tape);
  }

  double forward(std::span<const double> x, Tape& tape) const {
    if (x.size() != input_size())
      throw InputError("network input has length " + std::to_string(x.size()) + ", expected " +
                       std::to_string(input_size()));
    for (double v : x) {
      if (!std::isfinite(v)) throw NumericError("non-finite network input");
    }
    tape.act.resize(widths_.size());
    tape.act[0].assign(x.begin(), x.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const std::size_t in = widths_[l], out = widths_[l + 1];
      const double* w = params_.data() + off;
      const double* b = w + out * in;
      const auto& a = tape.act[l];
      auto& z = tape.act[l + 1];
      z.assign(out, 0.0);
      const bool hidden = l + 2 < widths_.size();
      for (std::size_t o = 0; o < out; ++o) {
        double s = b[o];
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
        z[o] = hidden ? std::max(s, 0.0) : s;
      }
      off += out * (in + 1);
    }
    return tape.act.back()[0];
  }

  // Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
  void backward(const Tape& tape, double dout, std::span<double> grad) const {
    if (grad.size() != params_.size()) throw InputError("gradient buffer has wrong size");
    std::vector<double> delta{dout};
    std::size_t off = params_.size();
    for (std::size_t l = widths_.size() - 1; l-- > 0;) {
      const std::size_t in = widths_[l], out = widths_[l + 1];
      off -= out * (in + 1);
      const double* w = params_.data() + off;
      double* gw = grad.data() + off;
      double* gb = gw + out * in;
      const auto& a = tape.act[l];
      std::vector<double> prev(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        gb[o] += d;
        const double* row = w + o * in;
        double* grow = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) {
          grow[i] += d * a[i];
          prev[i] += d * row[i];
        }
      }
      if (l > 0) {
        // ReLU derivative; act[l] holds post-activation values.
        for (std::size_t i = 0; i < in; ++i) {
          if (a[i] <= 0.0) prev[i] = 0.0;
        }
      }
      delta = std::move(prev);
    }
  }

private:
  static std::size_t count_params(const std::vector<std::size_t>& widths) {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l + 1] * (widths[l] + 1);
    return n;
  }

  void check_widths() const {
    if (widths_.size() < 2) throw InputError("network needs at least input and output layers");
    if (widths_.back() != 1) throw InputError("network output width must be 1");
    for (auto w : widths_) {
      if (w == 0) throw InputError("layer widths must be positive");
    }
  }

  std::vector<std::size_t> widths_;
  std::vector<double> params_;
};

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// log(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// P(select | x) for an actor network, kept strictly inside (0, 1).
inline double select_probability(const Mlp& actor, std::span<const double> x) {
  return std::clamp(sigmoid(actor.forward(x)), 1e-12, 1.0 - 1e-12);
}

enum class LossKind {
  SquaredError,  // weight * (f(x) - target)^2
  PolicyGradient  // -weight * target * log pi(action | x), pi = sigmoid(f(x)); target is the advantage
};

struct Loss {
  LossKind kind = LossKind::SquaredError;
  double target = 0.0;
  int action = 1;
  double weight = 1.0;
};

namespace detail {

inline double loss_from_output(double f, const Loss& loss) {
  switch (loss.kind) {
    case LossKind::SquaredError: return loss.weight * (f - loss.target) * (f - loss.target);
    case LossKind::PolicyGradient: {
      const double log_pi = loss.action == 1 ? -softplus(-f) : -softplus(f);
      return -loss.weight * loss.target * log_pi;
    }
  }
  return 0.0;
}

inline double dloss_doutput(double f, const Loss& loss) {
  switch (loss.kind) {
    case LossKind::SquaredError: return 2.0 * loss.weight * (f - loss.target);
    case LossKind::PolicyGradient: return -loss.weight * loss.target * (static_cast<double>(loss.action) - sigmoid(f));
  }
  return 0.0;
}

}  // namespace detail

inline double loss_value(const Mlp& net, std::span<const double> x, const Loss& loss) {
  return detail::loss_from_output(net.forward(x), loss);
}

struct Gradient {
  double loss = 0.0;
  std::vector<double> grad;
};

// Exact reverse-mode gradient of `loss` with respect to every parameter.
inline Gradient net_gradient(const Mlp& net, std::span<const double> x, const Loss& loss) {
  Mlp::Tape tape;
  const double f = net.forward(x, tape);
  Gradient g;
  g.loss = detail::loss_from_output(f, loss);
  if (!std::isfinite(g.loss)) throw NumericError("non-finite loss");
  g.grad.assign(net.num_params(), 0.0);
  net.backward(tape, detail::dloss_doutput(f, loss), g.grad);
  return g;
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  bool operator==(const AdamState&) const = default;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline void adam_step(std::span<double> params, std::span<const double> grad, AdamState& st, double lr,
                      const AdamConfig& cfg = {}) {
  if (st.m.size() != params.size()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
    st.t = 0;
  }
  ++st.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grad[i];
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    params[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + cfg.eps);
  }
}

}  // namespace hrlfs
