#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrlfs/error.hpp"
#include "hrlfs/nn.hpp"
#include "hrlfs/random.hpp"
#include "hrlfs/replay.hpp"

namespace hrlfs {

enum class ActionMode { UniformRandom, Sample, Greedy };

inline constexpr int kSelect = 1;
inline constexpr int kDrop = 0;

struct BrainConfig {
  std::size_t input_size = 0;
  std::vector<std::size_t> hidden{64, 8};
  std::size_t replay_capacity = 400;
};

// Actor-critic pair and replay memory owned by one tree node.
struct AgentBrain {
  int node_id = 0;
  Mlp actor;
  Mlp critic;
  AdamState actor_opt;
  AdamState critic_opt;
  PrioritizedReplay replay{400};

  AgentBrain() = default;

  AgentBrain(int id, const BrainConfig& cfg, std::uint64_t seed) : node_id(id), replay(cfg.replay_capacity) {
    std::vector<std::size_t> widths{cfg.input_size};
    widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
    widths.push_back(1);
    actor = Mlp(widths, derive_seed(seed, {0xac7ULL}));
    critic = Mlp(widths, derive_seed(seed, {0xc217ULL}));
  }
};

inline double select_probability(const AgentBrain& brain, std::span<const double> s) {
  return select_probability(brain.actor, s);
}

// Returns kSelect or kDrop. Greedy resolves probability 0.5 to select.
inline int act(const AgentBrain& brain, std::span<const double> s, ActionMode mode, Rng& rng) {
  switch (mode) {
    case ActionMode::UniformRandom: return rng.bernoulli(0.5) ? kSelect : kDrop;
    case ActionMode::Sample: return rng.bernoulli(select_probability(brain, s)) ? kSelect : kDrop;
    case ActionMode::Greedy: return select_probability(brain, s) >= 0.5 ? kSelect : kDrop;
  }
  return kDrop;
}

inline void remember(AgentBrain& brain, Experience exp) {
  if (!exp.s || !exp.s_next) throw InputError("experience states must be set");
  if (exp.s->size() != brain.actor.input_size() || exp.s_next->size() != brain.actor.input_size())
    throw InputError("experience state length does not match the network input");
  brain.replay.push(std::move(exp));
}

struct LearnConfig {
  double gamma = 0.9;
  double lr_actor = 0.001;
  double lr_critic = 0.01;
  double per_alpha = 0.6;
  double per_beta = 0.4;
};

struct LearnResult {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  std::vector<double> priorities;
};

// One actor-critic update on a sampled batch.
//
// TD target y = r + gamma * V(s'), advantage A = y - V(s). The critic
// minimizes mean w * (V(s) - y)^2 with y held fixed; the actor minimizes
// mean -w * A * log pi(a|s). Both take an Adam step; the batch's replay
// priorities become |A| + 1e-6. Nothing changes if a loss is non-finite.
inline LearnResult learn(AgentBrain& brain, const SampledBatch& batch, const LearnConfig& cfg) {
  const std::size_t b = batch.items.size();
  if (b == 0) throw InputError("learn called with an empty batch");
  const double inv = 1.0 / static_cast<double>(b);

  LearnResult res;
  std::vector<double> g_actor(brain.actor.num_params(), 0.0);
  std::vector<double> g_critic(brain.critic.num_params(), 0.0);
  std::vector<double> scratch;
  for (std::size_t i = 0; i < b; ++i) {
    const auto& e = batch.items[i];
    const double w = batch.weights[i] * inv;
    const double v_next = brain.critic.forward(*e.s_next);
    const double y = e.reward + cfg.gamma * v_next;

    Mlp::Tape tape;
    const double v = brain.critic.forward(*e.s, tape);
    const double td = y - v;
    const Loss critic_loss{LossKind::SquaredError, y, 0, w};
    res.critic_loss += detail::loss_from_output(v, critic_loss);
    brain.critic.backward(tape, detail::dloss_doutput(v, critic_loss), g_critic);

    const double f = brain.actor.forward(*e.s, tape);
    const Loss actor_loss{LossKind::PolicyGradient, td, e.action, w};
    res.actor_loss += detail::loss_from_output(f, actor_loss);
    brain.actor.backward(tape, detail::dloss_doutput(f, actor_loss), g_actor);

    res.priorities.push_back(std::abs(td) + 1e-6);
  }
  if (!std::isfinite(res.actor_loss) || !std::isfinite(res.critic_loss)) {
    std::ostringstream msg;
    msg << "non-finite loss at node " << brain.node_id << " (actor " << res.actor_loss << ", critic "
        << res.critic_loss << ")";
    throw NumericError(msg.str());
  }
  adam_step(brain.critic.params(), g_critic, brain.critic_opt, cfg.lr_critic);
  adam_step(brain.actor.params(), g_actor, brain.actor_opt, cfg.lr_actor);
  brain.replay.update_priorities(batch.indices, res.priorities);
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr const char* kBrainFormat = "hrlfs-brain-v1";

namespace detail {

inline nlohmann::json net_to_json(const Mlp& net, const AdamState& opt) {
  const auto p = net.params();
  return {{"widths", net.widths()},
          {"params", std::vector<double>(p.begin(), p.end())},
          {"adam", {{"m", opt.m}, {"v", opt.v}, {"t", opt.t}}}};
}

inline void net_from_json(const nlohmann::json& j, Mlp& net, AdamState& opt) {
  net = Mlp::zeros(j.at("widths").get<std::vector<std::size_t>>());
  const auto p = j.at("params").get<std::vector<double>>();
  if (p.size() != net.num_params()) throw InputError("checkpoint parameter count does not match widths");
  std::copy(p.begin(), p.end(), net.params().begin());
  opt.m = j.at("adam").at("m").get<std::vector<double>>();
  opt.v = j.at("adam").at("v").get<std::vector<double>>();
  opt.t = j.at("adam").at("t").get<std::int64_t>();
}

}  // namespace detail

inline nlohmann::json brain_to_json(const AgentBrain& brain) {
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = 0; i < brain.replay.size(); ++i) {
    const auto& e = brain.replay.at(i);
    items.push_back({{"s", *e.s},
                     {"a", e.action},
                     {"r", e.reward},
                     {"s_next", *e.s_next},
                     {"priority", brain.replay.priority(i)}});
  }
  return {{"format", kBrainFormat},
          {"node_id", brain.node_id},
          {"actor", detail::net_to_json(brain.actor, brain.actor_opt)},
          {"critic", detail::net_to_json(brain.critic, brain.critic_opt)},
          {"replay", {{"capacity", brain.replay.capacity()}, {"items", std::move(items)}}}};
}

inline AgentBrain brain_from_json(const nlohmann::json& j) {
  AgentBrain brain;
  try {
    if (j.at("format").get<std::string>() != kBrainFormat)
      throw InputError("unsupported brain checkpoint format \"" + j.at("format").get<std::string>() + "\"");
    brain.node_id = j.at("node_id").get<int>();
    detail::net_from_json(j.at("actor"), brain.actor, brain.actor_opt);
    detail::net_from_json(j.at("critic"), brain.critic, brain.critic_opt);
    brain.replay = PrioritizedReplay(j.at("replay").at("capacity").get<std::size_t>());
    for (const auto& it : j.at("replay").at("items")) {
      Experience e;
      e.s = std::make_shared<const std::vector<double>>(it.at("s").get<std::vector<double>>());
      e.s_next = std::make_shared<const std::vector<double>>(it.at("s_next").get<std::vector<double>>());
      e.action = it.at("a").get<int>();
      e.reward = it.at("r").get<double>();
      brain.replay.push(std::move(e), it.at("priority").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed brain checkpoint: ") + e.what());
  }
  return brain;
}

inline void save_brains(const std::vector<AgentBrain>& brains, const std::string& path) {
  nlohmann::json j = {{"format", kBrainFormat}, {"brains", nlohmann::json::array()}};
  for (const auto& b : brains) j["brains"].push_back(brain_to_json(b));
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path);
  out << j.dump() << '\n';
}

inline std::vector<AgentBrain> load_brains(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed checkpoint: ") + e.what());
  }
  std::vector<AgentBrain> out;
  for (const auto& b : j.at("brains")) out.push_back(brain_from_json(b));
  return out;
}

}  // namespace hrlfs
