#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hrlfs/agent.hpp"
#include "hrlfs/dataset.hpp"
#include "hrlfs/embedding.hpp"
#include "hrlfs/error.hpp"
#include "hrlfs/feature_state.hpp"
#include "hrlfs/forest.hpp"
#include "hrlfs/hierarchy.hpp"
#include "hrlfs/mask.hpp"
#include "hrlfs/metrics.hpp"
#include "hrlfs/random.hpp"

namespace hrlfs {

enum class RewardAssign { Split, Broadcast };

inline std::string to_string(RewardAssign r) { return r == RewardAssign::Split ? "split" : "broadcast"; }

inline RewardAssign reward_assign_from_string(std::string_view s) {
  if (s == "split") return RewardAssign::Split;
  if (s == "broadcast") return RewardAssign::Broadcast;
  throw InputError("reward assignment must be split or broadcast, got \"" + std::string(s) + "\"");
}

enum class Phase { Explore, Optimize };

inline std::string to_string(Phase p) { return p == Phase::Explore ? "explore" : "optimize"; }

// Settings echoed into the report; the provider object itself is passed to run().
struct ProviderSettings {
  std::string kind = "zero";
  std::string model = "zero";
  int dim = 8;
  std::string base_url;
  std::string cache_path;
};

struct RunConfig {
  int explore_epochs = 200;
  int optimize_epochs = 200;
  std::size_t replay_capacity = 400;
  std::size_t minibatch = 32;
  double lr_actor = 0.001;
  double lr_critic = 0.01;
  double gamma = 0.9;
  double alpha = 0.4;
  double lambda = 0.6;
  int k_max = 5;
  std::optional<int> level_cap;
  ForestParams forest;
  std::uint64_t seed = 0;
  RewardAssign reward_assign = RewardAssign::Split;
  double holdout_fraction = 0.2;
  double per_alpha = 0.6;
  double per_beta = 0.4;
  std::vector<std::size_t> hidden{64, 8};
  std::optional<MetricKind> metric;  // defaults by task kind
  GmmOptions gmm;
  ProviderSettings provider;
};

inline void validate(const RunConfig& c) {
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) throw InputError("alpha must lie in [0, 1]");
  if (!(c.lambda >= 0.0)) throw InputError("lambda must be >= 0");
  if (c.explore_epochs < 1) throw InputError("explore_epochs must be >= 1");
  if (c.optimize_epochs < 0) throw InputError("optimize_epochs must be >= 0");
  if (c.minibatch < 1) throw InputError("minibatch must be >= 1");
  if (c.k_max < 1) throw InputError("k_max must be >= 1");
  if (c.level_cap && *c.level_cap < 1) throw InputError("level_cap must be positive");
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) throw InputError("gamma must lie in [0, 1)");
}

// ---------------------------------------------------------------------------
// Traversal

struct Traversal {
  Mask mask;
  std::vector<int> activated;  // preorder, left child first
  std::vector<int> actions;    // actions[i] belongs to activated[i]
};

// Top-down select/drop pass. The root is always activated. A node that
// selects activates both children, unless it is a leaf or sits at level
// `level_cap` (root = level 1), in which case its whole member set is
// admitted. A drop excludes the node's members and activates nothing below.
inline Traversal traverse(const AgentTree& tree, const std::function<int(int node_id)>& decide,
                          std::optional<int> level_cap = std::nullopt) {
  Traversal out;
  out.mask.assign(tree.n_leaves(), false);
  std::vector<std::pair<int, int>> stack{{tree.root_id, 1}};
  while (!stack.empty()) {
    const auto [id, level] = stack.back();
    stack.pop_back();
    const int a = decide(id);
    out.activated.push_back(id);
    out.actions.push_back(a);
    if (a != kSelect) continue;
    const auto& nd = tree.node(id);
    if (nd.is_leaf() || (level_cap && level >= *level_cap)) {
      for (int f : nd.members) out.mask[static_cast<std::size_t>(f)] = true;
    } else {
      stack.emplace_back((*nd.children)[1], level + 1);
      stack.emplace_back((*nd.children)[0], level + 1);
    }
  }
  return out;
}

// Each agent acts on the previous global state with an RNG seeded by
// (step_seed, node id), so the result does not depend on visit order.
inline Traversal traverse(const AgentTree& tree, const std::vector<AgentBrain>& brains, std::span<const double> s_prev,
                          ActionMode mode, std::uint64_t step_seed, std::optional<int> level_cap = std::nullopt) {
  if (brains.size() != tree.nodes.size()) throw InputError("traverse needs one brain per tree node");
  return traverse(
      tree,
      [&](int id) {
        Rng rng(derive_seed(step_seed, {static_cast<std::uint64_t>(id)}));
        return act(brains[static_cast<std::size_t>(id)], s_prev, mode, rng);
      },
      level_cap);
}

// ---------------------------------------------------------------------------
// Rewards

// (total - selected) / (total + lambda * selected)
inline double quantity_reward(std::size_t total, std::size_t selected, double lambda) {
  if (selected > total) throw InputError("selected count exceeds total");
  if (total == 0) return 1.0;
  const auto t = static_cast<double>(total), s = static_cast<double>(selected);
  return (t - s) / (t + lambda * s);
}

inline double combined_reward(double r_perf, double r_quantity, double alpha) {
  return alpha * r_perf + (1.0 - alpha) * r_quantity;
}

// Split divides r_total evenly over the activated agents; broadcast gives
// every activated agent the full r_total.
inline std::map<int, double> assign_rewards(double r_total, const std::vector<int>& activated,
                                            RewardAssign mode = RewardAssign::Split) {
  if (activated.empty()) throw InputError("no activated agents to reward");
  const double each = mode == RewardAssign::Split ? r_total / static_cast<double>(activated.size()) : r_total;
  std::map<int, double> out;
  for (int id : activated) out[id] = each;
  return out;
}

// ---------------------------------------------------------------------------
// Subset evaluation

struct EvalConfig {
  ForestParams forest;
  MetricKind metric = MetricKind::F1Micro;
};

// Memo of validation scores keyed by the exact mask.
struct EvalCache {
  std::unordered_map<std::string, double> scores;
  std::size_t hits = 0;
  std::size_t trainings = 0;
};

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Trains a forest on the masked training split and scores it on the
// validation split. The forest seed depends only on (seed, mask), so a cache
// hit returns exactly what a fresh evaluation would. Empty masks score 0.
inline double evaluate_subset(const SplitPair& split, const Mask& mask, const EvalConfig& cfg, EvalCache& cache,
                              std::uint64_t seed) {
  if (mask.size() != split.train.n_features()) throw InputError("mask length does not match feature count");
  if (popcount(mask) == 0) return 0.0;
  const auto key = mask_to_hex(mask);
  if (auto it = cache.scores.find(key); it != cache.scores.end()) {
    ++cache.hits;
    return it->second;
  }
  const auto model = train_forest(split.train, mask, cfg.forest, derive_seed(seed, {0xe7a1ULL, fnv1a(key)}));
  ++cache.trainings;
  const double v = score(model, split.valid, mask, cfg.metric);
  cache.scores.emplace(key, v);
  return v;
}

// ---------------------------------------------------------------------------
// Report

struct StepRecord {
  int step = 0;
  Phase phase = Phase::Explore;
  Mask mask;
  std::size_t n_selected = 0;
  double r_perf = 0.0;
  double r_quantity = 0.0;
  double r_total = 0.0;
  std::vector<int> activated;

  bool operator==(const StepRecord&) const = default;
};

struct RunTiming {
  double total_seconds = 0.0;
  double characterize_seconds = 0.0;
  double loop_seconds = 0.0;
  std::size_t forest_trainings = 0;
  std::size_t cache_hits = 0;
  std::size_t learn_calls = 0;

  bool operator==(const RunTiming&) const = default;
};

struct RunReport {
  nlohmann::json config;
  std::vector<std::string> feature_names;
  AgentTree tree;
  TreeDiagnostics diagnostics;
  int global_k = 1;
  std::string embedding_source;
  std::vector<StepRecord> steps;
  std::optional<Mask> best_mask;
  double best_metric = 0.0;
  RunTiming timing;
  double mean_activated_explore = 0.0;
  double mean_activated_optimize = 0.0;
  std::vector<int> negative_perf_steps;

  std::vector<std::string> best_features() const {
    std::vector<std::string> out;
    if (best_mask) {
      for (std::size_t i = 0; i < best_mask->size(); ++i)
        if ((*best_mask)[i]) out.push_back(feature_names[i]);
    }
    return out;
  }

  // Wall-clock fields are ignored.
  bool operator==(const RunReport& o) const {
    return config == o.config && feature_names == o.feature_names && tree == o.tree &&
           diagnostics.height == o.diagnostics.height && diagnostics.balance_factor == o.diagnostics.balance_factor &&
           global_k == o.global_k && embedding_source == o.embedding_source && steps == o.steps &&
           best_mask == o.best_mask && best_metric == o.best_metric &&
           timing.forest_trainings == o.timing.forest_trainings && timing.cache_hits == o.timing.cache_hits &&
           timing.learn_calls == o.timing.learn_calls &&
           mean_activated_explore == o.mean_activated_explore &&
           mean_activated_optimize == o.mean_activated_optimize && negative_perf_steps == o.negative_perf_steps;
  }
};

inline nlohmann::json config_to_json(const RunConfig& c, TaskKind task) {
  nlohmann::json j;
  j["explore_epochs"] = c.explore_epochs;
  j["optimize_epochs"] = c.optimize_epochs;
  j["replay_capacity"] = c.replay_capacity;
  j["minibatch"] = c.minibatch;
  j["lr_actor"] = c.lr_actor;
  j["lr_critic"] = c.lr_critic;
  j["gamma"] = c.gamma;
  j["alpha"] = c.alpha;
  j["lambda"] = c.lambda;
  j["k_max"] = c.k_max;
  j["level_cap"] = c.level_cap ? nlohmann::json(*c.level_cap) : nlohmann::json();
  j["forest"] = {{"n_trees", c.forest.n_trees}, {"max_depth", c.forest.max_depth}, {"min_leaf", c.forest.min_leaf}};
  j["seed"] = c.seed;
  j["reward_assign"] = to_string(c.reward_assign);
  j["holdout_fraction"] = c.holdout_fraction;
  j["per_alpha"] = c.per_alpha;
  j["per_beta"] = c.per_beta;
  j["hidden"] = c.hidden;
  j["metric"] = to_string(c.metric.value_or(default_metric(task)));
  j["task"] = to_string(task);
  j["gmm"] = {{"tol", c.gmm.tol}, {"max_iter", c.gmm.max_iter}, {"sigma_floor", c.gmm.sigma_floor}};
  j["param_layout"] = kParamLayout;
  j["provider"] = {{"kind", c.provider.kind},
                   {"model", c.provider.model},
                   {"dim", c.provider.dim},
                   {"base_url", c.provider.base_url},
                   {"cache", c.provider.cache_path}};
  return j;
}

inline nlohmann::json report_to_json(const RunReport& r, bool include_wall_clock = false) {
  nlohmann::json j;
  j["config"] = r.config;
  j["features"] = r.feature_names;
  j["global_k"] = r.global_k;
  j["embedding_source"] = r.embedding_source;
  j["tree"] = tree_to_json(r.tree);
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : r.steps) {
    steps.push_back({{"step", s.step},
                     {"phase", to_string(s.phase)},
                     {"mask_hex", mask_to_hex(s.mask)},
                     {"n_selected", s.n_selected},
                     {"r_perf", s.r_perf},
                     {"r_quantity", s.r_quantity},
                     {"r_total", s.r_total},
                     {"activated", s.activated}});
  }
  j["steps"] = std::move(steps);
  if (r.best_mask) {
    j["best"] = {{"mask_hex", mask_to_hex(*r.best_mask)}, {"features", r.best_features()}, {"metric", r.best_metric}};
  } else {
    j["best"] = nullptr;
  }
  nlohmann::json timing = {{"forest_trainings", r.timing.forest_trainings},
                           {"cache_hits", r.timing.cache_hits},
                           {"learn_calls", r.timing.learn_calls}};
  if (include_wall_clock) {
    timing["total_seconds"] = r.timing.total_seconds;
    timing["characterize_seconds"] = r.timing.characterize_seconds;
    timing["loop_seconds"] = r.timing.loop_seconds;
  }
  j["timing"] = std::move(timing);
  j["mean_activated"] = {{"explore", r.mean_activated_explore}, {"optimize", r.mean_activated_optimize}};
  j["negative_perf_steps"] = r.negative_perf_steps;
  return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  try {
    r.config = j.at("config");
    r.feature_names = j.at("features").get<std::vector<std::string>>();
    r.global_k = j.at("global_k").get<int>();
    r.embedding_source = j.at("embedding_source").get<std::string>();
    r.tree = tree_from_json(j.at("tree"));
    r.diagnostics = diagnostics(r.tree);
    const std::size_t n = r.feature_names.size();
    for (const auto& js : j.at("steps")) {
      StepRecord s;
      s.step = js.at("step").get<int>();
      s.phase = js.at("phase").get<std::string>() == "explore" ? Phase::Explore : Phase::Optimize;
      s.mask = mask_from_hex(js.at("mask_hex").get<std::string>(), n);
      s.n_selected = js.at("n_selected").get<std::size_t>();
      s.r_perf = js.at("r_perf").get<double>();
      s.r_quantity = js.at("r_quantity").get<double>();
      s.r_total = js.at("r_total").get<double>();
      s.activated = js.at("activated").get<std::vector<int>>();
      r.steps.push_back(std::move(s));
    }
    if (!j.at("best").is_null()) {
      r.best_mask = mask_from_hex(j["best"].at("mask_hex").get<std::string>(), n);
      r.best_metric = j["best"].at("metric").get<double>();
    }
    const auto& t = j.at("timing");
    r.timing.forest_trainings = t.at("forest_trainings").get<std::size_t>();
    r.timing.cache_hits = t.at("cache_hits").get<std::size_t>();
    r.timing.learn_calls = t.at("learn_calls").get<std::size_t>();
    r.timing.total_seconds = t.value("total_seconds", 0.0);
    r.timing.characterize_seconds = t.value("characterize_seconds", 0.0);
    r.timing.loop_seconds = t.value("loop_seconds", 0.0);
    r.mean_activated_explore = j.at("mean_activated").at("explore").get<double>();
    r.mean_activated_optimize = j.at("mean_activated").at("optimize").get<double>();
    r.negative_perf_steps = j.at("negative_perf_steps").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed run report: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Run

// Optional hooks for callers that want to watch or keep the agents.
struct RunObserver {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const std::vector<AgentBrain>&)> on_finish;
};

namespace detail {

inline std::string summarize_sources(const std::vector<SemanticEmbedding>& embs) {
  std::map<std::string, int> count;
  for (const auto& e : embs) ++count[to_string(e.source)];
  if (count.size() == 1) return count.begin()->first;
  return "mixed";
}

}  // namespace detail

// Full selection run: characterize features, build the agent tree, then
// explore (uniform-random actions, experiences only) and optimize (sampled
// actions, one learn call per activated agent with enough memory).
inline RunReport run(const FeatureTable& table, const FeatureMetadata& metadata, const RunConfig& cfg,
                     EmbeddingProvider& provider, const RunObserver& observer = {}) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  validate(table);
  validate(cfg);
  const MetricKind metric = cfg.metric.value_or(default_metric(table.task_kind));
  if (!metric_supports(metric, table.task_kind))
    throw InputError("metric " + to_string(metric) + " does not apply to " + to_string(table.task_kind));

  RunReport report;
  report.config = config_to_json(cfg, table.task_kind);
  report.feature_names = table.feature_names;

  const FeatureTable normalized = normalize_columns(table);
  const SplitPair split = split_table(normalized, cfg.holdout_fraction, cfg.seed);

  CharacterizeOptions copt;
  copt.k_max = cfg.k_max;
  copt.seed = cfg.seed;
  copt.gmm = cfg.gmm;
  if (!cfg.provider.cache_path.empty()) copt.embed_cache = cfg.provider.cache_path;
  const auto fc = characterize_features(normalized, metadata, provider, copt);
  report.global_k = fc.global_k;
  report.embedding_source = detail::summarize_sources(fc.embeddings);

  report.tree = build_hierarchy(fc.hybrid_vectors());
  report.diagnostics = diagnostics(report.tree);
  const auto t1 = clock::now();

  const auto states = fc.compressed_states();
  const std::size_t n = table.n_features();
  BrainConfig bcfg;
  bcfg.input_size = n * (static_cast<std::size_t>(fc.global_k) + 2);
  bcfg.hidden = cfg.hidden;
  bcfg.replay_capacity = cfg.replay_capacity;
  std::vector<AgentBrain> brains;
  brains.reserve(report.tree.nodes.size());
  for (const auto& nd : report.tree.nodes)
    brains.emplace_back(nd.id, bcfg, derive_seed(cfg.seed, {0xb2a1ULL, static_cast<std::uint64_t>(nd.id)}));

  EvalCache cache;
  const EvalConfig ecfg{cfg.forest, metric};
  const LearnConfig lcfg{cfg.gamma, cfg.lr_actor, cfg.lr_critic, cfg.per_alpha, cfg.per_beta};

  auto s_prev = std::make_shared<const std::vector<double>>(global_state(states, Mask(n, true)));
  double act_sum[2] = {0.0, 0.0};
  int act_steps[2] = {0, 0};
  const int total_steps = cfg.explore_epochs + cfg.optimize_epochs;

  for (int step = 0; step < total_steps; ++step) {
    const Phase phase = step < cfg.explore_epochs ? Phase::Explore : Phase::Optimize;
    const ActionMode mode = phase == Phase::Explore ? ActionMode::UniformRandom : ActionMode::Sample;
    const auto step_u = static_cast<std::uint64_t>(step);

    auto trav = traverse(report.tree, brains, *s_prev, mode, derive_seed(cfg.seed, {0x57e9ULL, step_u}),
                         cfg.level_cap);
    StepRecord rec;
    rec.step = step;
    rec.phase = phase;
    rec.n_selected = popcount(trav.mask);
    try {
      rec.r_perf = evaluate_subset(split, trav.mask, ecfg, cache, cfg.seed);
    } catch (const Error& e) {
      throw Error("step " + std::to_string(step) + ": " + e.what());
    }
    rec.r_quantity = quantity_reward(n, rec.n_selected, cfg.lambda);
    rec.r_total = combined_reward(rec.r_perf, rec.r_quantity, cfg.alpha);
    const auto rewards = assign_rewards(rec.r_total, trav.activated, cfg.reward_assign);

    auto s_next = std::make_shared<const std::vector<double>>(global_state(states, trav.mask));
    for (std::size_t i = 0; i < trav.activated.size(); ++i) {
      const int id = trav.activated[i];
      remember(brains[static_cast<std::size_t>(id)], {s_prev, trav.actions[i], rewards.at(id), s_next});
    }
    if (phase == Phase::Optimize) {
      for (int id : trav.activated) {
        auto& brain = brains[static_cast<std::size_t>(id)];
        if (brain.replay.size() < cfg.minibatch) continue;
        Rng rng(derive_seed(cfg.seed, {0x1ea2ULL, step_u, static_cast<std::uint64_t>(id)}));
        const auto batch = sample_batch(brain.replay, cfg.minibatch, cfg.per_alpha, cfg.per_beta, rng);
        try {
          learn(brain, batch, lcfg);
        } catch (const NumericError& e) {
          throw NumericError("step " + std::to_string(step) + ": " + e.what());
        }
        ++report.timing.learn_calls;
      }
    }

    if (rec.n_selected > 0 && (!report.best_mask || rec.r_perf > report.best_metric)) {
      report.best_mask = trav.mask;
      report.best_metric = rec.r_perf;
    }
    if (rec.r_perf < 0.0) report.negative_perf_steps.push_back(step);
    const int p = phase == Phase::Explore ? 0 : 1;
    act_sum[p] += static_cast<double>(trav.activated.size());
    ++act_steps[p];

    rec.mask = std::move(trav.mask);
    rec.activated = std::move(trav.activated);
    if (observer.on_step) observer.on_step(rec);
    report.steps.push_back(std::move(rec));
    s_prev = std::move(s_next);
  }

  report.mean_activated_explore = act_steps[0] ? act_sum[0] / act_steps[0] : 0.0;
  report.mean_activated_optimize = act_steps[1] ? act_sum[1] / act_steps[1] : 0.0;
  report.timing.forest_trainings = cache.trainings;
  report.timing.cache_hits = cache.hits;
  const auto t2 = clock::now();
  report.timing.characterize_seconds = std::chrono::duration<double>(t1 - t0).count();
  report.timing.loop_seconds = std::chrono::duration<double>(t2 - t1).count();
  report.timing.total_seconds = std::chrono::duration<double>(t2 - t0).count();
  if (observer.on_finish) observer.on_finish(brains);
  return report;
}

}  // namespace hrlfs
