#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrlfs/error.hpp"
#include "hrlfs/random.hpp"

namespace hrlfs {

struct AgentNode {
  int id = 0;
  std::optional<std::array<int, 2>> children;  // {left, right}; left has the smaller id
  std::optional<int> feature;                  // set iff leaf
  std::vector<int> members;                    // sorted feature indices
  double merge_height = 0.0;

  bool is_leaf() const { return !children.has_value(); }
  bool operator==(const AgentNode&) const = default;
};

struct MergeStep {
  int a = 0;  // smaller cluster id
  int b = 0;
  double height = 0.0;
  bool operator==(const MergeStep&) const = default;
};

// Binary agent hierarchy. Leaves carry ids 0..n-1 (feature order); the i-th
// merge creates id n+i, so the root is 2n-2 and nodes[id].id == id.
struct AgentTree {
  std::vector<AgentNode> nodes;
  int root_id = 0;
  std::vector<MergeStep> merges;

  std::size_t n_leaves() const { return (nodes.size() + 1) / 2; }
  const AgentNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
  const AgentNode& root() const { return node(root_id); }
  bool operator==(const AgentTree&) const = default;
};

// Ward merge cost between two clusters given their sizes and centroids.
inline double ward_distance(double size_a, std::span<const double> mean_a, double size_b,
                            std::span<const double> mean_b) {
  if (mean_a.size() != mean_b.size()) throw InputError("ward_distance: centroid lengths differ");
  if (size_a < 1.0 || size_b < 1.0) throw InputError("ward_distance: cluster sizes must be >= 1");
  double sq = 0.0;
  for (std::size_t i = 0; i < mean_a.size(); ++i) {
    const double d = mean_a[i] - mean_b[i];
    sq += d * d;
  }
  return size_a * size_b / (size_a + size_b) * sq;
}

namespace detail {

inline void add_internal(AgentTree& tree, int a, int b, double height) {
  AgentNode node;
  node.id = static_cast<int>(tree.nodes.size());
  node.children = std::array<int, 2>{a, b};
  node.merge_height = height;
  const auto& ma = tree.nodes[static_cast<std::size_t>(a)].members;
  const auto& mb = tree.nodes[static_cast<std::size_t>(b)].members;
  node.members.reserve(ma.size() + mb.size());
  std::merge(ma.begin(), ma.end(), mb.begin(), mb.end(), std::back_inserter(node.members));
  tree.merges.push_back({a, b, height});
  tree.nodes.push_back(std::move(node));
}

inline AgentTree leaves_only(std::size_t n) {
  AgentTree tree;
  tree.nodes.reserve(2 * n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    AgentNode leaf;
    leaf.id = static_cast<int>(i);
    leaf.feature = static_cast<int>(i);
    leaf.members = {static_cast<int>(i)};
    tree.nodes.push_back(std::move(leaf));
  }
  return tree;
}

}  // namespace detail

// Ward agglomeration over the given state vectors. Distances are kept in a
// dense matrix updated with the Lance-Williams recurrence; on equal distance
// the lexicographically smallest (id_a, id_b) pair merges first.
inline AgentTree build_hierarchy(const std::vector<std::vector<double>>& states) {
  const std::size_t n = states.size();
  if (n < 2) throw InputError("build_hierarchy needs at least 2 features");
  for (const auto& s : states) {
    if (s.size() != states.front().size()) throw InputError("build_hierarchy: state vectors differ in length");
  }

  AgentTree tree = detail::leaves_only(n);
  const std::size_t total = 2 * n - 1;
  std::vector<double> dist(total * total, 0.0);
  auto d = [&](std::size_t i, std::size_t j) -> double& { return dist[i * total + j]; };
  std::vector<double> size(total, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d(i, j) = d(j, i) = ward_distance(1.0, states[i], 1.0, states[j]);
  }

  std::vector<std::size_t> active(n);
  for (std::size_t i = 0; i < n; ++i) active[i] = i;

  while (active.size() > 1) {
    // active stays sorted by id because new ids are appended.
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (std::size_t x = 0; x < active.size(); ++x) {
      for (std::size_t y = x + 1; y < active.size(); ++y) {
        const double v = d(active[x], active[y]);
        if (v < best) {
          best = v;
          ba = active[x];
          bb = active[y];
        }
      }
    }
    const std::size_t c = tree.nodes.size();
    detail::add_internal(tree, static_cast<int>(ba), static_cast<int>(bb), best);
    size[c] = size[ba] + size[bb];
    for (std::size_t k : active) {
      if (k == ba || k == bb) continue;
      const double nk = size[k];
      const double v = ((size[ba] + nk) * d(k, ba) + (size[bb] + nk) * d(k, bb) - nk * best) / (size[c] + nk);
      d(k, c) = d(c, k) = std::max(v, 0.0);
    }
    std::erase_if(active, [&](std::size_t k) { return k == ba || k == bb; });
    active.push_back(c);
  }
  tree.root_id = static_cast<int>(tree.nodes.size() - 1);
  return tree;
}

// Perfect binary tree with the given number of levels (2^height - 1 nodes).
inline AgentTree perfect_tree(int height) {
  if (height < 1 || height > 24) throw InputError("perfect_tree height must be in [1, 24]");
  const std::size_t leaves = std::size_t{1} << (height - 1);
  AgentTree tree = detail::leaves_only(leaves);
  if (leaves == 1) {
    tree.root_id = 0;
    return tree;
  }
  std::vector<int> level(leaves);
  for (std::size_t i = 0; i < leaves; ++i) level[i] = static_cast<int>(i);
  while (level.size() > 1) {
    std::vector<int> next;
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
      next.push_back(static_cast<int>(tree.nodes.size()));
      detail::add_internal(tree, level[i], level[i + 1], static_cast<double>(tree.merges.size() + 1));
    }
    level = std::move(next);
  }
  tree.root_id = level.front();
  return tree;
}

// Level of every node; the root is at level 1.
inline std::vector<int> node_levels(const AgentTree& tree) {
  std::vector<int> level(tree.nodes.size(), 0);
  std::vector<int> stack{tree.root_id};
  level[static_cast<std::size_t>(tree.root_id)] = 1;
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const auto& nd = tree.node(id);
    if (!nd.children) continue;
    for (int c : *nd.children) {
      level[static_cast<std::size_t>(c)] = level[static_cast<std::size_t>(id)] + 1;
      stack.push_back(c);
    }
  }
  return level;
}

// Subtree height of every node in levels (a leaf has height 1).
inline std::vector<int> subtree_heights(const AgentTree& tree) {
  // Children always have smaller ids than their parent.
  std::vector<int> h(tree.nodes.size(), 1);
  for (const auto& nd : tree.nodes) {
    if (nd.children) {
      const auto [l, r] = *nd.children;
      h[static_cast<std::size_t>(nd.id)] =
          1 + std::max(h[static_cast<std::size_t>(l)], h[static_cast<std::size_t>(r)]);
    }
  }
  return h;
}

struct TreeDiagnostics {
  double balance_factor = 0.0;  // mean over nodes of height(left) - height(right)
  int height = 0;               // levels, root to deepest leaf
  std::size_t node_count = 0;
};

inline TreeDiagnostics diagnostics(const AgentTree& tree) {
  const auto h = subtree_heights(tree);
  TreeDiagnostics out;
  out.node_count = tree.nodes.size();
  out.height = h[static_cast<std::size_t>(tree.root_id)];
  double sum = 0.0;
  for (const auto& nd : tree.nodes) {
    if (nd.children) {
      const auto [l, r] = *nd.children;
      sum += h[static_cast<std::size_t>(l)] - h[static_cast<std::size_t>(r)];
    }
  }
  out.balance_factor = sum / static_cast<double>(tree.nodes.size());
  return out;
}

// Expected number of activated agents on a perfect tree of `height` levels
// when each activated internal agent delegates with probability p:
// E(1) = 1, E(2N+1) = 1 + 2p E(N).
inline double expected_active(int height, double p) {
  if (height < 1) throw InputError("height must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("delegation probability must lie in [0, 1]");
  double e = 1.0;
  for (int i = 1; i < height; ++i) e = 1.0 + 2.0 * p * e;
  return e;
}

struct SimulationResult {
  double mean = 0.0;
  double std_error = 0.0;
};

// Monte-Carlo count of activated agents: the root always counts; each
// counted internal node activates both children with probability p.
inline SimulationResult simulate_active(const AgentTree& tree, double p, std::size_t trials, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("delegation probability must lie in [0, 1]");
  if (trials < 1) throw InputError("trials must be >= 1");
  Rng rng(derive_seed(seed, {0x51a7ULL}));
  double sum = 0.0, sumsq = 0.0;
  std::vector<int> stack;
  for (std::size_t t = 0; t < trials; ++t) {
    std::size_t count = 0;
    stack.assign(1, tree.root_id);
    while (!stack.empty()) {
      const int id = stack.back();
      stack.pop_back();
      ++count;
      const auto& nd = tree.node(id);
      if (nd.children && rng.bernoulli(p)) {
        stack.push_back((*nd.children)[1]);
        stack.push_back((*nd.children)[0]);
      }
    }
    const auto c = static_cast<double>(count);
    sum += c;
    sumsq += c * c;
  }
  const auto n = static_cast<double>(trials);
  SimulationResult r;
  r.mean = sum / n;
  if (trials > 1) {
    const double var = std::max(0.0, (sumsq - n * r.mean * r.mean) / (n - 1.0));
    r.std_error = std::sqrt(var / n);
  }
  return r;
}

inline SimulationResult simulate_active(int height, double p, std::size_t trials, std::uint64_t seed) {
  return simulate_active(perfect_tree(height), p, trials, seed);
}

// ---------------------------------------------------------------------------
// JSON export

inline nlohmann::json tree_to_json(const AgentTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& nd : tree.nodes) {
    nlohmann::json j;
    j["id"] = nd.id;
    j["members"] = nd.members;
    j["children"] = nd.children ? nlohmann::json::array({(*nd.children)[0], (*nd.children)[1]}) : nlohmann::json();
    j["feature"] = nd.feature ? nlohmann::json(*nd.feature) : nlohmann::json();
    j["merge_height"] = nd.merge_height;
    nodes.push_back(std::move(j));
  }
  const auto diag = diagnostics(tree);
  nlohmann::json out;
  out["nodes"] = std::move(nodes);
  out["root"] = tree.root_id;
  out["balance_factor"] = diag.balance_factor;
  out["height"] = diag.height;
  return out;
}

inline AgentTree tree_from_json(const nlohmann::json& j) {
  AgentTree tree;
  try {
    for (const auto& jn : j.at("nodes")) {
      AgentNode nd;
      nd.id = jn.at("id").get<int>();
      nd.members = jn.at("members").get<std::vector<int>>();
      if (!jn.at("children").is_null()) {
        const auto c = jn["children"].get<std::vector<int>>();
        if (c.size() != 2) throw InputError("tree node must have 0 or 2 children");
        nd.children = std::array<int, 2>{c[0], c[1]};
      }
      if (!jn.at("feature").is_null()) nd.feature = jn["feature"].get<int>();
      nd.merge_height = jn.at("merge_height").get<double>();
      if (nd.id != static_cast<int>(tree.nodes.size())) throw InputError("tree node ids must be dense and ordered");
      tree.nodes.push_back(std::move(nd));
    }
    tree.root_id = j.at("root").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed tree JSON: ") + e.what());
  }
  for (const auto& nd : tree.nodes) {
    if (nd.children) tree.merges.push_back({(*nd.children)[0], (*nd.children)[1], nd.merge_height});
  }
  return tree;
}

}  // namespace hrlfs
