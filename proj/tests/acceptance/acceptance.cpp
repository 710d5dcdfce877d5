// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Each criterion also has a wall-clock budget.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hrlfs.hpp"
#include "support/naive_ward.hpp"
#include "support/synthetic.hpp"

using namespace hrlfs;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> body;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream o;
  o << std::setprecision(prec) << v;
  return o.str();
}

// 1 -------------------------------------------------------------------------

Outcome activation_complexity() {
  const auto tree = perfect_tree(7);
  const double expect = expected_active(7, 0.5);
  const auto half = simulate_active(tree, 0.5, 20000, 1);
  const auto zero = simulate_active(tree, 0.0, 20000, 2);
  const auto one = simulate_active(tree, 1.0, 20000, 3);
  const bool ok_half = std::abs(half.mean - expect) <= 0.03 * expect;
  const bool ok_zero = zero.mean == 1.0 && expected_active(7, 0.0) == 1.0;
  const bool ok_one = one.mean == 127.0 && expected_active(7, 1.0) == 127.0;
  return {ok_half && ok_zero && ok_one, "p=0.5 mean " + fmt(half.mean) + " vs " + fmt(expect) + "; p=0 " +
                                            fmt(zero.mean) + "; p=1 " + fmt(one.mean)};
}

// 2 -------------------------------------------------------------------------

// 64 Gaussian columns whose cached embeddings sit on an arc at positions
// sum_l bit_l(i) * 4^l, so families of related features nest six levels deep.
Outcome agent_reduction() {
  constexpr std::size_t n = 64;
  const auto dir = fixtures::scratch_dir("acceptance_reduction");
  auto d = fixtures::make_selection_dataset(300, n, {0, 9, 18, 27, 36, 45, 54, 63}, 0.8, 2024);

  FeatureMetadata md;
  md.dataset_description = "synthetic sensor families";
  EmbeddingCache cache;
  cache.model = "fixture";
  cache.dim = 2;
  for (std::size_t i = 0; i < n; ++i) {
    double pos = 0.0;
    for (int l = 0; l < 6; ++l)
      if ((i >> l) & 1U) pos += std::pow(4.0, l);
    const double theta = 0.5 * pos / 1365.0;
    const auto& name = d.table.feature_names[i];
    md.descriptions[name] = "family " + std::to_string(i >> 3) + " member " + std::to_string(i & 7U);
    cache.vectors[name] = {std::cos(theta), std::sin(theta)};
  }
  const auto cache_path = (dir / "embeddings.json").string();
  save_embedding_cache(cache, cache_path);

  RunConfig cfg;
  cfg.explore_epochs = 2000;
  cfg.optimize_epochs = 10;
  cfg.k_max = 1;
  cfg.seed = 5;
  cfg.provider.kind = "cache";
  cfg.provider.model = cache.model;
  cfg.provider.dim = cache.dim;
  cfg.provider.cache_path = cache_path;
  CacheOnlyProvider provider(cache.model, cache.dim);
  const auto r = run(d.table, md, cfg, provider);

  const double nodes = static_cast<double>(2 * n - 1);
  const double expect = expected_active(r.diagnostics.height, 0.5);
  const double mean = r.mean_activated_explore;
  const bool ok = mean <= 0.3 * nodes && std::abs(mean - expect) <= 0.15 * expect;
  return {ok, "tree height " + std::to_string(r.diagnostics.height) + ", explore mean activated " + fmt(mean) +
                  " (" + fmt(100.0 * mean / nodes, 3) + "% of " + fmt(nodes) + "), recurrence " + fmt(expect)};
}

// 3 -------------------------------------------------------------------------

Outcome em_correctness() {
  Rng rng(31);
  std::vector<double> x;
  for (int i = 0; i < 4000; ++i) x.push_back(rng.uniform() < 0.3 ? rng.normal(-2.0, 0.6) : rng.normal(1.5, 0.9));
  const auto fit = fit_gmm(x, 2, 7);
  const auto& g = fit.params;
  const bool rec = g.k() == 2 && std::abs(g.means[0] + 2.0) <= 0.15 && std::abs(g.means[1] - 1.5) <= 0.15 &&
                   std::abs(g.weights[0] - 0.3) <= 0.05 && std::abs(g.weights[1] - 0.7) <= 0.05;

  int monotone = 0;
  for (int t = 0; t < 20; ++t) {
    Rng dr(1000 + static_cast<std::uint64_t>(t));
    const int comps = 1 + static_cast<int>(dr.below(4));
    std::vector<double> mu, sd;
    for (int c = 0; c < comps; ++c) {
      mu.push_back(dr.uniform(-5, 5));
      sd.push_back(dr.uniform(0.2, 2.0));
    }
    std::vector<double> v;
    const std::size_t m = 50 + dr.below(500);
    for (std::size_t i = 0; i < m; ++i) {
      const auto c = dr.below(static_cast<std::uint64_t>(comps));
      v.push_back(dr.normal(mu[c], sd[c]));
    }
    const auto f = fit_gmm(v, 1 + static_cast<int>(dr.below(4)), dr.next_u64());
    bool ok = true;
    for (std::size_t i = 1; i < f.ll_trace.size(); ++i)
      ok = ok && f.ll_trace[i] >= f.ll_trace[i - 1] - 1e-9 * std::abs(f.ll_trace[i - 1]);
    monotone += ok;
  }
  return {rec && monotone == 20, "means (" + fmt(g.means[0]) + ", " + fmt(g.means[1]) + "), weights (" +
                                     fmt(g.weights[0]) + ", " + fmt(g.weights[1]) + "); monotone " +
                                     std::to_string(monotone) + "/20"};
}

// 4 -------------------------------------------------------------------------

Outcome ward_oracle() {
  Rng rng(44);
  int same = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(11);
    const std::size_t dim = 1 + rng.below(6);
    std::vector<std::vector<double>> states(n, std::vector<double>(dim));
    for (auto& s : states)
      for (double& v : s) v = rng.normal();
    const auto fast = build_hierarchy(states).merges;
    const auto slow = fixtures::naive_ward_merges(states);
    bool ok = fast.size() == slow.size();
    for (std::size_t i = 0; ok && i < fast.size(); ++i) {
      ok = fast[i].a == slow[i].a && fast[i].b == slow[i].b &&
           std::abs(fast[i].height - slow[i].height) <= 1e-9 * std::max(1.0, std::abs(slow[i].height));
    }
    same += ok;
  }
  return {same == 100, std::to_string(same) + "/100 merge sequences identical"};
}

// 5 -------------------------------------------------------------------------

bool relu_pattern_changes(Mlp& net, const std::vector<double>& x, std::size_t i, double eps) {
  auto pattern = [&] {
    Mlp::Tape tape;
    net.forward(x, tape);
    std::vector<bool> on;
    for (std::size_t l = 1; l + 1 < tape.act.size(); ++l)
      for (double a : tape.act[l]) on.push_back(a > 0.0);
    return on;
  };
  auto p = net.params();
  const double orig = p[i];
  p[i] = orig + eps;
  const auto up = pattern();
  p[i] = orig - eps;
  const auto down = pattern();
  p[i] = orig;
  return up != down;
}

// Relative error ||numeric - analytic|| / (||numeric|| + ||analytic||) over
// every parameter whose ReLU pattern is stable inside the stencil.
double gradient_error(Mlp& net, const std::vector<double>& x, const Loss& loss, std::size_t& skipped) {
  const double eps = 1e-5;
  const auto g = net_gradient(net, x, loss);
  auto params = net.params();
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < net.num_params(); ++i) {
    if (relu_pattern_changes(net, x, i, eps)) {
      ++skipped;
      continue;
    }
    const double orig = params[i];
    params[i] = orig + eps;
    const double up = loss_value(net, x, loss);
    params[i] = orig - eps;
    const double down = loss_value(net, x, loss);
    params[i] = orig;
    const double numeric = (up - down) / (2 * eps);
    diff += (numeric - g.grad[i]) * (numeric - g.grad[i]);
    na += g.grad[i] * g.grad[i];
    nn += numeric * numeric;
  }
  const double denom = std::sqrt(na) + std::sqrt(nn);
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

Outcome gradient_fidelity() {
  Rng rng(55);
  double worst = 0.0;
  std::size_t skipped = 0, nets = 0;
  for (int t = 0; t < 12; ++t) {
    BrainConfig bc;
    bc.input_size = 4 + rng.below(20);
    AgentBrain b(t, bc, rng.next_u64());
    std::vector<double> x(bc.input_size);
    for (double& v : x) v = rng.normal();
    for (int action : {kSelect, kDrop}) {
      const Loss pg{LossKind::PolicyGradient, rng.normal(), action, rng.uniform(0.1, 2.0)};
      worst = std::max(worst, gradient_error(b.actor, x, pg, skipped));
    }
    const Loss se{LossKind::SquaredError, rng.normal(), 0, rng.uniform(0.1, 2.0)};
    worst = std::max(worst, gradient_error(b.critic, x, se, skipped));
    nets += 2;
  }
  return {worst < 1e-4, std::to_string(nets) + " nets, max relative error " + fmt(worst, 3) + ", " +
                            std::to_string(skipped) + " kink-crossing parameters skipped"};
}

// 6 -------------------------------------------------------------------------

Outcome critic_fixed_point() {
  BrainConfig bc;
  bc.input_size = 6;
  AgentBrain b(0, bc, 66);
  const auto s = std::make_shared<const std::vector<double>>(std::vector<double>{0.3, -0.2, 0.5, 0.1, 0.0, 0.7});
  for (int i = 0; i < 64; ++i) remember(b, {s, kSelect, 0.5, s});
  LearnConfig lc;
  lc.gamma = 0.9;
  Rng rng(6);
  int updates = 0;
  double v = 0.0;
  bool converged = false;
  for (; updates < 5000; ++updates) {
    learn(b, sample_batch(b.replay, 32, lc.per_alpha, lc.per_beta, rng), lc);
    v = b.critic.forward(*s);
    if (updates >= 100 && std::abs(v - 5.0) <= 0.2) {
      converged = true;
      ++updates;
      break;
    }
  }
  // Stays in the band once reached.
  for (int extra = 0; converged && extra < 5000 - updates; ++extra)
    learn(b, sample_batch(b.replay, 32, lc.per_alpha, lc.per_beta, rng), lc);
  const double v_end = b.critic.forward(*s);
  const bool ok = converged && std::abs(v_end - 5.0) <= 0.2;
  return {ok, "entered 5.0 +- 0.2 after " + std::to_string(updates) + " updates; V after 5000 = " + fmt(v_end, 6)};
}

// 7 -------------------------------------------------------------------------

Outcome reward_formulas() {
  const bool exact = std::abs(quantity_reward(44, 11, 0.6) - 33.0 / 50.6) <= 1e-9;
  const bool bounds = quantity_reward(44, 0, 0.6) == 1.0 && quantity_reward(44, 44, 0.6) == 0.0;
  Rng rng(77);
  int within = 0;
  for (int t = 0; t < 1000; ++t) {
    const double rp = rng.uniform(-1, 1), rq = rng.uniform(0, 1), a = rng.uniform();
    const double r = combined_reward(rp, rq, a);
    within += r >= std::min(rp, rq) - 1e-12 && r <= std::max(rp, rq) + 1e-12;
  }
  return {exact && bounds && within == 1000,
          "q(44,11,0.6) = " + fmt(quantity_reward(44, 11, 0.6), 12) + "; convex bound " + std::to_string(within) +
              "/1000"};
}

// 8 -------------------------------------------------------------------------

Outcome metric_identities() {
  Rng rng(88);
  int equal = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = 1 + rng.below(50);
    const auto c = 2 + rng.below(5);
    std::vector<double> y(m), yhat(m);
    for (std::size_t i = 0; i < m; ++i) {
      y[i] = static_cast<double>(rng.below(c));
      yhat[i] = static_cast<double>(rng.below(c));
    }
    equal += std::abs(f1_micro(y, yhat) - accuracy(y, yhat)) <= 1e-12;
  }
  const std::vector<double> y{1, 2, 3}, off{2, 3, 4}, mean(3, 2.0);
  const double hand = one_minus_rae(y, off), perfect = one_minus_rae(y, y), at_mean = one_minus_rae(y, mean);
  const bool ok = equal == 1000 && std::abs(hand + 0.5) <= 1e-12 && perfect == 1.0 && std::abs(at_mean) <= 1e-12;
  return {ok, "f1_micro = accuracy " + std::to_string(equal) + "/1000; 1-RAE " + fmt(hand) + ", " + fmt(perfect) +
                  ", " + fmt(at_mean)};
}

// 9 -------------------------------------------------------------------------

struct QualityRun {
  bool pass = false;
  std::string line;
  double seconds = 0.0;
};

QualityRun quality_run(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::size_t> informative{1, 5, 9, 13, 17};
  const auto d = fixtures::make_selection_dataset(300, 20, informative, 0.6, 9000 + seed);
  RunConfig cfg;
  cfg.explore_epochs = 50;
  cfg.optimize_epochs = 50;
  cfg.alpha = 0.4;
  cfg.lambda = 0.6;
  cfg.seed = seed;
  ZeroEmbeddingProvider provider;
  const auto r = run(d.table, empty_metadata(d.table.feature_names), cfg, provider);

  const auto split = split_table(normalize_columns(d.table), cfg.holdout_fraction, cfg.seed);
  EvalCache cache;
  const double full = evaluate_subset(split, Mask(20, true), EvalConfig{cfg.forest, MetricKind::F1Micro}, cache, seed);

  int inf = 0, noise = 0;
  if (r.best_mask) {
    for (std::size_t j = 0; j < 20; ++j) {
      if (!(*r.best_mask)[j]) continue;
      (std::find(informative.begin(), informative.end(), j) != informative.end() ? inf : noise) += 1;
    }
  }
  QualityRun q;
  q.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  q.pass = inf >= 4 && noise <= 8 && r.best_metric >= full - 0.02 && q.seconds < 120.0;
  q.line = "seed " + std::to_string(seed) + ": informative " + std::to_string(inf) + "/5, noise " +
           std::to_string(noise) + ", best F1 " + fmt(r.best_metric) + " vs full " + fmt(full) + ", " +
           fmt(q.seconds, 3) + " s";
  return q;
}

Outcome selection_quality() {
  int passing = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto q = quality_run(seed);
    passing += q.pass;
    detail += (detail.empty() ? "" : "; ") + q.line + (q.pass ? " [ok]" : " [miss]");
  }
  return {passing >= 2, std::to_string(passing) + "/3 runs meet the bar: " + detail};
}

// 10 ------------------------------------------------------------------------

Outcome structural_diagnostics() {
  constexpr std::size_t n = 64;
  const int target = static_cast<int>(std::ceil(std::log2(static_cast<double>(n) + 1.0))) + 1;
  int balanced = 0, near_height = 0;
  int h_min = 1 << 20, h_max = 0;
  double b_max = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    // Hybrid states for global k = 2: 4k = 8 coordinates each.
    const auto tree = build_hierarchy(fixtures::uniform_states(n, 8, 100 + seed));
    const auto dg = diagnostics(tree);
    balanced += std::abs(dg.balance_factor) < 1.0;
    near_height += std::abs(dg.height - target) <= 2;
    h_min = std::min(h_min, dg.height);
    h_max = std::max(h_max, dg.height);
    b_max = std::max(b_max, std::abs(dg.balance_factor));
  }
  const bool ok = balanced >= 40 && near_height >= 40;
  return {ok, "|balance| < 1 in " + std::to_string(balanced) + "/50 (max " + fmt(b_max, 3) + "); height within 2 of " +
                  std::to_string(target) + " in " + std::to_string(near_height) + "/50 (range " +
                  std::to_string(h_min) + ".." + std::to_string(h_max) + ")"};
}

// 11 ------------------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = "'" + std::string(HRLFS_CLI_PATH) + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const auto dir = fixtures::scratch_dir("acceptance_determinism");
  const auto d = fixtures::make_selection_dataset(200, 10, {0, 3, 7}, 0.8, 11);
  save_table(d.table, (dir / "data.csv").string());
  const std::string base = "select --data '" + (dir / "data.csv").string() +
                           "' --label y --explore-epochs 40 --optimize-epochs 40 --seed 42 --out ";
  const int a = run_cli(base + "'" + (dir / "a.json").string() + "'");
  const int b = run_cli(base + "'" + (dir / "b.json").string() + "'");
  const auto ja = fixtures::read_file(dir / "a.json"), jb = fixtures::read_file(dir / "b.json");
  const bool ok = a == 0 && b == 0 && !ja.empty() && ja == jb;
  return {ok, "exit codes " + std::to_string(a) + "/" + std::to_string(b) + ", " + std::to_string(ja.size()) +
                  " bytes, " + (ja == jb ? "identical" : "different")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "activation complexity", 1.0, activation_complexity},
      {2, "agent reduction", 300.0, agent_reduction},
      {3, "EM correctness", 10.0, em_correctness},
      {4, "Ward oracle equivalence", 10.0, ward_oracle},
      {5, "gradient fidelity", 5.0, gradient_fidelity},
      {6, "critic fixed point", 10.0, critic_fixed_point},
      {7, "reward formulas", 1.0, reward_formulas},
      {8, "metric identities", 1.0, metric_identities},
      {9, "selection quality", 360.0, selection_quality},
      {10, "structural diagnostics", 30.0, structural_diagnostics},
      {11, "determinism", 120.0, determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.body();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = out.pass && in_time;
    failures += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << "  [" << std::setw(2) << c.id << "] " << c.name << " | " << out.detail
              << " | " << fmt(secs, 3) << " s (limit " << fmt(c.budget_seconds) << " s)"
              << (in_time ? "" : " OVER TIME") << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed") << '\n';
  return failures == 0 ? 0 : 1;
}
