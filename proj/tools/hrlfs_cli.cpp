// hrlfs command-line tool: select, cluster, simulate, embed.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "hrlfs.hpp"
#include "hrlfs/http_transport.hpp"

namespace {

using namespace hrlfs;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

constexpr const char* kDefaultRemoteModel = "text-embedding-3-small";
constexpr int kDefaultRemoteDim = 1536;
constexpr const char* kDefaultBaseUrl = "https://api.openai.com/v1";

struct DataFlags {
  std::string data;
  std::string label;
  std::string task = "clf";
  std::string metadata;
};

struct ProviderFlags {
  std::string provider = "zero";
  std::string base_url;
  std::string model;
  int embed_dim = 0;
  std::string embed_cache;
};

struct SelectFlags {
  double alpha = 0.4;
  double lambda = 0.6;
  int k_max = 5;
  int explore_epochs = 200;
  int optimize_epochs = 200;
  int level_cap = 0;
  std::string reward_assign = "split";
  std::uint64_t seed = 0;
  std::string out = "report.json";
  std::string svg;
  std::string metric;
  double holdout = 0.2;
  std::size_t minibatch = 32;
  bool timing = false;
  std::string checkpoint;
};

struct ClusterFlags {
  int k_max = 5;
  std::uint64_t seed = 0;
  std::string out = "tree.json";
};

struct SimulateFlags {
  int height = 7;
  double p = 0.5;
  std::size_t trials = 20000;
  std::uint64_t seed = 0;
  bool sweep = false;
  double sweep_step = 0.1;
  std::string out;
};

struct EmbedFlags {
  bool complete_descriptions = false;
  std::string chat_model = "gpt-4o-mini";
  std::string metadata_out;
};

void add_data_flags(CLI::App* app, DataFlags& f) {
  app->add_option("--data", f.data, "CSV dataset with a header row (required)")->check(CLI::ExistingFile);
  app->add_option("--label", f.label, "Name of the label column (required)");
  app->add_option("--task", f.task, "Task type: clf (classification) or reg (regression)")
      ->check(CLI::IsMember({"clf", "reg"}))
      ->capture_default_str();
  app->add_option("--metadata", f.metadata, "Feature metadata JSON; without it every embedding is all-zero")
      ->check(CLI::ExistingFile);
}

void add_provider_flags(CLI::App* app, ProviderFlags& f) {
  app->add_option("--provider", f.provider, "Embedding provider: remote, cache (cache file only) or zero")
      ->check(CLI::IsMember({"remote", "cache", "zero"}))
      ->capture_default_str();
  app->add_option("--base-url", f.base_url,
                  std::string("OpenAI-compatible API base URL for the remote provider (default ") + kDefaultBaseUrl +
                      ")");
  app->add_option("--model", f.model, std::string("Embedding model name (remote default ") + kDefaultRemoteModel + ")");
  app->add_option("--embed-dim", f.embed_dim,
                  "Embedding dimension; 0 means provider default (zero: 8, remote: 1536, cache: from file)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--embed-cache", f.embed_cache, "Embedding cache JSON file (read, and extended by remote fetches)");
}

void add_config_flag(CLI::App* app) {
  app->add_option("--config", "TOML file with flag values; command-line flags take precedence")
      ->check(CLI::ExistingFile);
}

// CLI11 only reads config files attached to the top-level app, so subcommand
// configs are merged here: keys fill options not given on the command line.
void apply_config(CLI::App* sub) {
  const auto* opt = sub->get_option("--config");
  if (opt->count() == 0) return;
  const auto items = CLI::ConfigTOML().from_file(opt->as<std::string>());
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub->get_name()))
      throw CLI::ConversionError("config key " + item.fullname() + " does not belong to " + sub->get_name());
    std::string key = item.name;
    std::replace(key.begin(), key.end(), '_', '-');
    if (key == "config") throw CLI::ConversionError("config files cannot nest");
    auto* target = sub->get_option_no_throw("--" + key);
    if (target == nullptr) throw CLI::ConversionError("unknown config key \"" + item.name + "\"");
    if (target->count() > 0) continue;
    target->add_result(item.inputs);
    target->run_callback();
  }
}

void require_flags(CLI::App* sub, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (sub->get_option(n)->count() == 0) throw CLI::RequiredError(n);
  }
}

FeatureTable read_table(const DataFlags& f) {
  if (f.task == "reg") return load_table(f.data, f.label, TaskKind::Regression);
  auto t = load_table(f.data, f.label, TaskKind::MulticlassClassification);
  if (t.num_classes <= 2) t.task_kind = TaskKind::BinaryClassification;
  return t;
}

FeatureMetadata read_metadata(const DataFlags& f, const FeatureTable& t) {
  return f.metadata.empty() ? empty_metadata(t.feature_names) : load_metadata(f.metadata, t);
}

// Rejects flag combinations that contradict the chosen provider.
void check_provider_flags(const ProviderFlags& f, bool cache_is_output) {
  if (f.provider != "remote" && !f.base_url.empty())
    throw hrlfs::ConfigError("--base-url only applies to --provider remote");
  if (f.provider == "zero" && !f.embed_cache.empty() && !cache_is_output)
    throw hrlfs::ConfigError("--embed-cache conflicts with --provider zero");
  if (f.provider == "zero" && !f.model.empty()) throw hrlfs::ConfigError("--model conflicts with --provider zero");
  if (f.provider == "cache" && f.embed_cache.empty())
    throw hrlfs::ConfigError("--provider cache requires --embed-cache");
}

struct ProviderBundle {
  std::unique_ptr<EmbeddingProvider> provider;
  std::shared_ptr<HttpTransport> http;
  ProviderSettings settings;
};

// With cache_is_output the cache file is a destination (embed), so the zero
// provider may write to it.
ProviderBundle make_provider(const ProviderFlags& f, bool cache_is_output = false) {
  check_provider_flags(f, cache_is_output);
  ProviderBundle b;
  b.settings.kind = f.provider;
  b.settings.cache_path = f.embed_cache;
  if (f.provider == "zero") {
    const int dim = f.embed_dim > 0 ? f.embed_dim : 8;
    b.provider = std::make_unique<ZeroEmbeddingProvider>(dim);
    b.settings.model = "zero";
    b.settings.dim = dim;
  } else if (f.provider == "cache") {
    const auto cache = load_embedding_cache(f.embed_cache);
    if (!cache) throw InputError("embedding cache not found: " + f.embed_cache);
    if (f.embed_dim > 0 && f.embed_dim != cache->dim)
      throw InputError("embedding dimension mismatch: cache has dim " + std::to_string(cache->dim) +
                       ", --embed-dim is " + std::to_string(f.embed_dim));
    const auto model = f.model.empty() ? cache->model : f.model;
    b.provider = std::make_unique<CacheOnlyProvider>(model, cache->dim);
    b.settings.model = model;
    b.settings.dim = cache->dim;
  } else {
    const auto key = api_key_from_env();
    const auto url = f.base_url.empty() ? std::string(kDefaultBaseUrl) : f.base_url;
    const auto model = f.model.empty() ? std::string(kDefaultRemoteModel) : f.model;
    const int dim = f.embed_dim > 0 ? f.embed_dim : kDefaultRemoteDim;
    b.http = std::make_shared<HttplibTransport>(url, key);
    b.provider = std::make_unique<RemoteEmbeddingProvider>(b.http, model, dim);
    b.settings.model = model;
    b.settings.dim = dim;
    b.settings.base_url = url;
  }
  return b;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

// ---------------------------------------------------------------------------

int cmd_select(const DataFlags& df, const ProviderFlags& pf, const SelectFlags& sf) {
  const auto table = read_table(df);
  const auto metadata = read_metadata(df, table);
  auto prov = make_provider(pf);

  RunConfig cfg;
  cfg.alpha = sf.alpha;
  cfg.lambda = sf.lambda;
  cfg.k_max = sf.k_max;
  cfg.explore_epochs = sf.explore_epochs;
  cfg.optimize_epochs = sf.optimize_epochs;
  if (sf.level_cap > 0) cfg.level_cap = sf.level_cap;
  cfg.reward_assign = reward_assign_from_string(sf.reward_assign);
  cfg.seed = sf.seed;
  cfg.holdout_fraction = sf.holdout;
  cfg.minibatch = sf.minibatch;
  if (!sf.metric.empty()) cfg.metric = metric_from_string(sf.metric);
  cfg.provider = prov.settings;

  RunObserver obs;
  if (!sf.checkpoint.empty()) {
    obs.on_finish = [&](const std::vector<AgentBrain>& brains) { save_brains(brains, sf.checkpoint); };
  }
  const auto report = run(table, metadata, cfg, *prov.provider, obs);
  write_text(sf.out, report_to_json(report, sf.timing).dump(2) + "\n");
  if (!sf.svg.empty()) write_text(sf.svg, render_run_svg(report));

  const auto metric = to_string(cfg.metric.value_or(default_metric(table.task_kind)));
  std::cout << "features: " << table.n_features() << ", rows: " << table.n_rows() << ", k: " << report.global_k
            << ", tree height: " << report.diagnostics.height << '\n';
  std::cout << "mean activated agents: explore " << report.mean_activated_explore << ", optimize "
            << report.mean_activated_optimize << " (of " << report.tree.nodes.size() << ")\n";
  if (report.best_mask) {
    const auto names = report.best_features();
    std::cout << "best subset (" << names.size() << " features, " << metric << " " << report.best_metric << "):";
    for (const auto& n : names) std::cout << ' ' << n;
    std::cout << '\n';
  } else {
    std::cout << "no non-empty subset was evaluated\n";
  }
  if (!report.negative_perf_steps.empty())
    std::cerr << "warning: " << report.negative_perf_steps.size() << " steps scored below zero\n";
  std::cout << "report: " << sf.out << '\n';
  return kExitOk;
}

int cmd_cluster(const DataFlags& df, const ProviderFlags& pf, const ClusterFlags& cf) {
  const auto table = read_table(df);
  const auto metadata = read_metadata(df, table);
  auto prov = make_provider(pf);
  CharacterizeOptions opt;
  opt.k_max = cf.k_max;
  opt.seed = cf.seed;
  if (!pf.embed_cache.empty()) opt.embed_cache = pf.embed_cache;
  const auto fc = characterize_features(normalize_columns(table), metadata, *prov.provider, opt);
  const auto tree = build_hierarchy(fc.hybrid_vectors());

  auto j = tree_to_json(tree);
  j["features"] = table.feature_names;
  j["global_k"] = fc.global_k;
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& e : fc.embeddings) sources.push_back(to_string(e.source));
  j["embedding_sources"] = sources;
  j["merges"] = nlohmann::json::array();
  for (const auto& m : tree.merges) j["merges"].push_back({{"a", m.a}, {"b", m.b}, {"height", m.height}});
  write_text(cf.out, j.dump(2) + "\n");

  const auto d = diagnostics(tree);
  std::cout << "nodes: " << tree.nodes.size() << ", height: " << d.height << ", balance factor: " << d.balance_factor
            << ", k: " << fc.global_k << '\n';
  std::cout << "tree: " << cf.out << '\n';
  return kExitOk;
}

std::string simulate_line(int height, double p, std::size_t trials, std::uint64_t seed) {
  const auto mc = simulate_active(height, p, trials, seed);
  std::ostringstream o;
  o << std::setprecision(10) << p << ',' << mc.mean << ',' << mc.std_error << ',' << expected_active(height, p);
  return o.str();
}

int cmd_simulate(const SimulateFlags& f) {
  if (!(f.p >= 0.0 && f.p <= 1.0)) throw InputError("--p must lie in [0, 1]");
  if (f.height < 1 || f.height > 24) throw InputError("--height must lie in [1, 24]");
  if (f.trials < 1) throw InputError("--trials must be positive");
  std::ostringstream out;
  if (f.sweep) {
    if (!(f.sweep_step > 0.0 && f.sweep_step <= 1.0)) throw InputError("--sweep-step must lie in (0, 1]");
    out << "p,monte_carlo_mean,std_error,recurrence\n";
    const int n = static_cast<int>(std::floor(1.0 / f.sweep_step + 1e-9));
    for (int i = 0; i <= n; ++i) {
      const double p = std::min(1.0, i * f.sweep_step);
      out << simulate_line(f.height, p, f.trials, f.seed) << '\n';
    }
    if (n * f.sweep_step < 1.0 - 1e-9) out << simulate_line(f.height, 1.0, f.trials, f.seed) << '\n';
  } else {
    const auto mc = simulate_active(f.height, f.p, f.trials, f.seed);
    out << "height " << f.height << ", p " << f.p << ", trials " << f.trials << '\n';
    out << std::setw(14) << "monte_carlo" << std::setw(14) << "std_error" << std::setw(14) << "recurrence" << '\n';
    out << std::setw(14) << mc.mean << std::setw(14) << mc.std_error << std::setw(14)
        << expected_active(f.height, f.p) << '\n';
  }
  if (f.out.empty()) std::cout << out.str();
  else write_text(f.out, out.str());
  return kExitOk;
}

int cmd_embed(const DataFlags& df, const ProviderFlags& pf, const EmbedFlags& ef) {
  if (pf.embed_cache.empty()) throw hrlfs::ConfigError("embed requires --embed-cache");
  if (pf.provider == "cache") throw hrlfs::ConfigError("embed cannot use --provider cache");
  const auto table = read_table(df);
  auto metadata = read_metadata(df, table);
  auto prov = make_provider(pf, true);

  if (ef.complete_descriptions) {
    if (pf.provider != "remote") throw hrlfs::ConfigError("--complete-descriptions requires --provider remote");
    RemoteChatProvider chat(prov.http, ef.chat_model);
    auto res = complete_descriptions(chat, metadata, table.feature_names);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    metadata = std::move(res.metadata);
    if (!ef.metadata_out.empty()) write_text(ef.metadata_out, metadata_to_json(metadata, table.feature_names).dump(2) + "\n");
  }

  EmbeddingCache cache;
  if (auto c = load_embedding_cache(pf.embed_cache)) {
    cache = std::move(*c);
    if (cache.dim != prov.provider->dim())
      throw InputError("embedding dimension mismatch: cache has dim " + std::to_string(cache.dim) + ", provider " +
                       std::to_string(prov.provider->dim()));
  } else {
    cache.model = prov.provider->model();
    cache.dim = prov.provider->dim();
  }

  std::vector<std::string> names, texts;
  for (const auto& n : table.feature_names) {
    if (cache.vectors.count(n)) continue;
    names.push_back(n);
    const auto d = metadata.descriptions.find(n);
    texts.push_back(embedding_text(n, d == metadata.descriptions.end() ? std::nullopt
                                                                       : std::optional<std::string>(d->second)));
  }
  std::size_t requests = 0;
  if (!names.empty()) {
    const bool zeros = prov.provider->kind() == ProviderKind::Zero || metadata.empty();
    std::vector<std::vector<double>> vecs;
    if (zeros) {
      vecs.assign(names.size(), std::vector<double>(static_cast<std::size_t>(cache.dim), 0.0));
    } else {
      vecs = prov.provider->embed(texts);
      requests = prov.provider->calls();
    }
    for (std::size_t i = 0; i < names.size(); ++i) cache.vectors[names[i]] = std::move(vecs[i]);
    save_embedding_cache(cache, pf.embed_cache);
  }
  std::cout << "cached: " << table.n_features() - names.size() << ", embedded: " << names.size()
            << ", remote_requests: " << requests << '\n';
  std::cout << "cache: " << pf.embed_cache << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical multi-agent reinforcement learning feature selection"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  DataFlags df;
  ProviderFlags pf;
  SelectFlags sf;
  ClusterFlags cf;
  SimulateFlags simf;
  EmbedFlags ef;

  auto* select = app.add_subcommand("select", "Run feature selection and write a run report");
  add_data_flags(select, df);
  add_provider_flags(select, pf);
  select->add_option("--alpha", sf.alpha, "Weight of the performance reward against the quantity reward")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  select->add_option("--lambda", sf.lambda, "Quantity suppression strength")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  select->add_option("--k-max", sf.k_max, "Largest mixture size considered by BIC")
      ->check(CLI::Range(1, 50))
      ->capture_default_str();
  select->add_option("--explore-epochs", sf.explore_epochs, "Steps with uniform-random actions")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  select->add_option("--optimize-epochs", sf.optimize_epochs, "Steps with policy actions and learning")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  select->add_option("--level-cap", sf.level_cap, "Deepest level that delegates (root = 1); 0 disables")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  select->add_option("--reward-assign", sf.reward_assign, "Reward assignment across activated agents")
      ->check(CLI::IsMember({"split", "broadcast"}))
      ->capture_default_str();
  select->add_option("--seed", sf.seed, "Run seed")->capture_default_str();
  select->add_option("--out", sf.out, "Run report JSON path")->capture_default_str();
  select->add_option("--svg", sf.svg, "Optional SVG plot of rewards and activated agents");
  select->add_option("--metric", sf.metric, "f1_micro, accuracy, recall_macro or one_minus_rae (default by task)")
      ->check(CLI::IsMember({"f1_micro", "accuracy", "recall_macro", "one_minus_rae"}));
  select->add_option("--holdout", sf.holdout, "Validation fraction")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  select->add_option("--minibatch", sf.minibatch, "Replay batch size per learn call")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  select->add_flag("--timing", sf.timing, "Include wall-clock timings in the report (makes it non-reproducible)");
  select->add_option("--checkpoint", sf.checkpoint, "Optional path for the trained agents");
  add_config_flag(select);

  auto* cluster = app.add_subcommand("cluster", "Build the agent hierarchy and write it as JSON");
  add_data_flags(cluster, df);
  add_provider_flags(cluster, pf);
  cluster->add_option("--k-max", cf.k_max, "Largest mixture size considered by BIC")
      ->check(CLI::Range(1, 50))
      ->capture_default_str();
  cluster->add_option("--seed", cf.seed, "Seed for the mixture fits")->capture_default_str();
  cluster->add_option("--out", cf.out, "Tree JSON path")->capture_default_str();
  add_config_flag(cluster);

  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo count of activated agents on a perfect tree");
  simulate->add_option("--height", simf.height, "Tree height in levels")->capture_default_str();
  simulate->add_option("--p", simf.p, "Probability that an activated agent selects")->capture_default_str();
  simulate->add_option("--trials", simf.trials, "Monte-Carlo trials")->capture_default_str();
  simulate->add_option("--seed", simf.seed, "Simulation seed")->capture_default_str();
  simulate->add_flag("--sweep", simf.sweep, "Write a CSV over p from 0 to 1 instead of a single value");
  simulate->add_option("--sweep-step", simf.sweep_step, "Step in p for --sweep")->capture_default_str();
  simulate->add_option("--out", simf.out, "Write output to this file instead of stdout");
  add_config_flag(simulate);

  auto* embed = app.add_subcommand("embed", "Fill the embedding cache for a dataset's features");
  add_data_flags(embed, df);
  add_provider_flags(embed, pf);
  embed->add_flag("--complete-descriptions", ef.complete_descriptions,
                  "Ask the chat model for missing feature descriptions first");
  embed->add_option("--chat-model", ef.chat_model, "Chat model for --complete-descriptions")->capture_default_str();
  embed->add_option("--metadata-out", ef.metadata_out, "Write the completed metadata JSON here");
  add_config_flag(embed);

  try {
    app.parse(argc, argv);
    for (auto* sub : {select, cluster, simulate, embed}) {
      if (*sub) apply_config(sub);
    }
    for (auto* sub : {select, cluster, embed}) {
      if (*sub) require_flags(sub, {"--data", "--label"});
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*select) return cmd_select(df, pf, sf);
    if (*cluster) return cmd_cluster(df, pf, cf);
    if (*simulate) return cmd_simulate(simf);
    if (*embed) return cmd_embed(df, pf, ef);
  } catch (const hrlfs::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
