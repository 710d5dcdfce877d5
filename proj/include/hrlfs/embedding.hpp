#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hrlfs/dataset.hpp"
#include "hrlfs/error.hpp"

namespace hrlfs {

inline constexpr const char* kApiKeyEnv = "HRLFS_EMBED_API_KEY";

enum class EmbeddingSource { Remote, Cache, Zero };

inline std::string to_string(EmbeddingSource s) {
  switch (s) {
    case EmbeddingSource::Remote: return "remote";
    case EmbeddingSource::Cache: return "cache";
    case EmbeddingSource::Zero: return "zero";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Transport

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Minimal POST-only HTTP interface so providers can be exercised without a
// network. Implementations throw TransportError on connection failure.
class HttpTransport {
public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& path, const std::string& body) = 0;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{1000};
  // Injectable so tests do not sleep.
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

// POSTs with bounded retries and exponential backoff. Retries on transport
// errors, 429 and 5xx; other non-2xx statuses fail immediately.
inline std::string post_with_retry(HttpTransport& http, const std::string& path, const std::string& body,
                                   const RetryPolicy& retry) {
  auto backoff = retry.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= retry.max_retries; ++attempt) {
    if (attempt > 0) {
      retry.sleep(backoff);
      backoff *= 2;
    }
    HttpResponse resp;
    try {
      resp = http.post_json(path, body);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    if (resp.status >= 200 && resp.status < 300) return resp.body;
    last_error = "HTTP " + std::to_string(resp.status) + " from " + path + ": " + resp.body.substr(0, 200);
    if (resp.status == 401 || resp.status == 403) {
      throw TransportError(last_error + " (check " + std::string(kApiKeyEnv) + ")");
    }
    if (resp.status != 429 && resp.status < 500) throw TransportError(last_error);
  }
  throw TransportError("request to " + path + " failed after " + std::to_string(retry.max_retries + 1) +
                       " attempts: " + last_error);
}

// ---------------------------------------------------------------------------
// Cache file: { "model": string, "dim": int, "vectors": { name: [float...] } }

struct EmbeddingCache {
  std::string model;
  int dim = 0;
  std::map<std::string, std::vector<double>> vectors;

  bool operator==(const EmbeddingCache&) const = default;
};

inline EmbeddingCache parse_embedding_cache(const std::string& text) {
  EmbeddingCache c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.model = j.at("model").get<std::string>();
    c.dim = j.at("dim").get<int>();
    for (const auto& [name, vec] : j.at("vectors").items()) c.vectors[name] = vec.get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed embedding cache: ") + e.what());
  }
  for (const auto& [name, v] : c.vectors) {
    if (static_cast<int>(v.size()) != c.dim)
      throw InputError("embedding cache entry \"" + name + "\" has length " + std::to_string(v.size()) +
                       ", cache declares dim " + std::to_string(c.dim));
  }
  return c;
}

inline std::optional<EmbeddingCache> load_embedding_cache(const std::string& path) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_embedding_cache(ss.str());
}

inline void save_embedding_cache(const EmbeddingCache& c, const std::string& path) {
  nlohmann::json j;
  j["model"] = c.model;
  j["dim"] = c.dim;
  j["vectors"] = nlohmann::json::object();
  for (const auto& [name, v] : c.vectors) j["vectors"][name] = v;
  std::ofstream out(path);
  if (!out) throw Error("cannot write embedding cache " + path);
  out << j.dump(1) << '\n';
}

// ---------------------------------------------------------------------------
// Providers

enum class ProviderKind { Remote, CacheOnly, Zero };

class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;
  virtual ProviderKind kind() const = 0;
  virtual int dim() const = 0;
  virtual std::string model() const = 0;
  // Embeds texts in order. Only remote providers implement this.
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
  virtual std::size_t calls() const { return 0; }
};

class ZeroEmbeddingProvider final : public EmbeddingProvider {
public:
  explicit ZeroEmbeddingProvider(int dim = 8) : dim_(dim) {
    if (dim < 1) throw InputError("embedding dimension must be positive");
  }
  ProviderKind kind() const override { return ProviderKind::Zero; }
  int dim() const override { return dim_; }
  std::string model() const override { return "zero"; }
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    return std::vector<std::vector<double>>(texts.size(), std::vector<double>(static_cast<std::size_t>(dim_), 0.0));
  }

private:
  int dim_;
};

// Serves only what is already in the cache; misses are errors.
class CacheOnlyProvider final : public EmbeddingProvider {
public:
  CacheOnlyProvider(std::string model, int dim) : model_(std::move(model)), dim_(dim) {}
  ProviderKind kind() const override { return ProviderKind::CacheOnly; }
  int dim() const override { return dim_; }
  std::string model() const override { return model_; }
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    if (texts.empty()) return {};
    throw InputError("cache-only provider cannot embed uncached text \"" + texts.front() + "\"");
  }

private:
  std::string model_;
  int dim_;
};

// OpenAI-compatible POST {base}/embeddings client. Requests are batched.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
public:
  static constexpr std::size_t kMaxBatch = 64;

  RemoteEmbeddingProvider(std::shared_ptr<HttpTransport> http, std::string model, int dim, RetryPolicy retry = {})
      : http_(std::move(http)), model_(std::move(model)), dim_(dim), retry_(std::move(retry)) {}

  ProviderKind kind() const override { return ProviderKind::Remote; }
  int dim() const override { return dim_; }
  std::string model() const override { return model_; }
  std::size_t calls() const override { return calls_; }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += kMaxBatch) {
      const auto end = std::min(texts.size(), start + kMaxBatch);
      nlohmann::json body;
      body["model"] = model_;
      body["input"] = std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                               texts.begin() + static_cast<std::ptrdiff_t>(end));
      ++calls_;
      const auto text = post_with_retry(*http_, "/embeddings", body.dump(), retry_);
      auto batch = parse_response(text, end - start);
      for (auto& v : batch) out.push_back(std::move(v));
    }
    return out;
  }

private:
  std::vector<std::vector<double>> parse_response(const std::string& text, std::size_t expected) const {
    std::vector<std::vector<double>> vecs(expected);
    try {
      const auto j = nlohmann::json::parse(text);
      const auto& data = j.at("data");
      if (data.size() != expected)
        throw TransportError("embedding response has " + std::to_string(data.size()) + " items, expected " +
                             std::to_string(expected));
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t slot = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
        if (slot >= expected) throw TransportError("embedding response index out of range");
        vecs[slot] = data[i].at("embedding").get<std::vector<double>>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed embedding response: ") + e.what());
    }
    for (const auto& v : vecs) {
      if (static_cast<int>(v.size()) != dim_)
        throw InputError("embedding dimension mismatch: model returned " + std::to_string(v.size()) +
                         ", provider declares " + std::to_string(dim_));
    }
    return vecs;
  }

  std::shared_ptr<HttpTransport> http_;
  std::string model_;
  int dim_;
  RetryPolicy retry_;
  std::size_t calls_ = 0;
};

// Reads the bearer token or throws ConfigError naming the variable.
inline std::string api_key_from_env() {
  const char* key = std::getenv(kApiKeyEnv);
  if (key == nullptr || *key == '\0')
    throw ConfigError(std::string("remote provider requires the ") + kApiKeyEnv + " environment variable");
  return key;
}

// ---------------------------------------------------------------------------
// Fetching

inline std::string embedding_text(const std::string& name, const std::optional<std::string>& description) {
  if (!description || description->empty()) return name;
  return name + ": " + *description;
}

struct EmbeddingBatch {
  std::vector<std::vector<double>> vectors;  // raw, provider dimension
  std::vector<EmbeddingSource> sources;
  std::size_t remote_requests = 0;
};

// Raw embeddings for each feature, consulting and extending the cache at
// `cache_path` when given. With no metadata at all, or the zero provider,
// every vector is all-zero.
inline EmbeddingBatch fetch_embeddings(const std::vector<std::string>& feature_names, const FeatureMetadata& metadata,
                                       EmbeddingProvider& provider, const std::optional<std::string>& cache_path = {}) {
  EmbeddingBatch out;
  const std::size_t n = feature_names.size();
  const auto dim = static_cast<std::size_t>(provider.dim());

  if (provider.kind() == ProviderKind::Zero || metadata.empty()) {
    out.vectors.assign(n, std::vector<double>(dim, 0.0));
    out.sources.assign(n, EmbeddingSource::Zero);
    return out;
  }

  EmbeddingCache cache;
  bool have_cache = false;
  if (cache_path) {
    if (auto c = load_embedding_cache(*cache_path)) {
      cache = std::move(*c);
      have_cache = true;
    }
  }
  if (have_cache && cache.dim != provider.dim()) {
    throw InputError("embedding dimension mismatch: cache has dim " + std::to_string(cache.dim) + ", model \"" +
                     provider.model() + "\" declares " + std::to_string(provider.dim()));
  }
  if (!have_cache) {
    cache.model = provider.model();
    cache.dim = provider.dim();
  }

  out.vectors.resize(n);
  out.sources.resize(n);
  std::vector<std::size_t> todo;
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < n; ++i) {
    if (auto it = cache.vectors.find(feature_names[i]); it != cache.vectors.end()) {
      out.vectors[i] = it->second;
      out.sources[i] = EmbeddingSource::Cache;
    } else {
      todo.push_back(i);
      const auto d = metadata.descriptions.find(feature_names[i]);
      texts.push_back(embedding_text(feature_names[i], d == metadata.descriptions.end()
                                                           ? std::nullopt
                                                           : std::optional<std::string>(d->second)));
    }
  }
  if (!todo.empty()) {
    if (provider.kind() == ProviderKind::CacheOnly) {
      std::string names;
      for (std::size_t i : todo) names += (names.empty() ? "" : ", ") + feature_names[i];
      throw InputError("cache-only provider: no cached embedding for " + names);
    }
    const auto before = provider.calls();
    auto vecs = provider.embed(texts);
    out.remote_requests = provider.calls() - before;
    for (std::size_t t = 0; t < todo.size(); ++t) {
      out.vectors[todo[t]] = vecs[t];
      out.sources[todo[t]] = EmbeddingSource::Remote;
      cache.vectors[feature_names[todo[t]]] = std::move(vecs[t]);
    }
    if (cache_path) save_embedding_cache(cache, *cache_path);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Description completion

class ChatProvider {
public:
  virtual ~ChatProvider() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

// POST {base}/chat/completions with a single user message.
class RemoteChatProvider final : public ChatProvider {
public:
  RemoteChatProvider(std::shared_ptr<HttpTransport> http, std::string model, RetryPolicy retry = {})
      : http_(std::move(http)), model_(std::move(model)), retry_(std::move(retry)) {}

  std::string complete(const std::string& prompt) override {
    nlohmann::json body;
    body["model"] = model_;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
    const auto text = post_with_retry(*http_, "/chat/completions", body.dump(), retry_);
    try {
      const auto j = nlohmann::json::parse(text);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed chat response: ") + e.what());
    }
  }

private:
  std::shared_ptr<HttpTransport> http_;
  std::string model_;
  RetryPolicy retry_;
};

inline std::string description_prompt(const FeatureMetadata& md, const std::vector<std::string>& missing) {
  std::ostringstream p;
  p << "You are documenting the columns of a tabular dataset.\n\n";
  p << "Dataset description: " << (md.dataset_description ? *md.dataset_description : "(none)") << "\n\n";
  p << "Features with known descriptions:\n";
  if (md.descriptions.empty()) p << "(none)\n";
  for (const auto& [name, desc] : md.descriptions) p << "- " << name << ": " << desc << '\n';
  p << "\nFeatures without descriptions:\n";
  for (const auto& name : missing) p << "- " << name << '\n';
  p << "\nWrite one short description for each feature without a description. "
       "Answer with a single JSON object mapping each of those feature names to its description, "
       "and nothing else.";
  return p.str();
}

struct CompletionResult {
  FeatureMetadata metadata;
  std::vector<std::string> warnings;
  bool called = false;
};

namespace detail {

inline std::optional<nlohmann::json> extract_json_object(const std::string& text) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
  try {
    auto j = nlohmann::json::parse(text.substr(open, close - open + 1));
    if (j.is_object()) return j;
  } catch (const nlohmann::json::exception&) {
  }
  return std::nullopt;
}

}  // namespace detail

// Asks the chat model for descriptions of every feature in metadata.missing.
// Existing descriptions are never modified. Unparseable replies leave the
// metadata unchanged and add a warning.
inline CompletionResult complete_descriptions(ChatProvider& chat, const FeatureMetadata& metadata,
                                              const std::vector<std::string>& feature_names) {
  CompletionResult res;
  res.metadata = metadata;
  if (metadata.missing.empty()) return res;

  res.called = true;
  const auto reply = chat.complete(description_prompt(metadata, metadata.missing));
  const auto obj = detail::extract_json_object(reply);
  if (!obj) {
    res.warnings.push_back("could not parse description reply as a JSON object; missing features keep name-only text");
    return res;
  }
  const std::set<std::string> wanted(metadata.missing.begin(), metadata.missing.end());
  for (const auto& [name, value] : obj->items()) {
    if (!wanted.count(name)) {
      res.warnings.push_back("discarding description for unrequested feature \"" + name + "\"");
      continue;
    }
    if (!value.is_string()) {
      res.warnings.push_back("description for \"" + name + "\" is not a string");
      continue;
    }
    res.metadata.descriptions[name] = value.get<std::string>();
  }
  res.metadata.missing.clear();
  for (const auto& name : feature_names) {
    if (!res.metadata.descriptions.count(name)) res.metadata.missing.push_back(name);
  }
  return res;
}

}  // namespace hrlfs
