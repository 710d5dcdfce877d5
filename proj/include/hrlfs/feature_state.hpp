#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrlfs/dataset.hpp"
#include "hrlfs/embedding.hpp"
#include "hrlfs/error.hpp"
#include "hrlfs/gmm.hpp"
#include "hrlfs/mask.hpp"
#include "hrlfs/pca.hpp"

namespace hrlfs {

struct SemanticEmbedding {
  std::vector<double> e;
  EmbeddingSource source = EmbeddingSource::Zero;
};

// h = e ⊕ (z_1..z_k, mu_1..mu_k, sigma_1..sigma_k), length 4k.
// s = e ⊕ [sum z*mu] ⊕ [sum z*sigma], length k+2.
struct HybridState {
  std::vector<double> h;
  std::vector<double> s;
};

inline constexpr const char* kParamLayout = "z,mu,sigma";

inline std::vector<double> flatten_params(const GmmParams& g) {
  std::vector<double> out;
  out.reserve(3 * g.k());
  out.insert(out.end(), g.weights.begin(), g.weights.end());
  out.insert(out.end(), g.means.begin(), g.means.end());
  out.insert(out.end(), g.sigmas.begin(), g.sigmas.end());
  return out;
}

// Compressed per-feature observation: embedding followed by the
// weight-averaged mean and standard deviation.
inline std::vector<double> state_vector(std::span<const double> e, const GmmParams& g) {
  std::vector<double> s(e.begin(), e.end());
  double mu = 0.0, sigma = 0.0;
  for (std::size_t j = 0; j < g.k(); ++j) {
    mu += g.weights[j] * g.means[j];
    sigma += g.weights[j] * g.sigmas[j];
  }
  s.push_back(mu);
  s.push_back(sigma);
  return s;
}

inline HybridState make_hybrid_state(const SemanticEmbedding& emb, const GmmParams& g) {
  if (emb.e.size() != g.k())
    throw InputError("embedding length " + std::to_string(emb.e.size()) + " does not match component count " +
                     std::to_string(g.k()));
  HybridState st;
  st.h = emb.e;
  const auto theta = flatten_params(g);
  st.h.insert(st.h.end(), theta.begin(), theta.end());
  st.s = state_vector(emb.e, g);
  return st;
}

// Concatenation of s_i for selected features, zeros for the rest.
inline std::vector<double> global_state(const std::vector<std::vector<double>>& states, const Mask& mask) {
  if (states.size() != mask.size())
    throw InputError("global_state: " + std::to_string(states.size()) + " states but mask of length " +
                     std::to_string(mask.size()));
  std::vector<double> out;
  if (!states.empty()) out.reserve(states.size() * states.front().size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (i > 0 && states[i].size() != states[0].size()) throw InputError("global_state: ragged feature states");
    if (mask[i]) out.insert(out.end(), states[i].begin(), states[i].end());
    else out.insert(out.end(), states[i].size(), 0.0);
  }
  return out;
}

// Everything derived from the data before the agent tree is built.
struct FeatureCharacterization {
  int global_k = 1;
  std::vector<int> per_feature_k;  // BIC optimum per feature
  std::vector<GmmParams> gmms;
  std::vector<bool> gmm_degraded;
  std::vector<SemanticEmbedding> embeddings;
  std::vector<HybridState> states;
  std::size_t remote_requests = 0;

  std::vector<std::vector<double>> hybrid_vectors() const {
    std::vector<std::vector<double>> out;
    for (const auto& s : states) out.push_back(s.h);
    return out;
  }
  std::vector<std::vector<double>> compressed_states() const {
    std::vector<std::vector<double>> out;
    for (const auto& s : states) out.push_back(s.s);
    return out;
  }
};

struct CharacterizeOptions {
  int k_max = 5;
  std::uint64_t seed = 0;
  GmmOptions gmm;
  std::optional<std::string> embed_cache;
};

// BIC search, refit at the global k, embeddings, PCA, and state assembly.
// Columns are z-scored internally.
inline FeatureCharacterization characterize_features(const FeatureTable& table, const FeatureMetadata& metadata,
                                                     EmbeddingProvider& provider, const CharacterizeOptions& opt) {
  FeatureCharacterization fc;
  const std::size_t n = table.n_features();
  std::vector<std::vector<double>> cols;
  cols.reserve(n);
  for (const auto& c : table.columns) cols.push_back(zscore(c));

  for (std::size_t j = 0; j < n; ++j) {
    fc.per_feature_k.push_back(bic_best_k(cols[j], opt.k_max, opt.seed, j, opt.gmm));
    fc.global_k = std::max(fc.global_k, fc.per_feature_k.back());
  }
  const auto k = static_cast<std::size_t>(fc.global_k);
  for (std::size_t j = 0; j < n; ++j) {
    auto fit = fit_gmm(cols[j], fc.global_k, gmm_seed(opt.seed, j, fc.global_k), opt.gmm);
    fc.gmm_degraded.push_back(fit.degraded);
    fc.gmms.push_back(pad_components(std::move(fit.params), k, opt.gmm.sigma_floor));
  }

  auto batch = fetch_embeddings(table.feature_names, metadata, provider, opt.embed_cache);
  fc.remote_requests = batch.remote_requests;
  const auto reduced = reduce_dimensions(batch.vectors, k);
  for (std::size_t j = 0; j < n; ++j) {
    SemanticEmbedding e{reduced[j], batch.sources[j]};
    fc.states.push_back(make_hybrid_state(e, fc.gmms[j]));
    fc.embeddings.push_back(std::move(e));
  }
  return fc;
}

}  // namespace hrlfs
