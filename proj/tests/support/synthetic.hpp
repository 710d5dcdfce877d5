#pragma once

// Test-only data generators and helpers.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "hrlfs/dataset.hpp"
#include "hrlfs/random.hpp"

namespace hrlfs::fixtures {

// Binary classification set: informative features are N(+-shift, 1) by
// class, the rest are N(0, 1) noise.
struct SelectionDataset {
  FeatureTable table;
  std::vector<std::size_t> informative;
};

inline SelectionDataset make_selection_dataset(std::size_t rows, std::size_t n_features,
                                               std::vector<std::size_t> informative, double shift,
                                               std::uint64_t seed) {
  Rng rng(seed);
  SelectionDataset d;
  d.informative = informative;
  auto& t = d.table;
  t.task_kind = TaskKind::BinaryClassification;
  t.num_classes = 2;
  t.label_name = "y";
  t.columns.assign(n_features, {});
  for (std::size_t j = 0; j < n_features; ++j) {
    const bool inf = std::find(informative.begin(), informative.end(), j) != informative.end();
    t.feature_names.push_back((inf ? "inf_" : "noise_") + std::to_string(j));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double y = static_cast<double>(r % 2);
    t.labels.push_back(y);
    for (std::size_t j = 0; j < n_features; ++j) {
      const bool inf = std::find(informative.begin(), informative.end(), j) != informative.end();
      t.columns[j].push_back(inf ? rng.normal((2.0 * y - 1.0) * shift, 1.0) : rng.normal());
    }
  }
  return d;
}

inline std::vector<std::vector<double>> uniform_states(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (auto& v : out)
    for (double& x : v) x = rng.uniform();
  return out;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("hrlfs_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace hrlfs::fixtures
