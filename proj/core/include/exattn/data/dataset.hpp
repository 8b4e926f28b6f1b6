#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "exattn/data/regions.hpp"
#include "exattn/data/taxonomy.hpp"
#include "exattn/numerics/tensor.hpp"

namespace exattn::data {

/// Per-region features of one image: row i is the feature of regions[i].
struct FeaturePool {
  std::string id;
  std::size_t k_max = 1;
  num::Tensor features;  // [N, d]
  std::vector<RegionIndex> regions;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
};

// Validates N = sum k^2, finiteness, and fills the region table.
FeaturePool make_feature_pool(std::string id, std::size_t k_max, num::Tensor features);

struct CaptionEmbedding {
  std::string id;
  num::Tensor vector;  // [d_c]
};

struct DatasetItem {
  std::string id;
  FeaturePool pool;
  std::optional<CaptionEmbedding> caption;
  std::string species;
};

struct Dataset {
  std::vector<DatasetItem> items;  // sorted by id
  Taxonomy taxonomy;
  std::vector<std::string> warnings;

  bool empty() const noexcept { return items.empty(); }
  std::size_t feature_dim() const;
  std::size_t caption_dim() const;  // 0 when no item has a caption
  std::vector<std::string> missing_captions() const;
  std::size_t label_of(const DatasetItem& item) const { return taxonomy.class_index(item.species); }
};

struct DatasetPaths {
  std::filesystem::path features;
  std::filesystem::path captions;  // empty path: no captions
  std::filesystem::path labels;
  std::filesystem::path taxonomy;

  // <dir>/features.jsonl, captions.jsonl (if present), labels.jsonl, taxonomy.json
  static DatasetPaths in_directory(const std::filesystem::path& dir);
};

// JSON-lines ingestion. Every malformed record raises FormatError naming the
// file, line and byte offset.
Dataset load_dataset(const DatasetPaths& paths);
Dataset load_dataset(const std::filesystem::path& dir);

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Per species, the last ceil(fraction * n) items (in id order) go to the test split.
std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset, double test_fraction);

}  // namespace exattn::data
