#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "exattn/data/dataset.hpp"

namespace exattn::data {

/// Desk-scale stand-in for real feature pools. Each item's pool is Gaussian
/// noise except for a few planted regions: "novice" regions carry the
/// signature of the item's family (the coarse cue a caption describes) and
/// "expert" regions carry the signature of its species (the cue that alone
/// separates sibling species).
struct SyntheticConfig {
  std::size_t num_species = 8;
  std::size_t items_per_species = 40;
  std::size_t k_max = 3;
  std::size_t d = 32;
  std::size_t expert_regions_per_class = 3;
  std::size_t novice_regions_per_class = 3;
  double noise_sigma = 0.1;
  std::uint64_t seed = 7;
  std::size_t species_per_family = 2;
  std::size_t families_per_order = 2;
  double signature_norm = 1.0;
};

struct PlantedCues {
  std::string id;
  std::vector<std::size_t> expert;  // ascending flat indices
  std::vector<std::size_t> novice;
};

struct SyntheticDataset {
  Dataset dataset;
  std::vector<PlantedCues> cues;  // same order as dataset.items
  num::Tensor species_signatures;  // [num_species, d]
  num::Tensor family_signatures;   // [num_families, d]

  const PlantedCues& cues_for(const std::string& id) const;
};

SyntheticDataset generate_synthetic(const SyntheticConfig& config);

void save_cues(const std::vector<PlantedCues>& cues, const std::filesystem::path& path);
std::vector<PlantedCues> load_cues(const std::filesystem::path& path);

}  // namespace exattn::data
