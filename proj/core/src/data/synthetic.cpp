#include "exattn/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "exattn/errors.hpp"
#include "json.hpp"

namespace exattn::data {

using nlohmann::json;

namespace {

std::string padded(std::size_t v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, v);
  return buf;
}

// Unit-norm signatures; orthonormal (Gram-Schmidt) while count <= d.
num::Tensor make_signatures(std::size_t count, std::size_t d, double norm, const num::Tensor* earlier,
                            std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  num::Tensor out({count, d}, 0.0);
  const std::size_t prior = earlier ? earlier->rows() : 0;
  const bool orthogonal = prior + count <= d;
  for (std::size_t s = 0; s < count; ++s) {
    auto row = out.row(s);
    for (double& x : row) x = gauss(rng);
    if (orthogonal) {
      auto project_out = [&](std::span<const double> basis) {
        double dot = 0.0, bn = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          dot += row[j] * basis[j];
          bn += basis[j] * basis[j];
        }
        for (std::size_t j = 0; j < d; ++j) row[j] -= dot / bn * basis[j];
      };
      for (std::size_t p = 0; p < prior; ++p) project_out(earlier->row(p));
      for (std::size_t p = 0; p < s; ++p) project_out(out.row(p));
    }
    double n = 0.0;
    for (double x : row) n += x * x;
    n = std::sqrt(n);
    for (double& x : row) x *= norm / n;
  }
  return out;
}

}  // namespace

const PlantedCues& SyntheticDataset::cues_for(const std::string& id) const {
  for (const auto& c : cues)
    if (c.id == id) return c;
  throw std::invalid_argument("no planted cues for item '" + id + "'");
}

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
  if (cfg.num_species == 0 || cfg.items_per_species == 0) throw std::invalid_argument("generate_synthetic: need at least one species and item");
  if (cfg.k_max < 1) throw std::invalid_argument("generate_synthetic: k_max must be >= 1");
  if (cfg.d < cfg.num_species) throw std::invalid_argument("generate_synthetic: d must be >= num_species");
  if (cfg.species_per_family == 0 || cfg.families_per_order == 0) throw std::invalid_argument("generate_synthetic: hierarchy fan-out must be >= 1");
  if (cfg.noise_sigma < 0.0) throw std::invalid_argument("generate_synthetic: noise_sigma must be >= 0");
  const std::size_t n_regions = region_count(cfg.k_max);
  if (cfg.expert_regions_per_class + cfg.novice_regions_per_class > n_regions) {
    throw std::invalid_argument("generate_synthetic: " + std::to_string(cfg.expert_regions_per_class) + " expert + " +
                                std::to_string(cfg.novice_regions_per_class) + " novice regions cannot be disjoint within " +
                                std::to_string(n_regions) + " regions");
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::size_t n_families = (cfg.num_species + cfg.species_per_family - 1) / cfg.species_per_family;
  SyntheticDataset out;
  out.species_signatures = make_signatures(cfg.num_species, cfg.d, cfg.signature_norm, nullptr, rng);
  out.family_signatures = make_signatures(n_families, cfg.d, cfg.signature_norm, &out.species_signatures, rng);

  std::map<std::string, TaxonRank> taxa;
  std::vector<std::string> species_names(cfg.num_species);
  for (std::size_t s = 0; s < cfg.num_species; ++s) {
    const std::size_t fam = s / cfg.species_per_family;
    const std::size_t ord = fam / cfg.families_per_order;
    species_names[s] = "species_" + padded(s, 2);
    taxa.emplace(species_names[s], TaxonRank{"family_" + padded(fam, 2), "order_" + padded(ord, 2)});
  }
  out.dataset.taxonomy = Taxonomy(std::move(taxa));

  std::vector<std::size_t> slots(n_regions);
  for (std::size_t s = 0; s < cfg.num_species; ++s) {
    const std::size_t fam = s / cfg.species_per_family;
    const auto species_sig = out.species_signatures.row(s);
    const auto family_sig = out.family_signatures.row(fam);
    for (std::size_t i = 0; i < cfg.items_per_species; ++i) {
      const std::string id = "s" + padded(s, 2) + "_" + padded(i, 3);
      num::Tensor feats({n_regions, cfg.d}, 0.0);
      for (double& x : feats.values()) x = cfg.noise_sigma * noise(rng);

      std::iota(slots.begin(), slots.end(), std::size_t{0});
      std::shuffle(slots.begin(), slots.end(), rng);
      PlantedCues cue;
      cue.id = id;
      cue.expert.assign(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(cfg.expert_regions_per_class));
      cue.novice.assign(slots.begin() + static_cast<std::ptrdiff_t>(cfg.expert_regions_per_class),
                        slots.begin() + static_cast<std::ptrdiff_t>(cfg.expert_regions_per_class + cfg.novice_regions_per_class));
      std::sort(cue.expert.begin(), cue.expert.end());
      std::sort(cue.novice.begin(), cue.novice.end());
      for (std::size_t r : cue.expert) {
        auto row = feats.row(r);
        for (std::size_t j = 0; j < cfg.d; ++j) row[j] += species_sig[j];
      }
      for (std::size_t r : cue.novice) {
        auto row = feats.row(r);
        for (std::size_t j = 0; j < cfg.d; ++j) row[j] += family_sig[j];
      }

      // Mean of the planted novice signatures, observed with noise.
      std::vector<double> caption(cfg.d, 0.0);
      if (!cue.novice.empty()) {
        for (std::size_t j = 0; j < cfg.d; ++j) caption[j] = family_sig[j];
      }
      for (double& x : caption) x += cfg.noise_sigma * noise(rng);

      DatasetItem item;
      item.id = id;
      item.species = species_names[s];
      item.pool = make_feature_pool(id, cfg.k_max, std::move(feats));
      item.caption = CaptionEmbedding{id, num::Tensor::vector(std::move(caption))};
      out.dataset.items.push_back(std::move(item));
      out.cues.push_back(std::move(cue));
    }
  }
  return out;
}

void save_cues(const std::vector<PlantedCues>& cues, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& c : cues) out << json{{"id", c.id}, {"expert", c.expert}, {"novice", c.novice}}.dump() << '\n';
}

std::vector<PlantedCues> load_cues(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string(), "cannot open cue file");
  std::vector<PlantedCues> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("expert").get<std::vector<std::size_t>>(),
                     j.at("novice").get<std::vector<std::size_t>>()});
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno), e.what());
    }
  }
  return out;
}

}  // namespace exattn::data
