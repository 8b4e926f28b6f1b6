#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace exattn::data {

struct TaxonRank {
  std::string family;
  std::string order;
  friend bool operator==(const TaxonRank&, const TaxonRank&) = default;
};

/// Order → family → species hierarchy. Species names double as display names.
class Taxonomy {
 public:
  Taxonomy() = default;
  // Throws std::invalid_argument if a family is assigned to two orders.
  explicit Taxonomy(std::map<std::string, TaxonRank> species);

  bool contains(const std::string& species) const { return species_.count(species) != 0; }
  const TaxonRank& rank(const std::string& species) const;
  const std::string& family_of(const std::string& species) const { return rank(species).family; }
  const std::string& order_of(const std::string& species) const { return rank(species).order; }

  // Sorted species names; position is the class index used by classifiers.
  const std::vector<std::string>& species() const noexcept { return names_; }
  std::size_t class_index(const std::string& species) const;
  std::size_t size() const noexcept { return names_.size(); }

  std::vector<std::string> orders() const;
  std::vector<std::string> families() const;

  const std::map<std::string, TaxonRank>& entries() const noexcept { return species_; }

  friend bool operator==(const Taxonomy& a, const Taxonomy& b) { return a.species_ == b.species_; }

 private:
  std::map<std::string, TaxonRank> species_;
  std::vector<std::string> names_;
};

// {"species": {"name": {"family": ..., "order": ...}, ...}}
Taxonomy load_taxonomy(const std::filesystem::path& path);
void save_taxonomy(const Taxonomy& taxonomy, const std::filesystem::path& path);
std::string taxonomy_to_json(const Taxonomy& taxonomy);
Taxonomy taxonomy_from_json(const std::string& text, const std::string& where = "taxonomy");

}  // namespace exattn::data
