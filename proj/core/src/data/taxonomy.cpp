#include "exattn/data/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "exattn/errors.hpp"
#include "json.hpp"

namespace exattn::data {

using nlohmann::json;

Taxonomy::Taxonomy(std::map<std::string, TaxonRank> species) : species_(std::move(species)) {
  std::map<std::string, std::string> family_order;
  for (const auto& [name, rank] : species_) {
    auto [it, inserted] = family_order.emplace(rank.family, rank.order);
    if (!inserted && it->second != rank.order) {
      throw std::invalid_argument("taxonomy: family '" + rank.family + "' belongs to orders '" + it->second +
                                  "' and '" + rank.order + "'");
    }
    names_.push_back(name);
  }
}

const TaxonRank& Taxonomy::rank(const std::string& species) const {
  auto it = species_.find(species);
  if (it == species_.end()) throw std::invalid_argument("taxonomy: unknown species '" + species + "'");
  return it->second;
}

std::size_t Taxonomy::class_index(const std::string& species) const {
  auto it = std::lower_bound(names_.begin(), names_.end(), species);
  if (it == names_.end() || *it != species) throw std::invalid_argument("taxonomy: unknown species '" + species + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

std::vector<std::string> Taxonomy::orders() const {
  std::set<std::string> s;
  for (const auto& [_, r] : species_) s.insert(r.order);
  return {s.begin(), s.end()};
}

std::vector<std::string> Taxonomy::families() const {
  std::set<std::string> s;
  for (const auto& [_, r] : species_) s.insert(r.family);
  return {s.begin(), s.end()};
}

std::string taxonomy_to_json(const Taxonomy& taxonomy) {
  json species = json::object();
  for (const auto& [name, rank] : taxonomy.entries()) {
    species[name] = {{"family", rank.family}, {"order", rank.order}};
  }
  return json{{"species", species}}.dump(2) + "\n";
}

Taxonomy taxonomy_from_json(const std::string& text, const std::string& where) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(where + " (byte " + std::to_string(e.byte) + ")", "invalid JSON");
  }
  if (!doc.is_object() || !doc.contains("species") || !doc["species"].is_object()) {
    throw FormatError(where, "expected an object with a \"species\" map");
  }
  std::map<std::string, TaxonRank> entries;
  for (const auto& [name, value] : doc["species"].items()) {
    if (!value.is_object() || !value.contains("family") || !value.contains("order") ||
        !value["family"].is_string() || !value["order"].is_string()) {
      throw FormatError(where + " species '" + name + "'", "needs string \"family\" and \"order\"");
    }
    entries.emplace(name, TaxonRank{value["family"].get<std::string>(), value["order"].get<std::string>()});
  }
  try {
    return Taxonomy(std::move(entries));
  } catch (const std::invalid_argument& e) {
    throw FormatError(where, e.what());
  }
}

Taxonomy load_taxonomy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string(), "cannot open taxonomy file");
  std::stringstream ss;
  ss << in.rdbuf();
  return taxonomy_from_json(ss.str(), path.string());
}

void save_taxonomy(const Taxonomy& taxonomy, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << taxonomy_to_json(taxonomy);
}

}  // namespace exattn::data
