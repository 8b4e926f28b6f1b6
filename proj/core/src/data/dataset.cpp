#include "exattn/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "exattn/errors.hpp"
#include "json.hpp"

namespace exattn::data {

using nlohmann::json;
namespace fs = std::filesystem;

FeaturePool make_feature_pool(std::string id, std::size_t k_max, num::Tensor features) {
  if (k_max < 1) throw std::invalid_argument("item '" + id + "': k_max must be >= 1");
  if (features.rank() != 2) throw std::invalid_argument("item '" + id + "': features must be a matrix");
  const std::size_t expected = region_count(k_max);
  if (features.rows() != expected) {
    throw std::invalid_argument("item '" + id + "': " + std::to_string(features.rows()) +
                                " region features, expected " + std::to_string(expected) + " for k_max=" +
                                std::to_string(k_max));
  }
  if (!features.all_finite()) throw std::invalid_argument("item '" + id + "': non-finite feature value");
  FeaturePool pool;
  pool.id = std::move(id);
  pool.k_max = k_max;
  pool.features = std::move(features);
  pool.regions = build_region_index(k_max);
  return pool;
}

std::size_t Dataset::feature_dim() const { return items.empty() ? 0 : items.front().pool.dim(); }

std::size_t Dataset::caption_dim() const {
  for (const auto& it : items)
    if (it.caption) return it.caption->vector.size();
  return 0;
}

std::vector<std::string> Dataset::missing_captions() const {
  std::vector<std::string> ids;
  for (const auto& it : items)
    if (!it.caption) ids.push_back(it.id);
  return ids;
}

DatasetPaths DatasetPaths::in_directory(const fs::path& dir) {
  DatasetPaths p;
  p.features = dir / "features.jsonl";
  p.labels = dir / "labels.jsonl";
  p.taxonomy = dir / "taxonomy.json";
  if (fs::exists(dir / "captions.jsonl")) p.captions = dir / "captions.jsonl";
  return p;
}

namespace {

struct Record {
  json value;
  std::string where;  // file:line (byte offset)
};

std::string location(const fs::path& file, std::size_t line, std::size_t offset) {
  return file.string() + ":" + std::to_string(line) + " (byte " + std::to_string(offset) + ")";
}

std::vector<Record> read_jsonl(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError(file.string(), "cannot open file");
  std::vector<Record> out;
  std::string line;
  std::size_t lineno = 0, offset = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t start = offset;
    offset += line.size() + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back({json::parse(line), location(file, lineno, start)});
    } catch (const json::parse_error& e) {
      const std::size_t at = start + (e.byte > 0 ? e.byte - 1 : 0);
      throw FormatError(location(file, lineno, at), "invalid JSON record");
    }
    if (!out.back().value.is_object()) throw FormatError(out.back().where, "record is not a JSON object");
  }
  return out;
}

std::string string_field(const Record& r, const char* key) {
  auto it = r.value.find(key);
  if (it == r.value.end() || !it->is_string()) throw FormatError(r.where, std::string("missing string field \"") + key + "\"");
  return it->get<std::string>();
}

std::size_t count_field(const Record& r, const char* key) {
  auto it = r.value.find(key);
  if (it == r.value.end() || !it->is_number_integer() || it->get<long long>() < 0) {
    throw FormatError(r.where, std::string("missing non-negative integer field \"") + key + "\"");
  }
  return it->get<std::size_t>();
}

std::vector<double> number_array(const Record& r, const json& arr, const std::string& what) {
  if (!arr.is_array()) throw FormatError(r.where, what + " must be an array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw FormatError(r.where, what + " contains a non-numeric value");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw FormatError(r.where, what + " contains a non-finite value");
    out.push_back(x);
  }
  return out;
}

json tensor_rows(const num::Tensor& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const auto row = t.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

}  // namespace

Dataset load_dataset(const DatasetPaths& paths) {
  Dataset ds;
  ds.taxonomy = load_taxonomy(paths.taxonomy);

  std::map<std::string, DatasetItem> items;
  std::size_t dim = 0;
  for (const Record& r : read_jsonl(paths.features)) {
    const std::string id = string_field(r, "id");
    const std::size_t k_max = count_field(r, "k_max");
    const std::size_t d = count_field(r, "d");
    auto feats = r.value.find("features");
    if (feats == r.value.end() || !feats->is_array()) throw FormatError(r.where, "item '" + id + "': missing \"features\"");
    if (k_max < 1) throw FormatError(r.where, "item '" + id + "': k_max must be >= 1");
    if (feats->size() != region_count(k_max)) {
      throw FormatError(r.where, "item '" + id + "': " + std::to_string(feats->size()) + " region rows, expected " +
                                     std::to_string(region_count(k_max)) + " for k_max=" + std::to_string(k_max));
    }
    if (dim == 0) dim = d;
    if (d != dim) {
      throw FormatError(r.where, "item '" + id + "': feature dimension " + std::to_string(d) + " differs from " +
                                     std::to_string(dim));
    }
    std::vector<double> values;
    values.reserve(feats->size() * d);
    for (const auto& row : *feats) {
      auto v = number_array(r, row, "item '" + id + "' feature row");
      if (v.size() != d) throw FormatError(r.where, "item '" + id + "': feature row length " + std::to_string(v.size()) + " != d=" + std::to_string(d));
      values.insert(values.end(), v.begin(), v.end());
    }
    DatasetItem item;
    item.id = id;
    item.pool = make_feature_pool(id, k_max, num::Tensor::matrix(feats->size(), d, std::move(values)));
    if (!items.emplace(id, std::move(item)).second) throw FormatError(r.where, "duplicate item id '" + id + "'");
  }
  if (items.empty()) ds.warnings.push_back(paths.features.string() + ": no feature records; dataset is empty");

  std::set<std::string> labelled;
  for (const Record& r : read_jsonl(paths.labels)) {
    const std::string id = string_field(r, "id");
    const std::string species = string_field(r, "species");
    auto it = items.find(id);
    if (it == items.end()) throw FormatError(r.where, "label for unknown item '" + id + "'");
    if (!ds.taxonomy.contains(species)) throw FormatError(r.where, "item '" + id + "': unknown label '" + species + "'");
    it->second.species = species;
    labelled.insert(id);
  }
  for (const auto& [id, _] : items) {
    if (!labelled.count(id)) throw FormatError(paths.labels.string(), "item '" + id + "' has no label");
  }

  if (!paths.captions.empty()) {
    std::size_t cdim = 0;
    for (const Record& r : read_jsonl(paths.captions)) {
      const std::string id = string_field(r, "id");
      auto emb = r.value.find("embedding");
      if (emb == r.value.end()) throw FormatError(r.where, "item '" + id + "': missing \"embedding\"");
      auto v = number_array(r, *emb, "item '" + id + "' embedding");
      if (v.empty()) throw FormatError(r.where, "item '" + id + "': empty embedding");
      if (cdim == 0) cdim = v.size();
      if (v.size() != cdim) {
        throw FormatError(r.where, "item '" + id + "': caption dimension " + std::to_string(v.size()) + " differs from " +
                                       std::to_string(cdim));
      }
      auto it = items.find(id);
      if (it == items.end()) throw FormatError(r.where, "caption for unknown item '" + id + "'");
      it->second.caption = CaptionEmbedding{id, num::Tensor::vector(std::move(v))};
    }
  }

  ds.items.reserve(items.size());
  for (auto& [_, item] : items) ds.items.push_back(std::move(item));
  return ds;
}

Dataset load_dataset(const fs::path& dir) { return load_dataset(DatasetPaths::in_directory(dir)); }

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream feats(dir / "features.jsonl", std::ios::binary);
  std::ofstream labels(dir / "labels.jsonl", std::ios::binary);
  if (!feats || !labels) throw std::runtime_error("cannot write dataset to " + dir.string());
  std::ofstream captions;
  const bool any_caption = dataset.caption_dim() > 0;
  if (any_caption) {
    captions.open(dir / "captions.jsonl", std::ios::binary);
    if (!captions) throw std::runtime_error("cannot write captions to " + dir.string());
  } else {
    fs::remove(dir / "captions.jsonl");
  }
  for (const auto& item : dataset.items) {
    json f = {{"id", item.id}, {"k_max", item.pool.k_max}, {"d", item.pool.dim()}, {"features", tensor_rows(item.pool.features)}};
    feats << f.dump() << '\n';
    labels << json{{"id", item.id}, {"species", item.species}}.dump() << '\n';
    if (item.caption) {
      const auto v = item.caption->vector.values();
      captions << json{{"id", item.id}, {"embedding", std::vector<double>(v.begin(), v.end())}}.dump() << '\n';
    }
  }
  save_taxonomy(dataset.taxonomy, dir / "taxonomy.json");
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset, double test_fraction) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw std::invalid_argument("train_test_split: fraction must lie in [0,1)");
  std::map<std::string, std::vector<const DatasetItem*>> by_species;
  for (const auto& it : dataset.items) by_species[it.species].push_back(&it);
  std::set<std::string> test_ids;
  for (const auto& [_, members] : by_species) {
    const auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(members.size())));
    for (std::size_t i = members.size() - std::min(n_test, members.size()); i < members.size(); ++i) test_ids.insert(members[i]->id);
  }
  Dataset train, test;
  train.taxonomy = test.taxonomy = dataset.taxonomy;
  for (const auto& it : dataset.items) (test_ids.count(it.id) ? test : train).items.push_back(it);
  return {std::move(train), std::move(test)};
}

}  // namespace exattn::data
