#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "exattn/data/dataset.hpp"
#include "exattn/data/synthetic.hpp"
#include "exattn/numerics/tensor.hpp"
#include "exattn/pipeline/params.hpp"
#include "exattn/pipeline/training.hpp"

namespace fixtures {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "exattn") {
    static std::atomic<unsigned> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline exattn::num::Tensor random_tensor(exattn::num::Tensor::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  exattn::num::Tensor t(std::move(shape));
  std::normal_distribution<double> n(0.0, scale);
  for (auto& v : t.storage()) v = n(rng);
  return t;
}

// Randomizes every parameter so no head starts at a symmetric point.
inline void randomize(exattn::pipeline::PipelineParams& p, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  for (auto* param : p.all_parameters()) param->value() = random_tensor(param->value().shape(), rng, scale);
}

inline exattn::data::SyntheticConfig small_synthetic(std::uint64_t seed = 7) {
  exattn::data::SyntheticConfig c;
  c.num_species = 8;
  c.items_per_species = 12;
  c.k_max = 2;
  c.d = 12;
  c.expert_regions_per_class = 1;
  c.novice_regions_per_class = 1;
  c.seed = seed;
  return c;
}

// Trains every stage in order with the given epoch budget per stage.
inline exattn::pipeline::PipelineParams train_all(const exattn::data::Dataset& train, std::uint64_t seed,
                                                  std::size_t epochs = 0) {
  using namespace exattn::pipeline;
  auto p = PipelineParams::init(train.feature_dim(), train.caption_dim(), train.taxonomy.size(), seed);
  for (Stage s : {Stage::vision, Stage::grounding, Stage::distillation, Stage::posthoc}) {
    auto cfg = default_training_config(s);
    cfg.seed = seed;
    if (epochs) {
      cfg.epochs = epochs;
      cfg.classifier_warmup_epochs = std::min(cfg.classifier_warmup_epochs, epochs / 2);
    }
    train_stage(s, train, p, cfg);
  }
  return p;
}

}  // namespace fixtures
