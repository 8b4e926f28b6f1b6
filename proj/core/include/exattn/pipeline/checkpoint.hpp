#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "exattn/numerics/tensor.hpp"
#include "exattn/pipeline/params.hpp"

namespace exattn::pipeline {

inline constexpr const char* kCheckpointFormat = "exattn-checkpoint";
inline constexpr int kCheckpointVersion = 1;

// A checkpoint tagged with stage s holds the parameters of every stage <= s.
struct Checkpoint {
  Stage stage = Stage::vision;
  std::map<std::string, std::string> config;  // echo of the run configuration
  std::vector<std::string> classes;           // class index -> species
  std::size_t feature_dim = 0;
  std::size_t caption_dim = 0;
  std::map<std::string, num::Tensor> tensors;
};

Checkpoint make_checkpoint(const PipelineParams& params, Stage stage, std::vector<std::string> classes,
                           std::map<std::string, std::string> config = {});

// Throws FormatError when any parameter of a stage <= checkpoint.stage is
// missing or has the wrong shape.
void validate_checkpoint(const Checkpoint& ckpt);

// Copies every stored parameter into `params`, which must have matching dims.
void apply_checkpoint(const Checkpoint& ckpt, PipelineParams& params);

// Initializes parameters with `seed` and overlays the checkpoint.
PipelineParams params_from_checkpoint(const Checkpoint& ckpt, std::uint64_t seed);

std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(const std::string& text, const std::string& where = "checkpoint");

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace exattn::pipeline
