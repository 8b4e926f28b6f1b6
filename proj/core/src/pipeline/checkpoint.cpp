#include "exattn/pipeline/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "exattn/errors.hpp"
#include "json.hpp"

namespace exattn::pipeline {

using nlohmann::json;
using num::Tensor;

namespace {

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages{Stage::vision, Stage::grounding, Stage::distillation, Stage::posthoc};
  return stages;
}

json tensor_to_json(const Tensor& t) {
  return json{{"shape", t.shape()}, {"values", t.storage()}};
}

Tensor tensor_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("values")) throw FormatError(where, "tensor needs shape and values");
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  auto values = j.at("values").get<std::vector<double>>();
  if (shape.empty()) {
    if (values.size() != 1) throw FormatError(where, "scalar tensor needs one value");
    return Tensor::scalar(values[0]);
  }
  if (shape.size() == 1) {
    if (values.size() != shape[0]) throw FormatError(where, "value count does not match shape");
    return Tensor::vector(std::move(values));
  }
  if (shape.size() == 2) {
    if (values.size() != shape[0] * shape[1]) throw FormatError(where, "value count does not match shape");
    return Tensor::matrix(shape[0], shape[1], std::move(values));
  }
  throw FormatError(where, "tensor rank above 2");
}

}  // namespace

Checkpoint make_checkpoint(const PipelineParams& params, Stage stage, std::vector<std::string> classes,
                           std::map<std::string, std::string> config) {
  Checkpoint c;
  c.stage = stage;
  c.config = std::move(config);
  c.classes = std::move(classes);
  c.feature_dim = params.feature_dim;
  c.caption_dim = params.caption_dim;
  for (Stage s : all_stages()) {
    if (static_cast<int>(s) > static_cast<int>(stage)) break;
    for (const num::Parameter* p : params.stage_parameters(s)) c.tensors.emplace(p->name(), p->value());
  }
  return c;
}

void validate_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.classes.empty()) throw FormatError("checkpoint", "no classes");
  const auto reference = PipelineParams::init(ckpt.feature_dim, std::max<std::size_t>(ckpt.caption_dim, 1),
                                              ckpt.classes.size(), 0);
  for (Stage s : all_stages()) {
    if (static_cast<int>(s) > static_cast<int>(ckpt.stage)) break;
    if (s == Stage::grounding && ckpt.caption_dim == 0)
      throw FormatError("checkpoint", "stage " + std::string(to_string(ckpt.stage)) + " requires a caption dimension");
    for (const num::Parameter* p : reference.stage_parameters(s)) {
      const auto it = ckpt.tensors.find(p->name());
      if (it == ckpt.tensors.end())
        throw FormatError("checkpoint", std::string(to_string(ckpt.stage)) + " checkpoint lacks prerequisite parameter " +
                                            p->name() + " from " + std::string(to_string(s)));
      if (it->second.same_shape(p->value())) continue;
      throw FormatError("checkpoint", "parameter " + p->name() + " has shape " + num::shape_string(it->second.shape()) +
                                          ", expected " + num::shape_string(p->value().shape()));
    }
  }
}

void apply_checkpoint(const Checkpoint& ckpt, PipelineParams& params) {
  validate_checkpoint(ckpt);
  if (params.feature_dim != ckpt.feature_dim || params.classes != ckpt.classes.size())
    throw std::invalid_argument("checkpoint dimensions do not match the parameter set");
  if (ckpt.stage >= Stage::grounding && params.caption_dim != ckpt.caption_dim)
    throw std::invalid_argument("checkpoint caption dimension does not match the parameter set");
  for (num::Parameter* p : params.all_parameters()) {
    const auto it = ckpt.tensors.find(p->name());
    if (it == ckpt.tensors.end()) continue;
    if (!it->second.same_shape(p->value())) throw std::invalid_argument("checkpoint shape mismatch for " + p->name());
    p->value() = it->second;
  }
}

PipelineParams params_from_checkpoint(const Checkpoint& ckpt, std::uint64_t seed) {
  validate_checkpoint(ckpt);
  auto params = PipelineParams::init(ckpt.feature_dim, std::max<std::size_t>(ckpt.caption_dim, 1), ckpt.classes.size(), seed);
  if (ckpt.caption_dim == 0) params.caption_dim = 0;
  apply_checkpoint(ckpt, params);
  return params;
}

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  json params = json::object();
  for (const auto& [name, t] : ckpt.tensors) params[name] = tensor_to_json(t);
  json j{{"format", kCheckpointFormat},
         {"version", kCheckpointVersion},
         {"stage", std::string(to_string(ckpt.stage))},
         {"config", ckpt.config},
         {"classes", ckpt.classes},
         {"dims", {{"feature", ckpt.feature_dim}, {"caption", ckpt.caption_dim}, {"classes", ckpt.classes.size()}}},
         {"params", params}};
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text, const std::string& where) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(where + " (byte " + std::to_string(e.byte) + ")", "invalid JSON");
  }
  try {
    if (j.value("format", std::string{}) != kCheckpointFormat) throw FormatError(where, "not an exattn checkpoint");
    if (j.value("version", 0) != kCheckpointVersion) throw FormatError(where, "unsupported checkpoint version");
    Checkpoint c;
    try {
      c.stage = stage_from_string(j.at("stage").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw FormatError(where, e.what());
    }
    c.config = j.value("config", std::map<std::string, std::string>{});
    c.classes = j.at("classes").get<std::vector<std::string>>();
    c.feature_dim = j.at("dims").at("feature").get<std::size_t>();
    c.caption_dim = j.at("dims").at("caption").get<std::size_t>();
    for (const auto& [name, t] : j.at("params").items()) c.tensors.emplace(name, tensor_from_json(t, where + ": " + name));
    validate_checkpoint(c);
    return c;
  } catch (const json::exception& e) {
    throw FormatError(where, e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << checkpoint_to_string(ckpt);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str(), path.string());
}

}  // namespace exattn::pipeline
