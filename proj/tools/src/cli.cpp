#include "exattn_tools/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "CLI11.hpp"
#include "exattn/analysis/accuracy.hpp"
#include "exattn/analysis/booster.hpp"
#include "exattn/analysis/highlights.hpp"
#include "exattn/analysis/ranking.hpp"
#include "exattn/data/dataset.hpp"
#include "exattn/data/synthetic.hpp"
#include "exattn/errors.hpp"
#include "exattn/pipeline/checkpoint.hpp"
#include "exattn/pipeline/forward.hpp"
#include "exattn/pipeline/training.hpp"
#include "exattn/study/http_server.hpp"
#include "exattn/study/questionnaire.hpp"
#include "exattn/study/scoring.hpp"
#include "exattn/study/service.hpp"
#include "json.hpp"

namespace exattn::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using pipeline::Stage;

namespace {

// Missing prerequisite or invalid run configuration: exit 1 with the message.
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RunError("cannot write " + path.string());
  out << text;
}

void write_curve(const fs::path& path, const std::vector<double>& curve, const std::string& column = "loss") {
  std::string text = "epoch," + column + "\n";
  for (std::size_t i = 0; i < curve.size(); ++i) text += std::to_string(i) + "," + fmt_double(curve[i]) + "\n";
  write_text(path, text);
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw RunError("missing " + what + ": " + path.string());
}

void require_dataset_dir(const fs::path& dir) {
  require_file(dir / "features.jsonl", "feature file");
  require_file(dir / "labels.jsonl", "label file");
  require_file(dir / "taxonomy.json", "taxonomy file");
}

std::string checkpoint_name(Stage s) { return std::string(pipeline::to_string(s)) + ".json"; }

Stage previous_stage(Stage s) { return static_cast<Stage>(static_cast<int>(s) - 1); }

// Options shared by every subcommand.
struct Common {
  std::string out_dir;
  std::string config;
};

struct Options {
  Common common;
  // gen-synthetic
  data::SyntheticConfig synthetic;
  double test_fraction = 0.25;
  // training
  std::uint64_t seed = 0;
  std::string data_dir;
  std::string checkpoint;
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  double learning_rate = 0.0;
  std::optional<std::size_t> warmup;
  double temperature = 5.0;
  std::string temperature_mode = "logits";
  std::string gamma_mode = "median";
  double gamma = 1.0;
  // analysis / booster
  std::size_t k = analysis::kDefaultHighlightK;
  std::string cues;
  std::string train_dir;
  std::string highlight_source = "auto";
  std::size_t n_top = 1;
  // study
  std::string counts = "90,120,90";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  std::string log_dir;
};

fs::path out_dir(const Options& o) { return o.common.out_dir; }

pipeline::TemperatureMode parse_temperature_mode(const std::string& s) {
  if (s == "logits") return pipeline::TemperatureMode::logits;
  if (s == "features") return pipeline::TemperatureMode::features;
  throw RunError("temperature-mode must be logits or features, got '" + s + "'");
}

pipeline::GammaMode parse_gamma_mode(const std::string& s) {
  if (s == "median") return pipeline::GammaMode::median;
  if (s == "fixed") return pipeline::GammaMode::fixed;
  throw RunError("gamma-mode must be median or fixed, got '" + s + "'");
}

study::DifficultyCounts parse_counts(const std::string& s) {
  std::vector<std::size_t> v;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, ',');) {
    try {
      std::size_t used = 0;
      const long long n = std::stoll(trim(part), &used);
      if (used != trim(part).size() || n < 0) throw std::invalid_argument(part);
      v.push_back(static_cast<std::size_t>(n));
    } catch (const std::exception&) {
      throw RunError("counts must be three non-negative integers easy,medium,hard; got '" + s + "'");
    }
  }
  if (v.size() != 3) throw RunError("counts must be three non-negative integers easy,medium,hard; got '" + s + "'");
  return {v[0], v[1], v[2]};
}

// ---- gen-synthetic ----

int cmd_gen_synthetic(const Options& o, std::ostream& out) {
  const auto syn = data::generate_synthetic(o.synthetic);
  const auto [train, test] = data::train_test_split(syn.dataset, o.test_fraction);
  const fs::path dir = out_dir(o) / "data";
  data::save_dataset(train, dir / "train");
  data::save_dataset(test, dir / "test");
  data::save_cues(syn.cues, dir / "cues.jsonl");
  out << "event=generated items=" << syn.dataset.items.size() << " train=" << train.items.size()
      << " test=" << test.items.size() << " dir=" << dir.string() << "\n";
  return kExitOk;
}

// ---- training ----

std::map<std::string, std::string> stage_echo(Stage stage, const pipeline::TrainingConfig& c, const Options& o) {
  const std::string p = std::string(pipeline::to_string(stage)) + ".";
  std::map<std::string, std::string> m{{p + "seed", std::to_string(c.seed)},
                                       {p + "epochs", std::to_string(c.epochs)},
                                       {p + "batch_size", std::to_string(c.batch_size)},
                                       {p + "learning_rate", fmt_double(c.learning_rate)},
                                       {p + "data", o.data_dir}};
  if (stage == Stage::vision) m[p + "classifier_warmup_epochs"] = std::to_string(c.classifier_warmup_epochs);
  if (stage == Stage::distillation) {
    m[p + "temperature"] = fmt_double(c.temperature);
    m[p + "temperature_mode"] = o.temperature_mode;
  }
  if (stage == Stage::posthoc) {
    m[p + "gamma_mode"] = o.gamma_mode;
    m[p + "gamma"] = fmt_double(c.bandwidth.gamma);
  }
  return m;
}

int cmd_train(Stage stage, const Options& o, std::ostream& out) {
  const fs::path data_dir = o.data_dir;
  const fs::path ckpt_dir = out_dir(o) / "checkpoints";

  std::optional<pipeline::Checkpoint> prior;
  if (stage != Stage::vision) {
    const fs::path prior_path = o.checkpoint.empty() ? ckpt_dir / checkpoint_name(previous_stage(stage)) : fs::path(o.checkpoint);
    require_file(prior_path, "prerequisite checkpoint");
    prior = pipeline::load_checkpoint(prior_path);
    if (prior->stage < previous_stage(stage))
      throw RunError("checkpoint " + prior_path.string() + " is " + std::string(pipeline::to_string(prior->stage)) +
                     "; " + std::string(pipeline::to_string(stage)) + " needs " +
                     std::string(pipeline::to_string(previous_stage(stage))));
  }

  require_dataset_dir(data_dir);
  const auto ds = data::load_dataset(data_dir);
  for (const auto& w : ds.warnings) out << "event=warning message=\"" << w << "\"\n";
  if (ds.empty()) throw RunError("dataset " + data_dir.string() + " is empty");
  const auto& classes = ds.taxonomy.species();

  pipeline::PipelineParams params;
  std::map<std::string, std::string> echo;
  if (!prior) {
    params = pipeline::PipelineParams::init(ds.feature_dim(), std::max<std::size_t>(ds.caption_dim(), 1), classes.size(), o.seed);
    params.caption_dim = ds.caption_dim();
  } else {
    if (prior->classes != classes) throw RunError("checkpoint classes differ from the dataset taxonomy");
    if (prior->feature_dim != ds.feature_dim()) throw RunError("checkpoint feature dimension differs from the dataset");
    auto ckpt = *prior;
    ckpt.stage = std::min(ckpt.stage, previous_stage(stage));
    if (ckpt.stage == Stage::vision) ckpt.caption_dim = ds.caption_dim();
    if (stage >= Stage::grounding && ds.caption_dim() == 0)
      throw RunError(std::string(pipeline::to_string(stage)) + " needs caption embeddings; " + data_dir.string() +
                     " has none");
    params = pipeline::params_from_checkpoint(ckpt, o.seed);
    echo = prior->config;
  }

  auto cfg = pipeline::default_training_config(stage);
  cfg.seed = o.seed;
  if (o.epochs) cfg.epochs = o.epochs;
  if (o.batch_size) cfg.batch_size = o.batch_size;
  if (o.learning_rate > 0.0) cfg.learning_rate = o.learning_rate;
  if (stage == Stage::vision && o.warmup) cfg.classifier_warmup_epochs = *o.warmup;
  cfg.temperature = o.temperature;
  cfg.temperature_mode = parse_temperature_mode(o.temperature_mode);
  cfg.bandwidth = {parse_gamma_mode(o.gamma_mode), o.gamma};
  const std::string tag(pipeline::to_string(stage));
  cfg.on_epoch = [&](std::size_t epoch, double loss) {
    out << "event=epoch stage=" << tag << " epoch=" << epoch << " loss=" << fmt_double(loss) << "\n";
  };

  pipeline::StageReport report;
  try {
    report = pipeline::train_stage(stage, ds, params, cfg);
  } catch (const std::invalid_argument& e) {
    throw RunError(e.what());
  }

  for (auto& [k, v] : stage_echo(stage, cfg, o)) echo[k] = v;
  const auto ckpt = pipeline::make_checkpoint(params, stage, classes, echo);
  const fs::path ckpt_path = ckpt_dir / checkpoint_name(stage);
  pipeline::save_checkpoint(ckpt, ckpt_path);
  const fs::path curve = out_dir(o) / "curves" / (tag + "_loss.csv");
  write_curve(curve, report.loss_curve);
  if (!report.kl_t1_curve.empty()) write_curve(out_dir(o) / "curves" / (tag + "_kl_t1.csv"), report.kl_t1_curve, "kl_t1");
  out << "event=trained stage=" << tag << " initial_loss=" << fmt_double(report.loss_curve.front())
      << " final_loss=" << fmt_double(report.loss_curve.back()) << " checkpoint=" << ckpt_path.string()
      << " curve=" << curve.string() << "\n";
  return kExitOk;
}

pipeline::PipelineParams load_trained(const fs::path& path, Stage at_least) {
  require_file(path, "checkpoint");
  const auto ckpt = pipeline::load_checkpoint(path);
  if (ckpt.stage < at_least)
    throw RunError("checkpoint " + path.string() + " is " + std::string(pipeline::to_string(ckpt.stage)) + "; need " +
                   std::string(pipeline::to_string(at_least)) + " or later");
  return pipeline::params_from_checkpoint(ckpt, 0);
}

fs::path default_checkpoint(const Options& o, Stage s) {
  return o.checkpoint.empty() ? out_dir(o) / "checkpoints" / checkpoint_name(s) : fs::path(o.checkpoint);
}

// ---- analyze ----

int cmd_analyze(const Options& o, std::ostream& out) {
  require_dataset_dir(o.data_dir);
  const fs::path ckpt_path = default_checkpoint(o, Stage::posthoc);
  require_file(ckpt_path, "checkpoint");
  const auto ckpt = pipeline::load_checkpoint(ckpt_path);
  if (ckpt.stage < Stage::distillation) throw RunError("analyze needs a stage3 or posthoc checkpoint");
  const auto params = pipeline::params_from_checkpoint(ckpt, 0);
  const bool has_posthoc = ckpt.stage >= Stage::posthoc;
  const auto ds = data::load_dataset(o.data_dir);
  if (ds.empty()) throw RunError("dataset " + o.data_dir + " is empty");
  if (!ds.missing_captions().empty()) throw RunError("analyze needs caption embeddings for every item");
  if (ds.taxonomy.species() != ckpt.classes) throw RunError("checkpoint classes differ from the dataset taxonomy");
  const std::size_t n = ds.items[0].pool.size();
  if (o.k < 1 || o.k > n) throw RunError("K must lie in [1, " + std::to_string(n) + "]");

  std::vector<pipeline::ItemAttentions> att;
  att.reserve(ds.items.size());
  for (const auto& item : ds.items) att.push_back(pipeline::compute_all_attentions(item, params));

  const fs::path dir = out_dir(o) / "analysis";
  const double count = static_cast<double>(ds.items.size());
  std::string iou = has_posthoc ? "k,novice_delta,novice_expert,expert_delta,delta_posthoc\n" : "k,novice_delta,novice_expert,expert_delta\n";
  json summary = json::object();
  for (std::size_t k = 1; k <= n; ++k) {
    double nd = 0, ne = 0, ed = 0, dp = 0;
    for (const auto& a : att) {
      nd += analysis::iou_top_k(a.novice, a.delta, k);
      ne += analysis::iou_top_k(a.novice, a.expert, k);
      ed += analysis::iou_top_k(a.expert, a.delta, k);
      if (has_posthoc) dp += analysis::iou_top_k(a.delta, a.posthoc, k);
    }
    iou += std::to_string(k) + "," + fmt_double(nd / count) + "," + fmt_double(ne / count) + "," + fmt_double(ed / count);
    if (has_posthoc) iou += "," + fmt_double(dp / count);
    iou += "\n";
    if (k == o.k) {
      summary["iou_novice_delta"] = nd / count;
      summary["iou_novice_expert"] = ne / count;
      summary["iou_expert_delta"] = ed / count;
      if (has_posthoc) summary["iou_delta_posthoc"] = dp / count;
    }
  }
  write_text(dir / "iou.csv", iou);

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.items.size(); ++i) index[ds.items[i].id] = i;
  auto cached = [&](int which) -> analysis::AttentionSource {
    return [&, which](const data::DatasetItem& item) {
      const auto& a = att[index.at(item.id)];
      return which == 0 ? a.novice : which == 1 ? a.delta : which == 2 ? a.expert : a.posthoc;
    };
  };
  std::string acc = has_posthoc ? "k,acc_delta,acc_expert,acc_posthoc\n" : "k,acc_delta,acc_expert\n";
  double acc_1 = 0.0, acc_n = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double ad = analysis::acc_k(ds, cached(0), cached(1), k, params.classifier);
    const double ae = analysis::acc_k(ds, cached(0), cached(2), k, params.classifier);
    acc += std::to_string(k) + "," + fmt_double(ad) + "," + fmt_double(ae);
    if (has_posthoc) acc += "," + fmt_double(analysis::acc_k(ds, cached(0), cached(3), k, params.classifier));
    acc += "\n";
    if (k == 1) acc_1 = ad;
    if (k == n) acc_n = ad;
  }
  write_text(dir / "acc_k.csv", acc);
  summary["k"] = o.k;
  summary["acc_1_delta"] = acc_1;
  summary["acc_n_delta"] = acc_n;
  summary["items"] = ds.items.size();

  if (!o.cues.empty()) {
    require_file(o.cues, "cue file");
    std::map<std::string, data::PlantedCues> cues;
    for (auto& c : data::load_cues(o.cues)) cues.emplace(c.id, std::move(c));
    std::size_t hits = 0, known = 0;
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
      const auto it = cues.find(ds.items[i].id);
      if (it == cues.end()) continue;
      ++known;
      const auto top = analysis::top_k(att[i].delta, 1).entries[0].index;
      for (auto e : it->second.expert) hits += e == top ? 1 : 0;
    }
    if (known > 0) summary["top1_delta_in_expert_cues"] = static_cast<double>(hits) / static_cast<double>(known);
  }

  std::string highlights;
  for (std::size_t i = 0; i < ds.items.size(); ++i)
    highlights += analysis::highlights_to_json(
                      analysis::export_highlights(ds.items[i].id, att[i].delta, std::min(o.k, analysis::kComfortZoneMax))) +
                  "\n";
  write_text(dir / "highlights.jsonl", highlights);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  for (const auto& [key, value] : summary.items()) out << "event=metric name=" << key << " value=" << value.dump() << "\n";
  out << "event=analyzed dir=" << dir.string() << "\n";
  return kExitOk;
}

// ---- booster ----

int cmd_booster(const Options& o, std::ostream& out) {
  require_dataset_dir(o.train_dir);
  require_dataset_dir(o.data_dir);
  const auto params = load_trained(default_checkpoint(o, Stage::distillation), Stage::distillation);
  const auto train = data::load_dataset(o.train_dir);
  const auto test = data::load_dataset(o.data_dir);
  if (!train.missing_captions().empty() || !test.missing_captions().empty())
    throw RunError("booster needs caption embeddings to compute S_delta");
  analysis::BoosterConfig cfg;
  cfg.seed = o.seed;
  cfg.n_top = o.n_top;
  if (o.epochs) cfg.epochs = o.epochs;
  if (o.batch_size) cfg.batch_size = o.batch_size;
  if (o.learning_rate > 0.0) cfg.learning_rate = o.learning_rate;
  const auto source = analysis::delta_source(params);
  std::vector<analysis::BoosterExample> tr, te;
  try {
    tr = analysis::booster_examples(train, source, cfg.n_top);
    te = analysis::booster_examples(test, source, cfg.n_top);
  } catch (const std::invalid_argument& e) {
    throw RunError(e.what());
  }
  const auto cmp = analysis::compare_booster(tr, te, cfg);
  const fs::path dir = out_dir(o) / "booster";
  write_curve(dir / "baseline_loss.csv", cmp.baseline_curve);
  write_curve(dir / "booster_loss.csv", cmp.booster_curve);
  json summary{{"n_top", cfg.n_top},
               {"baseline_accuracy", cmp.baseline_accuracy},
               {"booster_accuracy", cmp.booster_accuracy},
               {"seed", cfg.seed}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  out << "event=booster n_top=" << cfg.n_top << " baseline_accuracy=" << fmt_double(cmp.baseline_accuracy)
      << " booster_accuracy=" << fmt_double(cmp.booster_accuracy) << " dir=" << dir.string() << "\n";
  return kExitOk;
}

// ---- questionnaire ----

json trial_json(const study::Trial& t) {
  json j{{"trial_id", t.id},
         {"query", t.query},
         {"gallery", t.gallery},
         {"answer", t.answer},
         {"difficulty", std::string(study::to_string(t.difficulty))},
         {"phase", std::string(study::to_string(t.phase))}};
  return j;
}

int cmd_questionnaire(const Options& o, std::ostream& out) {
  require_dataset_dir(o.data_dir);
  const auto ds = data::load_dataset(o.data_dir);
  const auto counts = parse_counts(o.counts);
  study::Questionnaire q;
  try {
    q = study::generate_questionnaire(ds, counts, o.seed);
  } catch (const std::invalid_argument& e) {
    throw RunError(e.what());
  }
  json trials = json::array();
  for (const auto& t : q.trials) trials.push_back(trial_json(t));
  json j{{"seed", q.seed},
         {"counts", {counts.easy, counts.medium, counts.hard}},
         {"full_mark", study::full_mark(counts)},
         {"trials", trials}};
  const fs::path path = out_dir(o) / "questionnaire.json";
  write_text(path, j.dump(1) + "\n");
  out << "event=questionnaire trials=" << q.trials.size() << " full_mark=" << fmt_double(study::full_mark(counts))
      << " path=" << path.string() << "\n";
  return kExitOk;
}

// ---- serve / score ----

struct StudyInputs {
  data::Dataset catalog;
  std::optional<pipeline::PipelineParams> params;
  bool posthoc = false;
};

StudyInputs load_study_inputs(const Options& o, bool need_checkpoint) {
  require_dataset_dir(o.data_dir);
  StudyInputs in;
  in.catalog = data::load_dataset(o.data_dir);
  const fs::path ckpt_path = default_checkpoint(o, Stage::posthoc);
  if (!fs::exists(ckpt_path)) {
    if (need_checkpoint) throw RunError("missing checkpoint: " + ckpt_path.string());
    return in;
  }
  const auto ckpt = pipeline::load_checkpoint(ckpt_path);
  if (ckpt.stage < Stage::distillation) throw RunError("highlights need a stage3 or posthoc checkpoint");
  in.params = pipeline::params_from_checkpoint(ckpt, 0);
  in.posthoc = ckpt.stage >= Stage::posthoc;
  return in;
}

study::HighlightSource make_highlight_source(const StudyInputs& in, const std::string& mode) {
  if (!in.params) return {};
  if (mode != "auto" && mode != "delta" && mode != "posthoc")
    throw RunError("highlight-source must be auto, delta or posthoc, got '" + mode + "'");
  if (mode == "posthoc" && !in.posthoc) throw RunError("highlight-source posthoc needs a posthoc checkpoint");
  std::map<std::string, const data::DatasetItem*> items;
  for (const auto& item : in.catalog.items) items[item.id] = &item;
  const auto& params = *in.params;
  const bool posthoc = in.posthoc;
  return [items, &params, posthoc, mode](const std::string& id) -> std::optional<std::vector<double>> {
    const auto it = items.find(id);
    if (it == items.end()) return std::nullopt;
    const auto& item = *it->second;
    if (mode != "posthoc" && item.caption) {
      const auto se = pipeline::compute_expert_attention(item.pool, params);
      const auto sn = pipeline::compute_novice_attention(*item.caption, item.pool, params);
      return pipeline::compute_delta_attention(item.pool, se, sn, params).to_vector();
    }
    if (mode != "delta" && posthoc) return pipeline::compute_posthoc_attention(item.pool, params).to_vector();
    return std::nullopt;
  };
}

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

int cmd_serve(const Options& o, std::ostream& out) {
  if (o.k > analysis::kComfortZoneMax)
    throw RunError("K=" + std::to_string(o.k) + " exceeds the comfort zone of " +
                   std::to_string(analysis::kComfortZoneMax) + " highlighted regions");
  const auto inputs = load_study_inputs(o, false);
  study::StudyConfig cfg;
  cfg.counts = parse_counts(o.counts);
  cfg.highlight_k = o.k;
  cfg.log_dir = o.log_dir.empty() ? out_dir(o) / "study" : fs::path(o.log_dir);
  study::StudyService service(inputs.catalog, make_highlight_source(inputs, o.highlight_source), cfg);
  study::HttpServer server(service, {o.host, o.port, o.static_dir});
  const int port = server.bind();
  g_stop = false;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.start();
  out << "event=serving host=" << o.host << " port=" << port << " log_dir=" << cfg.log_dir.string() << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  out << "event=stopped" << std::endl;
  return kExitOk;
}

int cmd_score(const Options& o, std::ostream& out) {
  const fs::path log_dir = o.log_dir.empty() ? out_dir(o) / "study" : fs::path(o.log_dir);
  require_file(log_dir / "sessions.jsonl", "session log");
  const auto inputs = load_study_inputs(o, false);
  study::StudyConfig cfg;
  cfg.counts = parse_counts(o.counts);
  cfg.highlight_k = o.k;
  cfg.log_dir = log_dir;
  const study::StudyService service(inputs.catalog, make_highlight_source(inputs, o.highlight_source), cfg);
  json sessions = json::array();
  for (const auto& id : service.session_ids()) {
    const auto r = service.report(id);
    json j{{"session_id", id},
           {"points", r.score.points},
           {"full_mark", r.score.full_mark},
           {"complete", r.score.complete},
           {"cp", r.score.cp ? json(*r.score.cp) : json(nullptr)},
           {"wcp", r.score.wcp ? json(*r.score.wcp) : json(nullptr)}};
    sessions.push_back(j);
    out << "event=score session=" << id << " points=" << fmt_double(r.score.points) << " complete=" << r.score.complete
        << " cp=" << j["cp"].dump() << " wcp=" << j["wcp"].dump() << "\n";
  }
  write_text(out_dir(o) / "scores.json", json{{"sessions", sessions}}.dump(2) + "\n");
  return kExitOk;
}

// ---- argument wiring ----

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--out", o.common.out_dir, "output directory");
  sub->add_option("--config", o.common.config, "flat key=value config file; flags override it");
}

void add_training(CLI::App* sub, Options& o, Stage stage) {
  add_common(sub, o);
  sub->add_option("--seed", o.seed, "random seed")->required();
  sub->add_option("--data", o.data_dir, "training dataset directory");
  if (stage != Stage::vision) sub->add_option("--checkpoint", o.checkpoint, "prerequisite checkpoint");
  sub->add_option("--epochs", o.epochs, "epochs (0: stage default)");
  sub->add_option("--batch-size", o.batch_size, "batch size (0: stage default)");
  sub->add_option("--lr", o.learning_rate, "learning rate (0: stage default)");
  if (stage == Stage::vision) sub->add_option("--warmup", o.warmup, "classifier-only warm-up epochs");
  if (stage == Stage::distillation) {
    sub->add_option("--temperature", o.temperature, "distillation temperature");
    sub->add_option("--temperature-mode", o.temperature_mode, "logits | features");
  }
  if (stage == Stage::posthoc) {
    sub->add_option("--gamma-mode", o.gamma_mode, "median | fixed");
    sub->add_option("--gamma", o.gamma, "kernel bandwidth when gamma-mode is fixed");
  }
}

// "--key value" pairs for config entries the subcommand defines and argv does not set.
std::vector<std::string> config_args(const CLI::App* sub, const std::map<std::string, std::string>& file,
                                     const std::vector<std::string>& argv) {
  std::set<std::string> given;
  for (const auto& a : argv) {
    if (a.rfind("--", 0) != 0) continue;
    given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
  }
  std::vector<std::string> out;
  for (const auto& [key, value] : file) {
    if (key == "config" || given.count(key)) continue;
    if (!sub->get_option_no_throw("--" + key)) continue;
    out.push_back("--" + key);
    out.push_back(value);
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw RunError("cannot read config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(path.string() + ":" + std::to_string(n), "expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw FormatError(path.string() + ":" + std::to_string(n), "empty key");
    out[key] = value;
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"exattn: expert-exclusive attention pipeline and study harness", "exattn"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic dataset with planted cues");
  add_common(gen, o);
  gen->add_option("--seed", o.synthetic.seed, "random seed")->required();
  gen->add_option("--num-species", o.synthetic.num_species);
  gen->add_option("--items-per-species", o.synthetic.items_per_species);
  gen->add_option("--k-max", o.synthetic.k_max);
  gen->add_option("--d", o.synthetic.d);
  gen->add_option("--expert-regions", o.synthetic.expert_regions_per_class);
  gen->add_option("--novice-regions", o.synthetic.novice_regions_per_class);
  gen->add_option("--sigma", o.synthetic.noise_sigma);
  gen->add_option("--species-per-family", o.synthetic.species_per_family);
  gen->add_option("--families-per-order", o.synthetic.families_per_order);
  gen->add_option("--test-fraction", o.test_fraction);

  const std::vector<std::tuple<std::string, Stage, std::string>> train_cmds{
      {"train-stage1", Stage::vision, "train the expert attention head and classifier"},
      {"train-stage2", Stage::grounding, "train the caption grounder (novice attention)"},
      {"train-stage3", Stage::distillation, "distil the expert-exclusive attention head"},
      {"train-posthoc", Stage::posthoc, "train the caption-free post-hoc attention head"}};
  std::map<CLI::App*, Stage> train_apps;
  for (const auto& [name, stage, description] : train_cmds) {
    auto* sub = app.add_subcommand(name, description);
    add_training(sub, o, stage);
    train_apps[sub] = stage;
  }

  auto* analyze = app.add_subcommand("analyze", "IoU_K, Acc_K and highlight export on a dataset");
  add_common(analyze, o);
  analyze->add_option("--data", o.data_dir, "evaluation dataset directory");
  analyze->add_option("--checkpoint", o.checkpoint);
  analyze->add_option("--k", o.k, "top-K operating point");
  analyze->add_option("--cues", o.cues, "planted cue file for synthetic data");

  auto* booster = app.add_subcommand("booster", "train baseline and booster classifiers and compare");
  add_common(booster, o);
  booster->add_option("--seed", o.seed)->required();
  booster->add_option("--train-data", o.train_dir);
  booster->add_option("--data", o.data_dir, "evaluation dataset directory");
  booster->add_option("--checkpoint", o.checkpoint);
  booster->add_option("--n-top", o.n_top);
  booster->add_option("--epochs", o.epochs);
  booster->add_option("--batch-size", o.batch_size);
  booster->add_option("--lr", o.learning_rate);

  auto* quest = app.add_subcommand("questionnaire", "generate a query-gallery questionnaire");
  add_common(quest, o);
  quest->add_option("--seed", o.seed)->required();
  quest->add_option("--data", o.data_dir, "catalog dataset directory");
  quest->add_option("--counts", o.counts, "easy,medium,hard trial counts");

  auto* serve = app.add_subcommand("serve", "run the study HTTP service");
  add_common(serve, o);
  serve->add_option("--data", o.data_dir, "catalog dataset directory");
  serve->add_option("--checkpoint", o.checkpoint);
  serve->add_option("--host", o.host);
  serve->add_option("--port", o.port);
  serve->add_option("--static-dir", o.static_dir);
  serve->add_option("--log-dir", o.log_dir);
  serve->add_option("--k", o.k, "highlights per follow-up trial");
  serve->add_option("--counts", o.counts);
  serve->add_option("--highlight-source", o.highlight_source, "auto | delta | posthoc");

  auto* score = app.add_subcommand("score", "score every session from the persisted logs");
  add_common(score, o);
  score->add_option("--data", o.data_dir, "catalog dataset directory");
  score->add_option("--checkpoint", o.checkpoint);
  score->add_option("--log-dir", o.log_dir);
  score->add_option("--k", o.k);
  score->add_option("--counts", o.counts);
  score->add_option("--highlight-source", o.highlight_source);

  std::vector<std::string> argv = args;
  try {
    // Config file entries go right after the subcommand so explicit flags win.
    CLI::App* chosen = nullptr;
    if (!argv.empty()) {
      for (auto* sub : app.get_subcommands([](CLI::App*) { return true; }))
        if (sub->get_name() == argv[0]) chosen = sub;
    }
    if (!argv.empty() && !chosen && argv[0].rfind('-', 0) != 0) {
      err << "error: unknown subcommand '" << argv[0] << "'\n\n" << app.help();
      return kExitUsage;
    }
    if (chosen) {
      std::string cfg_path;
      for (std::size_t i = 1; i < argv.size(); ++i) {
        if (argv[i] == "--config" && i + 1 < argv.size()) cfg_path = argv[i + 1];
        if (argv[i].rfind("--config=", 0) == 0) cfg_path = argv[i].substr(9);
      }
      if (!cfg_path.empty()) {
        const auto extra = config_args(chosen, read_config_file(cfg_path), argv);
        argv.insert(argv.begin() + 1, extra.begin(), extra.end());
      }
    }
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }

  if (o.common.out_dir.empty()) {
    const char* env = std::getenv(kOutDirEnv);
    o.common.out_dir = env && *env ? env : "exattn-out";
  }
  const fs::path data_root = fs::path(o.common.out_dir) / "data";

  try {
    for (const auto& [sub, stage] : train_apps) {
      if (!sub->parsed()) continue;
      if (o.data_dir.empty()) o.data_dir = (data_root / "train").string();
      return cmd_train(stage, o, out);
    }
    if (gen->parsed()) return cmd_gen_synthetic(o, out);
    if (analyze->parsed()) {
      if (o.data_dir.empty()) o.data_dir = (data_root / "test").string();
      return cmd_analyze(o, out);
    }
    if (booster->parsed()) {
      if (o.train_dir.empty()) o.train_dir = (data_root / "train").string();
      if (o.data_dir.empty()) o.data_dir = (data_root / "test").string();
      return cmd_booster(o, out);
    }
    if (quest->parsed() || serve->parsed() || score->parsed()) {
      if (o.data_dir.empty()) o.data_dir = (data_root / "test").string();
      if (quest->parsed()) return cmd_questionnaire(o, out);
      if (serve->parsed()) return cmd_serve(o, out);
      return cmd_score(o, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace exattn::cli
