#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "exattn/errors.hpp"
#include "exattn_tools/cli.hpp"
#include "fixtures.hpp"

namespace fs = std::filesystem;
using namespace exattn;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result exec(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<std::string> small_gen(const fs::path& out, const std::string& seed = "3") {
  return {"gen-synthetic", "--seed", seed, "--out", out.string(), "--num-species", "8", "--items-per-species", "8",
          "--k-max", "2", "--d", "8", "--expert-regions", "1", "--novice-regions", "1"};
}

// Trains every stage on the small dataset with few epochs.
void train_small(const fs::path& out) {
  for (const char* stage : {"train-stage1", "train-stage2", "train-stage3", "train-posthoc"}) {
    const auto r = exec({stage, "--seed", "5", "--out", out.string(), "--epochs", "4"});
    {
    INFO(stage << ": " << r.err);
    REQUIRE_EQ(r.code, cli::kExitOk);
  }
  }
}

}  // namespace

TEST_CASE("Cli.UnknownSubcommandIsUsageError") {
  const auto r = exec({"frobnicate"});
  CHECK_EQ(r.code, cli::kExitUsage);
  CHECK_NE(r.err.find("unknown subcommand 'frobnicate'"), std::string::npos);
  CHECK_EQ(exec({}).code, cli::kExitUsage);
}

TEST_CASE("Cli.MissingRequiredSeedIsUsageError") {
  fixtures::TempDir dir;
  CHECK_EQ(exec({"gen-synthetic", "--out", dir.path().string()}).code, cli::kExitUsage);
  CHECK_EQ(exec({"train-stage1", "--out", dir.path().string()}).code, cli::kExitUsage);
  CHECK_EQ(exec({"train-stage1", "--seed", "x", "--out", dir.path().string()}).code, cli::kExitUsage);
}

TEST_CASE("Cli.HelpExitsCleanly") {
  const auto r = exec({"--help"});
  CHECK_EQ(r.code, cli::kExitOk);
  CHECK_NE(r.out.find("train-stage3"), std::string::npos);
}

TEST_CASE("Cli.MissingCheckpointNamesFile") {
  fixtures::TempDir dir;
  REQUIRE_EQ(exec(small_gen(dir.path())).code, cli::kExitOk);
  const auto r = exec({"train-stage2", "--seed", "1", "--out", dir.path().string()});
  CHECK_EQ(r.code, cli::kExitFailure);
  {
    INFO(r.err);
    CHECK_NE(r.err.find("stage1.json"), std::string::npos);
  }
}

TEST_CASE("Cli.MissingDatasetNamesFile") {
  fixtures::TempDir dir;
  const auto r = exec({"train-stage1", "--seed", "1", "--out", dir.path().string()});
  CHECK_EQ(r.code, cli::kExitFailure);
  {
    INFO(r.err);
    CHECK_NE(r.err.find("features.jsonl"), std::string::npos);
  }
}

TEST_CASE("Cli.GroundingWithoutCaptionsFails") {
  fixtures::TempDir dir;
  REQUIRE_EQ(exec(small_gen(dir.path())).code, cli::kExitOk);
  REQUIRE_EQ(exec({"train-stage1", "--seed", "1", "--out", dir.path().string(), "--epochs", "2"}).code, cli::kExitOk);
  fs::remove(dir / "data" / "train" / "captions.jsonl");
  const auto r = exec({"train-stage2", "--seed", "1", "--out", dir.path().string(), "--epochs", "2"});
  CHECK_EQ(r.code, cli::kExitFailure);
  {
    INFO(r.err);
    CHECK_NE(r.err.find("caption"), std::string::npos);
  }
}

TEST_CASE("Cli.ConfigFileWithFlagOverride") {
  fixtures::TempDir dir;
  REQUIRE_EQ(exec(small_gen(dir.path())).code, cli::kExitOk);
  const auto cfg = dir / "run.conf";
  std::ofstream(cfg) << "# stage one\nepochs = 2\nseed = 9\nunrelated = 1\n";
  const auto from_file = exec({"train-stage1", "--out", dir.path().string(), "--config", cfg.string()});
  {
    INFO(from_file.err);
    REQUIRE_EQ(from_file.code, cli::kExitOk);
  }
  CHECK_EQ(count(from_file.out, "event=epoch"), 3u);  // epoch 0 is the untrained loss
  const auto overridden = exec({"train-stage1", "--out", dir.path().string(), "--config", cfg.string(), "--epochs", "3"});
  {
    INFO(overridden.err);
    REQUIRE_EQ(overridden.code, cli::kExitOk);
  }
  CHECK_EQ(count(overridden.out, "event=epoch"), 4u);

  std::ofstream(dir / "bad.conf") << "epochs 2\n";
  const auto bad = exec({"train-stage1", "--out", dir.path().string(), "--config", (dir / "bad.conf").string()});
  CHECK_EQ(bad.code, cli::kExitFailure);
  {
    INFO(bad.err);
    CHECK_NE(bad.err.find("bad.conf:1"), std::string::npos);
  }
}

TEST_CASE("Cli.OutDirFromEnvironment") {
  fixtures::TempDir dir;
  const auto target = dir / "from-env";
  ::setenv(cli::kOutDirEnv, target.string().c_str(), 1);
  auto args = small_gen(dir.path());
  args.erase(args.begin() + 3, args.begin() + 5);  // drop --out
  const auto r = exec(args);
  ::unsetenv(cli::kOutDirEnv);
  {
    INFO(r.err);
    REQUIRE_EQ(r.code, cli::kExitOk);
  }
  CHECK(fs::exists(target / "data" / "train" / "features.jsonl"));
  CHECK(fs::exists(target / "data" / "cues.jsonl"));
}

TEST_CASE("Cli.RepeatedRunsAreByteIdentical") {
  const std::vector<std::string> files{"data/train/features.jsonl", "data/train/captions.jsonl", "data/test/labels.jsonl",
                                       "data/cues.jsonl",           "checkpoints/stage1.json",   "checkpoints/stage2.json",
                                       "checkpoints/stage3.json",   "checkpoints/posthoc.json",  "curves/stage3_loss.csv"};
  fixtures::TempDir dir;
  std::vector<std::string> first;
  for (int run = 0; run < 2; ++run) {
    fs::remove_all(dir / "data");
    fs::remove_all(dir / "checkpoints");
    fs::remove_all(dir / "curves");
    REQUIRE_EQ(exec(small_gen(dir.path(), "11")).code, cli::kExitOk);
    train_small(dir.path());
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto bytes = slurp(dir / files[i]);
      {
    INFO(files[i]);
    CHECK_FALSE(bytes.empty());
  }
      if (run == 0) first.push_back(bytes);
      else {
    INFO(files[i]);
    CHECK_EQ(bytes, first[i]);
  }
    }
  }
  fixtures::TempDir other;
  REQUIRE_EQ(exec(small_gen(other.path(), "12")).code, cli::kExitOk);
  CHECK_NE(first[0], slurp(other / "data/train/features.jsonl"));
}

TEST_CASE("Cli.TrainingOutputs") {
  fixtures::TempDir dir;
  REQUIRE_EQ(exec(small_gen(dir.path())).code, cli::kExitOk);
  train_small(dir.path());
  const auto curve = slurp(dir / "curves" / "stage1_loss.csv");
  CHECK_EQ(curve.rfind("epoch,loss\n", 0), 0u);
  CHECK_EQ(count(curve, "\n"), 6u);
  CHECK_EQ(slurp(dir / "curves" / "stage3_kl_t1.csv").rfind("epoch,kl_t1\n", 0), 0u);
}

TEST_CASE("Cli.AnalyzeBoosterQuestionnaireAndScore") {
  fixtures::TempDir dir;
  REQUIRE_EQ(exec(small_gen(dir.path())).code, cli::kExitOk);
  train_small(dir.path());
  const auto an = exec({"analyze", "--out", dir.path().string(), "--k", "3", "--cues", (dir / "data" / "cues.jsonl").string()});
  {
    INFO(an.err);
    REQUIRE_EQ(an.code, cli::kExitOk);
  }
  const auto iou = slurp(dir / "analysis" / "iou.csv");
  {
    INFO(iou);
    CHECK_EQ(iou.rfind("k,novice_delta,novice_expert,expert_delta", 0), 0u);
  }
  CHECK_EQ(slurp(dir / "analysis" / "acc_k.csv").rfind("k,", 0), 0u);
  CHECK(fs::exists(dir / "analysis" / "summary.json"));
  CHECK_EQ(exec({"analyze", "--out", dir.path().string(), "--k", "6"}).code, cli::kExitFailure);

  const auto bo = exec({"booster", "--seed", "2", "--out", dir.path().string(), "--epochs", "5"});
  {
    INFO(bo.err);
    REQUIRE_EQ(bo.code, cli::kExitOk);
  }
  CHECK(fs::exists(dir / "booster" / "summary.json"));

  const auto q = exec({"questionnaire", "--seed", "4", "--out", dir.path().string(), "--counts", "3,4,3",
                       "--data", (dir / "data" / "train").string()});
  {
    INFO(q.err);
    REQUIRE_EQ(q.code, cli::kExitOk);
  }
  CHECK_NE(slurp(dir / "questionnaire.json").find("\"trials\""), std::string::npos);

  CHECK_EQ(exec({"serve", "--out", dir.path().string(), "--k", "8"}).code, cli::kExitFailure);
  const auto sc = exec({"score", "--out", dir.path().string()});
  CHECK_EQ(sc.code, cli::kExitFailure);
  {
    INFO(sc.err);
    CHECK_NE(sc.err.find("sessions.jsonl"), std::string::npos);
  }
}

TEST_CASE("Cli.ReadConfigFile") {
  fixtures::TempDir dir;
  std::ofstream(dir / "c.conf") << "--lr = 0.5\nname = \"a b\"  # comment\n\n";
  const auto m = cli::read_config_file(dir / "c.conf");
  CHECK_EQ(m.at("lr"), "0.5");
  CHECK_EQ(m.at("name"), "a b");
  std::ofstream(dir / "e.conf") << "ok = 1\n= 2\n";
  try {
    cli::read_config_file(dir / "e.conf");
    FAIL("");
  } catch (const FormatError& e) {
    CHECK_NE(std::string(e.what()).find("e.conf:2"), std::string::npos);
  }
}
