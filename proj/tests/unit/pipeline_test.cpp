#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "exattn/data/synthetic.hpp"
#include "exattn/errors.hpp"
#include "exattn/numerics/gradcheck.hpp"
#include "exattn/numerics/losses.hpp"
#include "exattn/numerics/ops.hpp"
#include "exattn/pipeline/checkpoint.hpp"
#include "exattn/pipeline/forward.hpp"
#include "exattn/pipeline/params.hpp"
#include "exattn/pipeline/training.hpp"
#include "fixtures.hpp"
#include "grad_instances.hpp"
#include "oracles.hpp"

using namespace exattn;
using namespace exattn::pipeline;
using num::Tensor;

namespace {

data::DatasetItem random_item(std::mt19937_64& rng, std::size_t k_max, std::size_t d, std::size_t dc,
                              const std::string& species, const std::string& id) {
  data::DatasetItem item;
  item.id = id;
  item.species = species;
  item.pool = data::make_feature_pool(id, k_max, fixtures::random_tensor({data::region_count(k_max), d}, rng));
  item.caption = data::CaptionEmbedding{id, fixtures::random_tensor({dc}, rng)};
  return item;
}

void expect_valid(const std::vector<double>& s) {
  double sum = 0.0;
  for (double v : s) {
    CHECK_GE(v, 0.0);
    sum += v;
  }
  CHECK_LE(std::abs(sum - 1.0), 1e-6);
}

struct Trained {
  data::SyntheticDataset syn;
  data::Dataset train, test;
  PipelineParams params;
  std::vector<StageReport> reports;
};

// Full default pipeline, trained once per process.
const Trained& trained(double sigma) {
  static std::map<double, Trained> cache;
  auto it = cache.find(sigma);
  if (it != cache.end()) return it->second;
  Trained t;
  data::SyntheticConfig cfg;
  cfg.noise_sigma = sigma;
  t.syn = data::generate_synthetic(cfg);
  std::tie(t.train, t.test) = data::train_test_split(t.syn.dataset, 0.25);
  t.params = PipelineParams::init(t.train.feature_dim(), t.train.caption_dim(), t.train.taxonomy.size(), 7);
  for (Stage s : {Stage::vision, Stage::grounding, Stage::distillation, Stage::posthoc}) {
    auto c = default_training_config(s);
    c.seed = 7;
    t.reports.push_back(train_stage(s, t.train, t.params, c));
  }
  return cache.emplace(sigma, std::move(t)).first->second;
}

}  // namespace

TEST_CASE("Attend.Examples") {
  const auto f = num::constant(Tensor::matrix({{1.0, 0.0}, {0.0, 1.0}}));
  const auto out = attend(num::constant(Tensor::vector({0.3, 0.7})), f);
  CHECK_LE(std::abs(out.value()[0] - 0.3), 1e-15);
  CHECK_LE(std::abs(out.value()[1] - 0.7), 1e-15);

  std::mt19937_64 rng(2);
  const auto pool = data::make_feature_pool("x", 2, fixtures::random_tensor({5, 3}, rng));
  std::vector<double> onehot(5, 0.0);
  onehot[3] = 1.0;
  const auto picked = attend(AttentionVector(onehot, AttentionKind::expert), pool);
  for (std::size_t j = 0; j < 3; ++j) CHECK_EQ(picked[j], pool.features(3, j));
  const auto mean = attend(AttentionVector(std::vector<double>(5, 0.2), AttentionKind::expert), pool);
  for (std::size_t j = 0; j < 3; ++j) {
    double m = 0.0;
    for (std::size_t r = 0; r < 5; ++r) m += pool.features(r, j) / 5.0;
    CHECK_LE(std::abs(mean[j] - m), 1e-12);
  }
  CHECK_THROWS_AS(attend(AttentionVector({0.5, 0.5}, AttentionKind::expert), pool), std::invalid_argument);
}

TEST_CASE("AttentionVector.RejectsInvalidWeights") {
  CHECK_THROWS_AS(AttentionVector({0.5, 0.6}, AttentionKind::delta), std::invalid_argument);
  CHECK_THROWS_AS(AttentionVector({1.5, -0.5}, AttentionKind::delta), std::invalid_argument);
  CHECK_THROWS_AS(AttentionVector({std::nan(""), 1.0}, AttentionKind::delta), std::invalid_argument);
  CHECK_NOTHROW(AttentionVector({0.25, 0.75}, AttentionKind::delta));
}

TEST_CASE("ExpertAttention.ZeroScorerIsUniform") {
  std::mt19937_64 rng(3);
  auto p = PipelineParams::init(6, 4, 3, 1);
  fixtures::randomize(p, 1);
  p.expert.fc.value().fill(0.0);
  const auto pool = data::make_feature_pool("x", 3, fixtures::random_tensor({14, 6}, rng));
  const auto s = compute_expert_attention(pool, p);
  for (double v : s.weights()) CHECK_LE(std::abs(v - (1.0 / 14.0)), 1e-15);
}

TEST_CASE("ExpertAttention.MatchesOracle") {
  std::mt19937_64 rng(4);
  auto p = PipelineParams::init(4, 3, 2, 1);
  fixtures::randomize(p, 2);
  const auto f = fixtures::random_tensor({5, 4}, rng);
  const auto pool = data::make_feature_pool("x", 2, f);
  auto mat = [](const Tensor& t) {
    oracle::Mat m(t.rows(), oracle::Vec(t.cols()));
    for (std::size_t r = 0; r < t.rows(); ++r)
      for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
    return m;
  };
  const auto sa = oracle::self_attention(mat(f), mat(p.expert.wq.value()), mat(p.expert.wk.value()), mat(p.expert.wv.value()));
  oracle::Vec scores(5, 0.0);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 4; ++c) scores[r] += sa[r][c] * p.expert.fc.value()[c];
  const auto want = oracle::softmax(scores);
  const auto got = compute_expert_attention(pool, p);
  for (std::size_t i = 0; i < 5; ++i) CHECK_LE(std::abs(got[i] - want[i]), 1e-12);
}

TEST_CASE("NoviceAttention.AlignedRegionWins") {
  // Grounder output is the constant b2 = f_1; the other rows are orthogonal to it.
  auto p = PipelineParams::init(4, 3, 2, 1);
  p.grounder.w1.value().fill(0.0);
  p.grounder.b1.value().fill(0.0);
  p.grounder.w2.value().fill(0.0);
  p.grounder.b2.value() = Tensor::vector({1, 0, 0, 0});
  const auto pool = data::make_feature_pool(
      "x", 2, Tensor::matrix({{2, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 3, 0}, {0, 0, 0, 1}, {0, 1, 1, 0}}));
  const data::CaptionEmbedding cap{"x", Tensor::vector({0.3, 0.1, -2.0})};
  const auto s = compute_novice_attention(cap, pool, p);
  const double e = std::exp(1.0);
  CHECK_LE(std::abs(s[0] - (e / (e + 4.0))), 1e-12);
  for (std::size_t i = 1; i < 5; ++i) CHECK_LE(std::abs(s[i] - (1.0 / (e + 4.0))), 1e-12);
}

TEST_CASE("NoviceAttention.EqualCosinesUniformAndScaleInvariant") {
  auto p = PipelineParams::init(3, 2, 2, 1);
  p.grounder.w1.value().fill(0.0);
  p.grounder.b1.value().fill(0.0);
  p.grounder.w2.value().fill(0.0);
  p.grounder.b2.value() = Tensor::vector({1, 1, 1});
  const auto pool = data::make_feature_pool("x", 1, Tensor::matrix({{1, 2, 3}}));
  CHECK_LE(std::abs(compute_novice_attention({"x", Tensor::vector({1, 1})}, pool, p)[0] - 1.0), 1e-15);

  std::mt19937_64 rng(6);
  auto q = PipelineParams::init(4, 3, 2, 1);
  fixtures::randomize(q, 6);
  const auto big = data::make_feature_pool("y", 2, fixtures::random_tensor({5, 4}, rng));
  const data::CaptionEmbedding cap{"y", fixtures::random_tensor({3}, rng)};
  const auto base = compute_novice_attention(cap, big, q);
  for (double v : base.weights()) CHECK_GT(v, 0.0);
  auto doubled = q;
  doubled.grounder.w2.value() = Tensor(q.grounder.w2.value().shape(), 0.0);
  for (std::size_t i = 0; i < q.grounder.w2.value().size(); ++i) doubled.grounder.w2.value()[i] = 2.0 * q.grounder.w2.value()[i];
  for (std::size_t i = 0; i < q.grounder.b2.value().size(); ++i) doubled.grounder.b2.value()[i] = 2.0 * q.grounder.b2.value()[i];
  const auto scaled = compute_novice_attention(cap, big, doubled);
  for (std::size_t i = 0; i < 5; ++i) CHECK_LE(std::abs(scaled[i] - base[i]), 1e-12);
}

TEST_CASE("NoviceAttention.ZeroNormTreatedAsZeroSimilarity") {
  auto p = PipelineParams::init(2, 2, 2, 1);
  const auto pool = data::make_feature_pool("x", 2, Tensor({5, 2}, 0.0));
  const auto s = compute_novice_attention({"x", Tensor::vector({1, -1})}, pool, p);
  for (double v : s.weights()) CHECK_LE(std::abs(v - 0.2), 1e-15);
}

TEST_CASE("DeltaAttention.EqualInputsGiveUniform") {
  std::mt19937_64 rng(7);
  auto p = PipelineParams::init(5, 3, 3, 1);
  fixtures::randomize(p, 7);
  const auto pool = data::make_feature_pool("x", 3, fixtures::random_tensor({14, 5}, rng));
  const auto se = compute_expert_attention(pool, p);
  const auto s = compute_delta_attention(pool, se, se, p);
  for (double v : s.weights()) CHECK_LE(std::abs(v - (1.0 / 14.0)), 1e-15);
}

TEST_CASE("DeltaAttention.MaskIsPositivePart") {
  const auto m = exclusivity_mask(std::vector<double>{0.5, 0.2, 0.3}, std::vector<double>{0.1, 0.6, 0.3});
  CHECK_LE(std::abs(m[0] - 0.4), 1e-15);
  CHECK_EQ(m[1], 0.0);
  CHECK_EQ(m[2], 0.0);
  CHECK_THROWS_AS(exclusivity_mask(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("AttentionOps.ValidOnRandomInputs") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto p = PipelineParams::init(6, 4, 3, trial);
    fixtures::randomize(p, trial, 1.0);
    const auto item = random_item(rng, 3, 6, 4, "a", "x");
    const auto a = compute_all_attentions(item, p);
    expect_valid(a.expert);
    expect_valid(a.novice);
    expect_valid(a.delta);
    expect_valid(a.posthoc);
  }
}

TEST_CASE("AttentionOps.CaptionFreeItemGetsExpertAndPosthoc") {
  std::mt19937_64 rng(9);
  auto p = PipelineParams::init(6, 4, 3, 1);
  auto item = random_item(rng, 2, 6, 4, "a", "x");
  item.caption.reset();
  const auto a = compute_all_attentions(item, p);
  CHECK_EQ(a.expert.size(), 5u);
  CHECK_EQ(a.posthoc.size(), 5u);
  CHECK(a.novice.empty());
  CHECK(a.delta.empty());
}

TEST_CASE("Losses.GradientsMatchFiniteDifferences") {
  for (Stage s : {Stage::vision, Stage::grounding, Stage::distillation, Stage::posthoc}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto r = fixtures::check_stage_gradient(s, seed);
      {
    INFO(to_string(s) << " " << r.worst_parameter << "[" << r.worst_index << "]");
    CHECK_LE(r.max_relative_error, 1e-3);
  }
    }
  }
}

TEST_CASE("Losses.FeatureTemperatureGradient") {
  auto g = fixtures::grad_instance(Stage::distillation, 3);
  g.params.train_only(Stage::distillation);
  const auto params = g.params.stage_parameters(Stage::distillation);
  const auto r = num::finite_difference_check(
      [&] { return distil_loss(g.items[0], g.params, 2.0, TemperatureMode::features); }, params);
  {
    INFO(r.worst_parameter);
    CHECK_LE(r.max_relative_error, 1e-3);
  }
}

TEST_CASE("Losses.DistillationIdentityIsZero") {
  // With novice + delta pooled equal to the teacher pooled feature, KL vanishes.
  std::mt19937_64 rng(11);
  auto p = PipelineParams::init(4, 3, 3, 1);
  fixtures::randomize(p, 11);
  const auto pooled = num::constant(Tensor::vector({0.2, -0.1, 0.5, 0.3}));
  const auto a = softened_prediction(pooled, p.classifier, 5.0, TemperatureMode::logits);
  CHECK_LE(std::abs(num::kl_divergence(a, a).item() - 0.0), 1e-15);
  CHECK_THROWS_AS(softened_prediction(pooled, p.classifier, 0.0, TemperatureMode::logits), std::invalid_argument);
  CHECK_THROWS_AS(distil_loss(random_item(rng, 1, 4, 3, "a", "x"), p, -1.0), std::invalid_argument);
}

TEST_CASE("Losses.BatchPreconditions") {
  std::mt19937_64 rng(12);
  auto p = PipelineParams::init(4, 3, 2, 1);
  const auto item = random_item(rng, 1, 4, 3, "a", "x");
  std::vector<const data::DatasetItem*> one{&item};
  CHECK_THROWS_AS(ground_loss(one, p), std::invalid_argument);
  CHECK_THROWS_AS(posthoc_loss(one, p), std::invalid_argument);
}

TEST_CASE("MakeBatches.PartitionAndMergeTail") {
  const auto b = make_batches(17, 8, 3);
  REQUIRE_EQ(b.size(), 2u);
  CHECK_EQ(b[1].size(), 9u);
  std::set<std::size_t> all;
  for (const auto& batch : b) all.insert(batch.begin(), batch.end());
  CHECK_EQ(all.size(), 17u);
  CHECK_EQ(make_batches(17, 8, 3), make_batches(17, 8, 3));
  CHECK_THROWS_AS(make_batches(4, 0, 1), std::invalid_argument);
}

TEST_CASE("Training.PreconditionErrors") {
  auto syn = data::generate_synthetic(fixtures::small_synthetic());
  auto p = PipelineParams::init(12, 12, 8, 1);
  data::Dataset empty;
  empty.taxonomy = syn.dataset.taxonomy;
  CHECK_THROWS_AS(train_stage1(empty, p, {}), std::invalid_argument);
  auto cfg = default_training_config(Stage::grounding);
  cfg.batch_size = 1;
  CHECK_THROWS_AS(train_stage2(syn.dataset, p, cfg), std::invalid_argument);
  auto missing = syn.dataset;
  missing.items[3].caption.reset();
  try {
    train_stage2(missing, p, default_training_config(Stage::grounding));
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    {
    INFO(e.what());
    CHECK_NE(std::string(e.what()).find(missing.items[3].id), std::string::npos);
  }
  }
  cfg = default_training_config(Stage::distillation);
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(train_stage3(syn.dataset, p, cfg), std::invalid_argument);
  cfg = default_training_config(Stage::posthoc);
  cfg.batch_size = 1;
  CHECK_THROWS_AS(train_posthoc(syn.dataset, p, cfg), std::invalid_argument);
}

TEST_CASE("Training.StageOneLossDecreasesEarly") {
  const auto syn = data::generate_synthetic(data::SyntheticConfig{});
  auto p = PipelineParams::init(32, 32, 8, 7);
  auto cfg = default_training_config(Stage::vision);
  cfg.epochs = 10;
  cfg.learning_rate = 1e-3;
  cfg.classifier_warmup_epochs = 0;
  const auto r = train_stage1(syn.dataset, p, cfg);
  REQUIRE_EQ(r.loss_curve.size(), 11u);
  for (std::size_t e = 1; e < r.loss_curve.size(); ++e) {
    INFO(e);
    CHECK_LT(r.loss_curve[e], r.loss_curve[e - 1]);
  }
}

TEST_CASE("Training.IdenticalSeedsIdenticalParameters") {
  const auto syn = data::generate_synthetic(fixtures::small_synthetic());
  const auto a = fixtures::train_all(syn.dataset, 5, 3);
  const auto b = fixtures::train_all(syn.dataset, 5, 3);
  for (Stage s : {Stage::vision, Stage::grounding, Stage::distillation, Stage::posthoc})
    {
    INFO(to_string(s));
    CHECK(stage_parameters_equal(a, b, s));
  }
}

TEST_CASE("Training.EarlierStagesStayBitIdentical") {
  const auto syn = data::generate_synthetic(fixtures::small_synthetic());
  auto p = PipelineParams::init(12, 12, 8, 3);
  std::vector<Stage> done;
  for (Stage s : {Stage::vision, Stage::grounding, Stage::distillation, Stage::posthoc}) {
    const auto before = p;
    auto cfg = default_training_config(s);
    cfg.epochs = 3;
    cfg.classifier_warmup_epochs = 1;
    train_stage(s, syn.dataset, p, cfg);
    for (Stage earlier : done) {
    INFO(to_string(earlier));
    CHECK(stage_parameters_equal(before, p, earlier));
  }
    {
    INFO(to_string(s));
    CHECK_FALSE(stage_parameters_equal(before, p, s));
  }
    done.push_back(s);
  }
}

TEST_CASE("Training.EpochCallbackSeesEveryCheckpoint") {
  const auto syn = data::generate_synthetic(fixtures::small_synthetic());
  auto p = PipelineParams::init(12, 12, 8, 3);
  auto cfg = default_training_config(Stage::vision);
  cfg.epochs = 4;
  std::vector<double> seen;
  cfg.on_epoch = [&](std::size_t, double loss) { seen.push_back(loss); };
  const auto r = train_stage1(syn.dataset, p, cfg);
  CHECK_EQ(seen, r.loss_curve);
}

TEST_CASE("TrainedPipeline.StageOneAccuracyAndCueAttention") {
  const auto& t = trained(0.0);
  CHECK_GE(expert_accuracy(t.train, t.params), 0.95);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < t.syn.dataset.items.size(); ++i) {
    const auto& item = t.syn.dataset.items[i];
    const auto s = compute_expert_attention(item.pool, t.params);
    std::size_t top = 0;
    for (std::size_t r = 1; r < s.size(); ++r)
      if (s[r] > s[top]) top = r;
    const auto& cue = t.syn.cues[i];
    hits += (std::count(cue.expert.begin(), cue.expert.end(), top) + std::count(cue.novice.begin(), cue.novice.end(), top)) > 0;
  }
  CHECK_GE(static_cast<double>(hits) / t.syn.dataset.items.size(), 0.95);
}

TEST_CASE("TrainedPipeline.StageOneTrainAccuracyAtDefaultNoise") {
  CHECK_GE(expert_accuracy(trained(0.1).train, trained(0.1).params), 0.95);
}

TEST_CASE("TrainedPipeline.GroundingLossAndRetrieval") {
  const auto& t = trained(0.1);
  const auto& r = t.reports[1].loss_curve;
  CHECK_LE(std::abs(r.front() - std::log(8.0)), 0.2 * std::log(8.0));
  CHECK_LE(r.back(), 0.7 * r.front());
  // One held-out item per family: captions of different families are distinguishable.
  std::map<std::string, const data::DatasetItem*> per_family;
  for (const auto& item : t.test.items) per_family.emplace(t.test.taxonomy.family_of(item.species), &item);
  std::vector<const data::DatasetItem*> batch;
  for (const auto& [f, item] : per_family) batch.push_back(item);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto novice = attend(compute_novice_attention(*batch[i]->caption, batch[i]->pool, t.params), batch[i]->pool);
    std::size_t best = 0;
    double best_score = -1e300;
    for (std::size_t j = 0; j < batch.size(); ++j) {
      const auto proj = t.params.grounder.project(num::constant(batch[j]->caption->vector)).value();
      double s = 0.0;
      for (std::size_t c = 0; c < novice.size(); ++c) s += novice[c] * proj[c];
      if (s > best_score) best_score = s, best = j;
    }
    hits += best == i ? 1 : 0;
  }
  CHECK_GE(static_cast<double>(hits) / batch.size(), 0.8);
}

TEST_CASE("TrainedPipeline.DistillationLossHalvesAndKlMonotone") {
  const auto& t = trained(0.1);
  const auto& r = t.reports[2];
  CHECK_LE(r.loss_curve.back(), 0.5 * r.loss_curve.front());
  for (std::size_t e = 1; e < r.kl_t1_curve.size(); ++e) {
    INFO(e);
    CHECK_LE(r.kl_t1_curve[e], r.kl_t1_curve[e - 1] + 1e-4);
  }
}

TEST_CASE("TrainedPipeline.HigherTemperatureSmallerInitialLoss") {
  const auto& t = trained(0.1);
  auto p = t.params;
  const auto fresh = PipelineParams::init(p.feature_dim, p.caption_dim, p.classes, 99);
  p.delta = fresh.delta;
  CHECK_LT(mean_distil_loss(t.train, p, 20.0), mean_distil_loss(t.train, p, 1.0));
}

TEST_CASE("TrainedPipeline.PosthocLossHalvesAndMatchesDelta") {
  const auto& t = trained(0.1);
  const auto& r = t.reports[3].loss_curve;
  CHECK_GE(r.front() - r.back(), 0.5 * std::abs(r.front()));
  double iou = 0.0;
  for (const auto& item : t.test.items) {
    const auto a = compute_all_attentions(item, t.params);
    iou += oracle::iou(a.delta, a.posthoc, 3);
  }
  CHECK_GE(iou / t.test.items.size(), 0.5);
}

TEST_CASE("TrainedPipeline.DeltaFollowsSingleMaskedRegion") {
  // Mask nonzero at one planted expert region only: S_delta peaks there.
  const auto& t = trained(0.0);
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < t.syn.dataset.items.size(); i += 7) {
    const auto& item = t.syn.dataset.items[i];
    const std::size_t r = t.syn.cues[i].expert[0];
    std::vector<double> onehot(item.pool.size(), 0.0), uniform(item.pool.size(), 1.0 / item.pool.size());
    onehot[r] = 1.0;
    const auto s = compute_delta_attention(item.pool, AttentionVector(onehot, AttentionKind::expert),
                                           AttentionVector(uniform, AttentionKind::novice), t.params);
    std::size_t top = 0;
    for (std::size_t k = 1; k < s.size(); ++k)
      if (s[k] > s[top]) top = k;
    hits += top == r ? 1 : 0;
    ++total;
  }
  CHECK_EQ(hits, total);
}

TEST_CASE("TrainedPipeline.PosthocNeedsNoCaption") {
  const auto& t = trained(0.1);
  auto item = t.test.items[0];
  item.caption.reset();
  CHECK_NOTHROW(compute_posthoc_attention(item.pool, t.params));
}

TEST_CASE("Checkpoint.RoundTripIsBitIdentical") {
  auto p = PipelineParams::init(6, 4, 3, 1);
  fixtures::randomize(p, 1);
  const auto ckpt = make_checkpoint(p, Stage::posthoc, {"a", "b", "c"}, {{"lr", "0.001"}});
  const auto back = checkpoint_from_string(checkpoint_to_string(ckpt));
  CHECK_EQ(back.stage, Stage::posthoc);
  CHECK_EQ(back.config, ckpt.config);
  CHECK_EQ(back.classes, ckpt.classes);
  CHECK_EQ(back.tensors, ckpt.tensors);
  CHECK_EQ(checkpoint_to_string(back), checkpoint_to_string(ckpt));
  const auto q = params_from_checkpoint(back, 55);
  for (Stage s : {Stage::vision, Stage::grounding, Stage::distillation, Stage::posthoc})
    CHECK(stage_parameters_equal(p, q, s));
}

TEST_CASE("Checkpoint.StageTagLimitsContents") {
  auto p = PipelineParams::init(6, 4, 3, 1);
  const auto ckpt = make_checkpoint(p, Stage::grounding, {"a", "b", "c"});
  for (const auto* param : p.stage_parameters(Stage::distillation)) CHECK_FALSE((ckpt.tensors.count(param->name())));
  for (const auto* param : p.stage_parameters(Stage::vision)) CHECK((ckpt.tensors.count(param->name())));
}

TEST_CASE("Checkpoint.MissingPrerequisiteRejected") {
  auto p = PipelineParams::init(6, 4, 3, 1);
  auto ckpt = make_checkpoint(p, Stage::distillation, {"a", "b", "c"});
  const std::string victim = p.stage_parameters(Stage::vision)[0]->name();
  ckpt.tensors.erase(victim);
  try {
    validate_checkpoint(ckpt);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    {
    INFO(e.what());
    CHECK_NE(std::string(e.what()).find(victim), std::string::npos);
  }
  }
  CHECK_THROWS_AS(checkpoint_from_string(checkpoint_to_string(ckpt)), FormatError);
}

TEST_CASE("Checkpoint.MalformedInputRejected") {
  CHECK_THROWS_AS(checkpoint_from_string("{"), FormatError);
  CHECK_THROWS_AS(checkpoint_from_string("{\"format\":\"other\"}"), FormatError);
  auto p = PipelineParams::init(6, 4, 3, 1);
  auto ckpt = make_checkpoint(p, Stage::vision, {"a", "b", "c"});
  ckpt.tensors.begin()->second = Tensor({2, 2});
  CHECK_THROWS_AS(validate_checkpoint(ckpt), FormatError);
}

TEST_CASE("Checkpoint.FileRoundTrip") {
  fixtures::TempDir dir;
  auto p = PipelineParams::init(6, 4, 3, 1);
  const auto ckpt = make_checkpoint(p, Stage::vision, {"a", "b", "c"});
  save_checkpoint(ckpt, dir / "c.json");
  CHECK_EQ(load_checkpoint(dir / "c.json").tensors, ckpt.tensors);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.json"), std::runtime_error);
}
