#include "doctest.h"

#include <random>
#include <tuple>

#include "exattn/analysis/accuracy.hpp"
#include "exattn/analysis/booster.hpp"
#include "exattn/analysis/highlights.hpp"
#include "exattn/analysis/ranking.hpp"
#include "exattn/data/synthetic.hpp"
#include "exattn/errors.hpp"
#include "exattn/pipeline/forward.hpp"
#include "exattn/pipeline/training.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace exattn;
using namespace exattn::analysis;

namespace {

std::vector<double> random_probs(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) s += x = u(rng);
  for (auto& x : v) x /= s;
  return v;
}

struct Trained {
  data::Dataset train, test;
  pipeline::PipelineParams params;
};

const Trained& trained() {
  static const Trained t = [] {
    Trained out;
    const auto syn = data::generate_synthetic(data::SyntheticConfig{});
    std::tie(out.train, out.test) = data::train_test_split(syn.dataset, 0.25);
    out.params = fixtures::train_all(out.train, 7);
    return out;
  }();
  return t;
}

}  // namespace

TEST_CASE("TopK.Examples") {
  CHECK_EQ(top_k(std::vector<double>(14, 1.0 / 14), 3).indices(), (std::vector<std::size_t>{0, 1, 2}));
  std::vector<double> onehot(5, 0.0);
  onehot[4] = 1.0;
  CHECK_EQ(top_k(onehot, 1).indices(), (std::vector<std::size_t>{4}));
  CHECK_EQ(top_k(std::vector<double>{0.1, 0.4, 0.2, 0.3}, 2).indices(), (std::vector<std::size_t>{1, 3}));
  CHECK_THROWS_AS(top_k(onehot, 0), std::invalid_argument);
  CHECK_THROWS_AS(top_k(onehot, 6), std::invalid_argument);
}

TEST_CASE("TopK.CarriesPyramidRects") {
  std::vector<double> s(5, 0.0);
  s[2] = 1.0;
  const auto r = top_k(s, 1);
  CHECK_EQ(r[0].rect, (data::Rect{0.5, 0, 1, 0.5}));
  CHECK_EQ(r[0].weight, 1.0);
}

TEST_CASE("TopK.PropertyPrefixAndOrder") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = random_probs(rng, 14);
    if (trial % 3 == 0) s[5] = s[9];  // force a tie
    const auto full = top_k(s, 14);
    for (std::size_t i = 1; i < full.size(); ++i) {
      CHECK_GE(full[i - 1].weight, full[i].weight);
      if (full[i - 1].weight == full[i].weight) CHECK_LT(full[i - 1].index, full[i].index);
    }
    for (std::size_t k = 1; k <= 14; ++k) {
      const auto part = top_k(s, k).indices();
      const auto expected = oracle::top_indices(s, k);
      CHECK_EQ(part, expected);
      CHECK((std::equal(part.begin(), part.end(), full.indices().begin())));
    }
  }
}

TEST_CASE("Iou.Examples") {
  const std::vector<double> a{0.1, 0.4, 0.2, 0.3};
  CHECK_EQ(iou_top_k(a, a, 2), 1.0);
  CHECK_EQ(iou_top_k(a, std::vector<double>{0.4, 0.1, 0.3, 0.2}, 2), 0.0);
  CHECK_LE(std::abs(iou_top_k(a, std::vector<double>{0.4, 0.3, 0.2, 0.1}, 2) - (1.0 / 3.0)), 1e-15);
  CHECK_THROWS_AS(iou_top_k(a, std::vector<double>{0.5, 0.5}, 1), std::invalid_argument);
}

TEST_CASE("Iou.PropertySymmetricBoundedMatchesOracle") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_probs(rng, 14), b = random_probs(rng, 14);
    for (std::size_t k = 1; k <= 14; ++k) {
      const double v = iou_top_k(a, b, k);
      CHECK_EQ(v, iou_top_k(b, a, k));
      CHECK_GE(v, 0.0);
      CHECK_LE(v, 1.0);
      CHECK_LE(std::abs(v - oracle::iou(a, b, k)), 1e-15);
      CHECK_EQ(iou_top_k(a, a, k), 1.0);
    }
  }
}

TEST_CASE("AccK.FeatureAtFullKIsHalfSum") {
  std::mt19937_64 rng(3);
  const auto pool = data::make_feature_pool("x", 2, fixtures::random_tensor({5, 3}, rng));
  const auto s = random_probs(rng, 5);
  const std::vector<double> nov{0.5, -1.0, 2.0};
  const auto f = acc_k_feature(nov, s, pool, 5);
  const auto pooled = pipeline::attend(pipeline::AttentionVector(s, pipeline::AttentionKind::delta), pool);
  for (std::size_t j = 0; j < 3; ++j) CHECK_LE(std::abs(f[j] - (0.5 * (nov[j] + pooled[j]))), 1e-12);
  CHECK_THROWS_AS(acc_k_feature(nov, s, pool, 6), std::invalid_argument);
}

TEST_CASE("AccK.FeatureAtTopOneIsRenormalizedRow") {
  const auto pool = data::make_feature_pool("x", 2, num::Tensor::matrix({{1, 0}, {0, 1}, {2, 2}, {3, 0}, {0, 3}}));
  const std::vector<double> s{0.1, 0.1, 0.5, 0.2, 0.1};
  const auto f = acc_k_feature(std::vector<double>{0, 0}, s, pool, 1);
  CHECK_LE(std::abs(f[0] - 1.0), 1e-15);
  CHECK_LE(std::abs(f[1] - 1.0), 1e-15);
}

TEST_CASE("AccK.SameSourceAtFullKEqualsPooledAccuracy") {
  const auto& t = trained();
  const auto src = expert_source(t.params);
  CHECK(acc_k(t.test, src, src, 14, t.params.classifier) == doctest::Approx(pooled_accuracy(t.test, src, t.params.classifier)).epsilon(1e-14));
}

TEST_CASE("AccK.RetainedAccuracyAndDeltaBeatsExpertAtOne") {
  const auto& t = trained();
  const auto nov = novice_source(t.params);
  const double acc1 = acc_k(t.test, nov, delta_source(t.params), 1, t.params.classifier);
  const double accn = acc_k(t.test, nov, delta_source(t.params), 14, t.params.classifier);
  CHECK_GE(acc1, 0.9 * accn);
  CHECK_GE(acc1, acc_k(t.test, nov, expert_source(t.params), 1, t.params.classifier));
}

TEST_CASE("AccK.CaptionSourcesRejectCaptionlessItems") {
  const auto& t = trained();
  auto item = t.test.items[0];
  item.caption.reset();
  CHECK_THROWS_AS(delta_source(t.params)(item), std::invalid_argument);
  CHECK_NOTHROW(posthoc_source(t.params)(item));
}

TEST_CASE("Booster.ZeroDeltaReducesToBaseline") {
  const auto model = BoosterModel::init(4, 6, 3, 1);
  const std::vector<double> x{0.3, -1, 2, 0.5};
  const auto base = booster_combine(x, {}, 0, model);
  const auto boosted = booster_combine(x, {{0, 0, 0, 0}}, 1, model);
  REQUIRE_EQ(base.size(), 3u);
  for (std::size_t c = 0; c < 3; ++c) CHECK_LE(std::abs(base[c] - boosted[c]), 1e-15);
  CHECK_THROWS_AS(booster_combine(x, {{0, 0, 0, 0}}, 2, model), std::invalid_argument);
}

TEST_CASE("Booster.IdentityEncoderIsLinearInSum") {
  auto model = BoosterModel::init(3, 3, 2, 1);
  model.encoder.value() = num::Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const std::vector<double> x{1, 2, 3}, d{0.5, -1, 4};
  std::vector<double> sum(3);
  for (int i = 0; i < 3; ++i) sum[i] = x[i] + d[i];
  const auto a = booster_combine(x, {d}, 1, model);
  const auto b = booster_combine(sum, {}, 0, model);
  for (std::size_t c = 0; c < 2; ++c) CHECK_LE(std::abs(a[c] - b[c]), 1e-12);
}

TEST_CASE("Booster.NotWorseThanBaselineOnSynthetic") {
  const auto& t = trained();
  const auto src = delta_source(t.params);
  const auto cmp = compare_booster(booster_examples(t.train, src, 1), booster_examples(t.test, src, 1), BoosterConfig{});
  CHECK_GE(cmp.booster_accuracy, cmp.baseline_accuracy);
  CHECK_LT(cmp.booster_curve.back(), cmp.booster_curve.front());
}

TEST_CASE("Booster.ExamplesUseTopRegions") {
  const auto& t = trained();
  const auto src = delta_source(t.params);
  const auto ex = booster_examples(t.test, src, 2);
  const auto& item = t.test.items[0];
  const auto top = top_k(src(item), 2);
  REQUIRE_EQ(ex[0].delta.size(), 2u);
  for (std::size_t j = 0; j < item.pool.dim(); ++j) CHECK_EQ(ex[0].delta[1][j], item.pool.features.row(top[1].index)[j]);
  CHECK_EQ(ex[0].label, t.test.label_of(item));
  CHECK_THROWS_AS(booster_examples(t.test, src, 15), std::invalid_argument);
}

TEST_CASE("Highlights.Export") {
  std::mt19937_64 rng(4);
  const auto s = random_probs(rng, 14);
  const auto spec = export_highlights("x", s, 3);
  REQUIRE_EQ(spec.regions.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) CHECK_EQ(spec.regions[i].rank, i + 1);
  std::vector<double> onehot(14, 0.0);
  onehot[0] = 1.0;
  CHECK_EQ(export_highlights("x", onehot, 1).regions[0].rect, (data::Rect{0, 0, 1, 1}));
  CHECK_NOTHROW(export_highlights("x", s, 7));
  try {
    export_highlights("x", s, 8);
    FAIL("K=8 must be refused");
  } catch (const std::invalid_argument& e) {
    CHECK_NE(std::string(e.what()).find("comfort zone"), std::string::npos);
  }
}

TEST_CASE("Highlights.JsonRoundTrip") {
  std::mt19937_64 rng(5);
  const auto spec = export_highlights("item-1", random_probs(rng, 14), 3);
  const auto back = highlights_from_json(highlights_to_json(spec));
  CHECK_EQ(back.id, "item-1");
  CHECK_EQ(back.k, 3u);
  for (std::size_t i = 0; i < 3; ++i) CHECK_EQ(back.regions[i].rect, spec.regions[i].rect);
  CHECK_THROWS_AS(highlights_from_json("{\"id\":\"x\",\"k\":9,\"regions\":[]}"), FormatError);
}
