#include "exattn/study/scoring.hpp"

#include <map>

#include "exattn/errors.hpp"

namespace exattn::study {

namespace {

std::size_t slot(Difficulty d) { return static_cast<std::size_t>(d); }

ScoreReport tally_impl(const Questionnaire& q, std::span<const ResponseRecord> responses, const LevelWeights& w,
                       std::vector<std::string>* missing) {
  std::map<std::string, const ResponseRecord*> by_trial;
  for (const auto& r : responses)
    if (r.phase == q.phase) by_trial.emplace(r.trial_id, &r);
  ScoreReport report;
  report.complete = true;
  for (const auto& t : q.trials) {
    if (!t.scorable) continue;
    LevelTally& level = report.levels[slot(t.difficulty)];
    ++level.total;
    report.full_mark += w.of(t.difficulty);
    const auto it = by_trial.find(t.id);
    if (it == by_trial.end()) {
      report.complete = false;
      if (missing) missing->push_back(t.id);
      continue;
    }
    ++level.answered;
    if (it->second->choice == t.answer) {
      ++level.correct;
      level.points += w.of(t.difficulty);
      report.points += w.of(t.difficulty);
    }
  }
  return report;
}

}  // namespace

ScoreReport tally(const Questionnaire& q, std::span<const ResponseRecord> responses, const LevelWeights& weights) {
  return tally_impl(q, responses, weights, nullptr);
}

ScoreReport score(const Questionnaire& q, std::span<const ResponseRecord> responses, const LevelWeights& weights) {
  std::vector<std::string> missing;
  auto report = tally_impl(q, responses, weights, &missing);
  if (!missing.empty()) throw IncompleteError(std::move(missing));
  return report;
}

CorrectionReport compute_cp_wcp(std::span<const ResponseRecord> setup, std::span<const ResponseRecord> followup,
                                const LevelWeights& weights) {
  std::map<std::string, const ResponseRecord*> retry;
  for (const auto& r : followup)
    if (r.scorable) retry.emplace(r.source_trial_id, &r);

  CorrectionReport out;
  std::vector<std::string> missing;
  for (const auto& r : setup) {
    if (r.correct) continue;
    ++out.failures[slot(r.difficulty)];
    const auto it = retry.find(r.trial_id);
    if (it == retry.end()) {
      missing.push_back(r.trial_id);
      continue;
    }
    if (it->second->correct) ++out.corrections[slot(r.difficulty)];
  }
  if (!missing.empty()) throw IncompleteError(std::move(missing));

  std::size_t failures = 0, corrections = 0;
  double weighted = 0.0, weight_sum = 0.0;
  for (Difficulty d : {Difficulty::easy, Difficulty::medium, Difficulty::hard}) {
    const std::size_t f = out.failures[slot(d)];
    if (f == 0) continue;
    const std::size_t c = out.corrections[slot(d)];
    failures += f;
    corrections += c;
    const double rate = static_cast<double>(c) / static_cast<double>(f);
    weighted += weights.of(d) * rate;
    weight_sum += weights.of(d);
  }
  if (failures == 0) return out;
  out.cp = static_cast<double>(corrections) / static_cast<double>(failures);
  if (weight_sum > 0.0) out.wcp = weighted / weight_sum;
  return out;
}

}  // namespace exattn::study
