#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>

#include "exattn/study/questionnaire.hpp"
#include "exattn/study/response_log.hpp"

namespace exattn::study {

struct LevelTally {
  std::size_t total = 0;
  std::size_t answered = 0;
  std::size_t correct = 0;
  double points = 0.0;
};

struct ScoreReport {
  double points = 0.0;
  double full_mark = 0.0;
  std::array<LevelTally, 3> levels{};  // indexed by Difficulty
  bool complete = false;
  std::optional<double> cp;
  std::optional<double> wcp;

  const LevelTally& level(Difficulty d) const { return levels[static_cast<std::size_t>(d)]; }
};

// Points over the scorable trials of `q`, from the records of q's phase whose
// trial ids belong to q. Correctness is the chosen position against the trial's answer.
ScoreReport tally(const Questionnaire& q, std::span<const ResponseRecord> responses, const LevelWeights& weights = {});

// As tally, but throws IncompleteError listing every unanswered scorable trial.
ScoreReport score(const Questionnaire& q, std::span<const ResponseRecord> responses, const LevelWeights& weights = {});

struct CorrectionReport {
  std::optional<double> cp;   // empty when there were no failures
  std::optional<double> wcp;
  std::array<std::size_t, 3> failures{};
  std::array<std::size_t, 3> corrections{};
};

// CP = reverted failures / failures. WCP = Σ_l w_l r_l / Σ_l w_l over levels
// with at least one failure, r_l the level's correction rate. Follow-up
// records that are not scorable are ignored. Throws IncompleteError when a
// setup failure has no scorable follow-up record.
CorrectionReport compute_cp_wcp(std::span<const ResponseRecord> setup, std::span<const ResponseRecord> followup,
                                const LevelWeights& weights = {});

}  // namespace exattn::study
