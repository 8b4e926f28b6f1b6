#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "exattn/analysis/highlights.hpp"
#include "exattn/data/dataset.hpp"

namespace exattn::study {

inline constexpr std::size_t kGallerySize = 5;

// easy: distractors from other orders; medium: same order, other families;
// hard: same family, other species.
enum class Difficulty { easy, medium, hard };
enum class Phase { setup, followup };

std::string_view to_string(Difficulty d);
std::string_view to_string(Phase p);
Difficulty difficulty_from_string(std::string_view s);
Phase phase_from_string(std::string_view s);

struct LevelWeights {
  double easy = 0.5;
  double medium = 1.0;
  double hard = 1.5;

  double of(Difficulty d) const noexcept;
};

struct DifficultyCounts {
  std::size_t easy = 90;
  std::size_t medium = 120;
  std::size_t hard = 90;

  std::size_t total() const noexcept { return easy + medium + hard; }
  std::size_t of(Difficulty d) const noexcept;
};

double full_mark(const DifficultyCounts& counts, const LevelWeights& weights = {});

struct Trial {
  std::string id;
  std::string query;
  std::array<std::string, kGallerySize> gallery;
  std::size_t answer = 0;  // gallery position of the query's species
  Difficulty difficulty = Difficulty::easy;
  Phase phase = Phase::setup;
  bool scorable = true;               // false for repeated-success fillers
  std::string source_trial_id;        // follow-up: the setup trial repeated
  std::optional<analysis::HighlightSpec> highlights;  // follow-up only
};

struct Questionnaire {
  std::string session_id;
  std::uint64_t seed = 0;
  Phase phase = Phase::setup;
  DifficultyCounts counts;
  std::vector<Trial> trials;

  const Trial* find(const std::string& trial_id) const;
};

// Trials in randomized order with randomized galleries. Throws
// std::invalid_argument naming the first bucket the catalog cannot serve.
Questionnaire generate_questionnaire(const data::Dataset& catalog, const DifficultyCounts& counts, std::uint64_t seed,
                                     std::string session_id = {});

// Attention over the query's regions used to build follow-up highlights.
using HighlightSource = std::function<std::optional<std::vector<double>>(const std::string& item_id)>;

struct SetupOutcome {
  std::string trial_id;
  bool correct = false;
};

// Every failed setup trial (scorable, highlighted) plus min(#successes,
// #failures) repeated successes marked not scorable, in a fresh random order
// with fresh gallery permutations. Throws std::invalid_argument when k exceeds
// the comfort zone or a failed query has no highlight attention.
Questionnaire build_followup(const Questionnaire& setup, std::span<const SetupOutcome> outcomes,
                             const HighlightSource& highlights, std::size_t k, std::uint64_t seed);

}  // namespace exattn::study
