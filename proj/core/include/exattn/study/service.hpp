#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "exattn/data/dataset.hpp"
#include "exattn/study/questionnaire.hpp"
#include "exattn/study/response_log.hpp"
#include "exattn/study/scoring.hpp"

namespace exattn::study {

struct StudyConfig {
  DifficultyCounts counts;
  std::size_t highlight_k = analysis::kDefaultHighlightK;
  LevelWeights weights;
  std::filesystem::path log_dir;  // holds responses.jsonl and sessions.jsonl
  std::function<std::string()> clock;  // ISO-8601 timestamps; UTC wall clock when empty
};

struct SessionInfo {
  std::string session_id;
  Phase phase = Phase::setup;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
};

struct NextTrial {
  Phase phase = Phase::setup;
  std::size_t position = 0;  // 0-based index of `trial` in the phase
  std::size_t total = 0;
  std::optional<Trial> trial;  // empty once the phase is complete
};

struct SessionReport {
  std::string session_id;
  Phase phase = Phase::setup;
  ScoreReport score;  // setup points; cp/wcp once the follow-up is complete
  std::size_t followup_total = 0;     // scorable follow-up trials
  std::size_t followup_answered = 0;
  bool followup_complete = false;
};

/// Transport-independent study protocol. Every state change is appended to
/// the logs before it is acknowledged; constructing over an existing log
/// directory replays it.
class StudyService {
 public:
  StudyService(data::Dataset catalog, HighlightSource highlights, StudyConfig config);

  // Setup opens a new session (ConflictError if the id exists). Follow-up
  // requires an existing session whose setup phase is complete
  // (IncompleteError otherwise) and is idempotent once open.
  SessionInfo open_session(Phase phase, std::optional<std::uint64_t> seed = std::nullopt,
                           std::optional<std::string> session_id = std::nullopt);

  // First unanswered trial of the current phase. Throws NotFoundError.
  NextTrial next_trial(const std::string& session_id) const;

  // Records the answer and returns whether it was correct. Throws
  // NotFoundError (session/trial), ConflictError (already answered) or
  // std::invalid_argument (choice outside the gallery).
  bool submit(const std::string& session_id, const std::string& trial_id, std::size_t choice);

  SessionReport report(const std::string& session_id) const;

  const Questionnaire& questionnaire(const std::string& session_id, Phase phase) const;
  std::vector<std::string> session_ids() const;
  const ResponseLog& responses() const noexcept { return responses_; }
  const StudyConfig& config() const noexcept { return config_; }

 private:
  struct Session {
    Questionnaire setup;
    std::optional<Questionnaire> followup;
    Phase phase = Phase::setup;
  };

  const Session& session(const std::string& id) const;
  Session& session(const std::string& id);
  Questionnaire make_followup(const std::string& id, const Questionnaire& setup, std::uint64_t seed) const;
  std::string timestamp() const;
  void replay_sessions();

  data::Dataset catalog_;
  HighlightSource highlights_;
  StudyConfig config_;
  mutable std::mutex mutex_;
  ResponseLog responses_;
  AppendLog session_log_;
  std::map<std::string, Session> sessions_;
};

std::string utc_timestamp();

}  // namespace exattn::study
