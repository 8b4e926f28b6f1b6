#include "exattn/study/service.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <random>

#include "exattn/errors.hpp"
#include "json.hpp"

namespace exattn::study {

using nlohmann::json;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

namespace {

std::uint64_t fresh_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string fresh_session_id() {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fresh_seed()));
  return buf;
}

std::vector<SetupOutcome> outcomes_of(const std::vector<ResponseRecord>& records) {
  std::vector<SetupOutcome> out;
  for (const auto& r : records)
    if (r.phase == Phase::setup) out.push_back({r.trial_id, r.correct});
  return out;
}

}  // namespace

StudyService::StudyService(data::Dataset catalog, HighlightSource highlights, StudyConfig config)
    : catalog_(std::move(catalog)),
      highlights_(std::move(highlights)),
      config_(std::move(config)),
      responses_(config_.log_dir / "responses.jsonl"),
      session_log_(config_.log_dir / "sessions.jsonl") {
  if (config_.highlight_k > analysis::kComfortZoneMax)
    throw std::invalid_argument("K=" + std::to_string(config_.highlight_k) + " exceeds the comfort zone of " +
                                std::to_string(analysis::kComfortZoneMax) + " highlighted regions");
  replay_sessions();
}

std::string StudyService::timestamp() const { return config_.clock ? config_.clock() : utc_timestamp(); }

void StudyService::replay_sessions() {
  const auto& path = session_log_.path();
  const auto lines = AppendLog::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = path.string() + ":" + std::to_string(i + 1);
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw FormatError(where, "invalid JSON");
    }
    try {
      const auto id = j.at("session_id").get<std::string>();
      const auto seed = j.at("seed").get<std::uint64_t>();
      const Phase phase = phase_from_string(j.at("phase").get<std::string>());
      if (phase == Phase::setup) {
        DifficultyCounts counts;
        const auto c = j.at("counts").get<std::vector<std::size_t>>();
        if (c.size() != 3) throw FormatError(where, "counts needs 3 entries");
        counts = {c[0], c[1], c[2]};
        Session s;
        s.setup = generate_questionnaire(catalog_, counts, seed, id);
        sessions_[id] = std::move(s);
      } else {
        auto& s = session(id);
        s.followup = make_followup(id, s.setup, seed);
        s.phase = Phase::followup;
      }
    } catch (const json::exception& e) {
      throw FormatError(where, e.what());
    } catch (const NotFoundError& e) {
      throw FormatError(where, e.what());
    }
  }
}

const StudyService::Session& StudyService::session(const std::string& id) const {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

StudyService::Session& StudyService::session(const std::string& id) {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

Questionnaire StudyService::make_followup(const std::string& id, const Questionnaire& setup, std::uint64_t seed) const {
  const auto outcomes = outcomes_of(responses_.records_for(id));
  return build_followup(setup, outcomes, highlights_, config_.highlight_k, seed);
}

SessionInfo StudyService::open_session(Phase phase, std::optional<std::uint64_t> seed,
                                       std::optional<std::string> session_id) {
  std::lock_guard lock(mutex_);
  if (phase == Phase::setup) {
    std::string id = session_id.value_or("");
    if (id.empty()) {
      do id = fresh_session_id();
      while (sessions_.count(id));
    } else if (sessions_.count(id)) {
      throw ConflictError("session '" + id + "' already exists");
    }
    const std::uint64_t s = seed.value_or(fresh_seed());
    Session fresh;
    fresh.setup = generate_questionnaire(catalog_, config_.counts, s, id);
    const auto& c = config_.counts;
    session_log_.append_line(json{{"session_id", id},
                                  {"seed", s},
                                  {"phase", "setup"},
                                  {"counts", {c.easy, c.medium, c.hard}},
                                  {"timestamp", timestamp()}}
                                 .dump());
    const std::size_t n = fresh.setup.trials.size();
    sessions_[id] = std::move(fresh);
    return {id, Phase::setup, s, n};
  }

  if (!session_id || session_id->empty()) throw std::invalid_argument("follow-up phase needs a session_id");
  Session& s = session(*session_id);
  if (s.followup) return {*session_id, Phase::followup, s.followup->seed, s.followup->trials.size()};
  std::vector<std::string> missing;
  for (const auto& t : s.setup.trials)
    if (!responses_.contains(*session_id, t.id, Phase::setup)) missing.push_back(t.id);
  if (!missing.empty()) throw IncompleteError(std::move(missing));
  const std::uint64_t fseed = seed.value_or(fresh_seed());
  auto followup = make_followup(*session_id, s.setup, fseed);
  session_log_.append_line(
      json{{"session_id", *session_id}, {"seed", fseed}, {"phase", "followup"}, {"timestamp", timestamp()}}.dump());
  s.followup = std::move(followup);
  s.phase = Phase::followup;
  return {*session_id, Phase::followup, fseed, s.followup->trials.size()};
}

const Questionnaire& StudyService::questionnaire(const std::string& session_id, Phase phase) const {
  std::lock_guard lock(mutex_);
  const Session& s = session(session_id);
  if (phase == Phase::setup) return s.setup;
  if (!s.followup) throw NotFoundError("session '" + session_id + "' has no follow-up phase");
  return *s.followup;
}

std::vector<std::string> StudyService::session_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

NextTrial StudyService::next_trial(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  const Session& s = session(session_id);
  const Questionnaire& q = s.phase == Phase::setup ? s.setup : *s.followup;
  NextTrial out;
  out.phase = s.phase;
  out.total = q.trials.size();
  for (std::size_t i = 0; i < q.trials.size(); ++i) {
    if (responses_.contains(session_id, q.trials[i].id, s.phase)) continue;
    out.position = i;
    out.trial = q.trials[i];
    if (s.phase == Phase::setup) out.trial->highlights.reset();
    return out;
  }
  out.position = q.trials.size();
  return out;
}

bool StudyService::submit(const std::string& session_id, const std::string& trial_id, std::size_t choice) {
  std::lock_guard lock(mutex_);
  const Session& s = session(session_id);
  const Questionnaire& q = s.phase == Phase::setup ? s.setup : *s.followup;
  const Trial* t = q.find(trial_id);
  if (!t) throw NotFoundError("trial '" + trial_id + "' is not part of the " + std::string(to_string(s.phase)) +
                              " phase of session '" + session_id + "'");
  if (choice >= kGallerySize)
    throw std::invalid_argument("choice " + std::to_string(choice) + " outside gallery positions 0.." +
                                std::to_string(kGallerySize - 1));
  ResponseRecord r;
  r.session_id = session_id;
  r.trial_id = trial_id;
  r.choice = choice;
  r.correct = choice == t->answer;
  r.timestamp = timestamp();
  r.phase = s.phase;
  r.difficulty = t->difficulty;
  r.scorable = t->scorable;
  r.source_trial_id = t->source_trial_id;
  responses_.append(r);
  return r.correct;
}

SessionReport StudyService::report(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  const Session& s = session(session_id);
  const auto records = responses_.records_for(session_id);
  SessionReport out;
  out.session_id = session_id;
  out.phase = s.phase;
  out.score = tally(s.setup, records, config_.weights);
  if (s.followup) {
    const auto fu = tally(*s.followup, records, config_.weights);
    for (const auto& level : fu.levels) {
      out.followup_total += level.total;
      out.followup_answered += level.answered;
    }
    out.followup_complete = fu.complete;
    if (fu.complete) {
      std::vector<ResponseRecord> setup, followup;
      for (const auto& r : records) (r.phase == Phase::setup ? setup : followup).push_back(r);
      const auto c = compute_cp_wcp(setup, followup, config_.weights);
      out.score.cp = c.cp;
      out.score.wcp = c.wcp;
    }
  }
  return out;
}

}  // namespace exattn::study
