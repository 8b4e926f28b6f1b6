#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "exattn/study/questionnaire.hpp"

namespace exattn::study {

struct ResponseRecord {
  std::string session_id;
  std::string trial_id;
  std::size_t choice = 0;
  bool correct = false;
  std::string timestamp;  // ISO-8601 UTC
  Phase phase = Phase::setup;
  Difficulty difficulty = Difficulty::easy;
  bool scorable = true;
  std::string source_trial_id;

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

std::string record_to_json(const ResponseRecord& r);
ResponseRecord record_from_json(const std::string& line, const std::string& where = "record");

/// Durable line-oriented append-only file. Each append is flushed and fsynced
/// before it returns. An unterminated final line (a torn write) is dropped on open.
class AppendLog {
 public:
  explicit AppendLog(std::filesystem::path path);
  ~AppendLog();
  AppendLog(const AppendLog&) = delete;
  AppendLog& operator=(const AppendLog&) = delete;

  void append_line(const std::string& line);
  const std::filesystem::path& path() const noexcept { return path_; }

  // Complete lines currently in the file.
  static std::vector<std::string> read_lines(const std::filesystem::path& path);

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

/// Response stream keyed by (session, trial, phase); each key is written once.
class ResponseLog {
 public:
  explicit ResponseLog(std::filesystem::path path);

  // Throws ConflictError if the key already has a record.
  void append(const ResponseRecord& r);
  bool contains(const std::string& session_id, const std::string& trial_id, Phase phase) const;

  std::vector<ResponseRecord> records() const;
  std::vector<ResponseRecord> records_for(const std::string& session_id) const;
  const std::filesystem::path& path() const noexcept { return log_.path(); }

 private:
  mutable std::mutex mutex_;
  AppendLog log_;
  std::vector<ResponseRecord> records_;
  std::set<std::tuple<std::string, std::string, Phase>> keys_;
};

// Records of a log file in write order; a missing file is empty.
std::vector<ResponseRecord> replay_log(const std::filesystem::path& path);

}  // namespace exattn::study
