#include "exattn/study/response_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "exattn/errors.hpp"
#include "json.hpp"

namespace exattn::study {

using nlohmann::json;

std::string record_to_json(const ResponseRecord& r) {
  json j{{"session_id", r.session_id},
         {"trial_id", r.trial_id},
         {"choice", r.choice},
         {"correct", r.correct},
         {"timestamp", r.timestamp},
         {"phase", std::string(to_string(r.phase))},
         {"difficulty", std::string(to_string(r.difficulty))},
         {"scorable", r.scorable},
         {"source_trial_id", r.source_trial_id}};
  return j.dump();
}

ResponseRecord record_from_json(const std::string& line, const std::string& where) {
  try {
    const json j = json::parse(line);
    ResponseRecord r;
    r.session_id = j.at("session_id").get<std::string>();
    r.trial_id = j.at("trial_id").get<std::string>();
    r.choice = j.at("choice").get<std::size_t>();
    r.correct = j.at("correct").get<bool>();
    r.timestamp = j.value("timestamp", std::string{});
    r.phase = phase_from_string(j.at("phase").get<std::string>());
    r.difficulty = difficulty_from_string(j.at("difficulty").get<std::string>());
    r.scorable = j.value("scorable", true);
    r.source_trial_id = j.value("source_trial_id", std::string{});
    return r;
  } catch (const json::parse_error& e) {
    throw FormatError(where + " (byte " + std::to_string(e.byte) + ")", "invalid JSON");
  } catch (const json::exception& e) {
    throw FormatError(where, e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(where, e.what());
  }
}

std::vector<std::string> AppendLog::read_lines(const std::filesystem::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path, std::ios::binary);
  if (!in) return lines;
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::size_t start = 0;
  for (std::size_t nl; (nl = text.find('\n', start)) != std::string::npos; start = nl + 1) {
    if (nl > start) lines.push_back(text.substr(start, nl - start));
  }
  return lines;
}

AppendLog::AppendLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const auto last = text.rfind('\n');
    const std::size_t keep = last == std::string::npos ? 0 : last + 1;
    if (keep != text.size()) std::filesystem::resize_file(path_, keep);
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw std::runtime_error("cannot open log " + path_.string() + ": " + std::strerror(errno));
}

AppendLog::~AppendLog() {
  if (fd_ >= 0) ::close(fd_);
}

void AppendLog::append_line(const std::string& line) {
  const std::string data = line + "\n";
  std::size_t written = 0;
  while (written < data.size()) {
    const ssize_t n = ::write(fd_, data.data() + written, data.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error("write to " + path_.string() + " failed: " + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) throw std::runtime_error("fsync of " + path_.string() + " failed: " + std::strerror(errno));
}

std::vector<ResponseRecord> replay_log(const std::filesystem::path& path) {
  std::vector<ResponseRecord> out;
  const auto lines = AppendLog::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i)
    out.push_back(record_from_json(lines[i], path.string() + ":" + std::to_string(i + 1)));
  return out;
}

ResponseLog::ResponseLog(std::filesystem::path path) : log_(std::move(path)) {
  for (auto& r : replay_log(log_.path())) {
    if (!keys_.emplace(r.session_id, r.trial_id, r.phase).second)
      throw FormatError(log_.path().string(), "duplicate record for trial " + r.trial_id + " in session " + r.session_id);
    records_.push_back(std::move(r));
  }
}

void ResponseLog::append(const ResponseRecord& r) {
  std::lock_guard lock(mutex_);
  auto key = std::make_tuple(r.session_id, r.trial_id, r.phase);
  if (keys_.count(key))
    throw ConflictError("trial " + r.trial_id + " already answered in " + std::string(to_string(r.phase)) +
                        " phase of session " + r.session_id);
  log_.append_line(record_to_json(r));
  keys_.insert(std::move(key));
  records_.push_back(r);
}

bool ResponseLog::contains(const std::string& session_id, const std::string& trial_id, Phase phase) const {
  std::lock_guard lock(mutex_);
  return keys_.count({session_id, trial_id, phase}) != 0;
}

std::vector<ResponseRecord> ResponseLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::vector<ResponseRecord> ResponseLog::records_for(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  std::vector<ResponseRecord> out;
  for (const auto& r : records_)
    if (r.session_id == session_id) out.push_back(r);
  return out;
}

}  // namespace exattn::study
