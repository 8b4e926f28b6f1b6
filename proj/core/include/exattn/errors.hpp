#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace exattn {

// Malformed input file or record. `where` names the file and record/byte offset.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(where) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

// A verification harness detected an inconsistency (e.g. a non-deterministic loss).
class FailedCheck : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An optimizer step could not be applied (e.g. NaN gradient).
class FailedStep : public std::runtime_error {
 public:
  FailedStep(const std::string& parameter, const std::string& what)
      : std::runtime_error("parameter '" + parameter + "': " + what), parameter_(parameter) {}
  const std::string& parameter() const noexcept { return parameter_; }

 private:
  std::string parameter_;
};

// A write would violate an append-once rule.
class ConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A referenced entity (session, trial) does not exist.
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scoring requested before every trial was answered.
class IncompleteError : public std::runtime_error {
 public:
  explicit IncompleteError(std::vector<std::string> missing)
      : std::runtime_error(describe(missing)), missing_(std::move(missing)) {}
  const std::vector<std::string>& missing() const noexcept { return missing_; }

 private:
  static std::string describe(const std::vector<std::string>& ids) {
    std::string s = "unanswered trials:";
    for (const auto& id : ids) s += " " + id;
    return s;
  }
  std::vector<std::string> missing_;
};

}  // namespace exattn
