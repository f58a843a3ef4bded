#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cascade {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dimension of an argument does not match the model/problem.
class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, int expected, int got)
      : Error(what + ": expected dimension " + std::to_string(expected) +
              ", got " + std::to_string(got)) {}
};

/// Robot model file is malformed or violates an invariant.
class ModelError : public Error {
 public:
  ModelError(const std::string& file, int line, const std::string& msg)
      : Error(file + ":" + std::to_string(line) + ": " + msg),
        file_(file),
        line_(line) {}
  explicit ModelError(const std::string& msg) : Error(msg), line_(0) {}

  const std::string& file() const { return file_; }
  int line() const { return line_; }

 private:
  std::string file_;
  int line_ = 0;
};

/// A kinematic singularity makes the requested computation ill posed.
/// Carries the names of the contacts (or coordinates) at fault.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& msg, std::vector<std::string> culprits)
      : Error(msg + (culprits.empty() ? "" : " [" + join(culprits) + "]")),
        culprits_(std::move(culprits)) {}

  const std::vector<std::string>& culprits() const { return culprits_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
    return out;
  }
  std::vector<std::string> culprits_;
};

/// The controller was queried with a policy packet that is too old.
class StalenessError : public Error {
 public:
  StalenessError(double query_time, double packet_end)
      : Error("policy packet stale: query t=" + std::to_string(query_time) +
              " beyond packet window end t=" + std::to_string(packet_end)) {}
};

}  // namespace cascade
