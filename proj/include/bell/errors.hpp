#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bell {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration: unknown names, invalid patterns, cyclic plans.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Too many malformed dataset lines, or an unusable dataset file.
class DatasetError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// HTTP 401/403. Never retried.
class AuthError : public Error {
 public:
  AuthError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

/// Transient failures persisted past the retry budget. status is 0 for
/// network-level failures (timeouts, refused connections).
class BackendUnavailableError : public Error {
 public:
  BackendUnavailableError(int last_status, int attempts, const std::string& what)
      : Error(what), last_status_(last_status), attempts_(attempts) {}
  int last_status() const noexcept { return last_status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  int last_status_;
  int attempts_;
};

/// Response body did not match the expected wire format.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class DegenerateEmbeddingError : public Error {
 public:
  using Error::Error;
};

/// A judge metric could not be obtained for one record.
class MetricUnavailableError : public Error {
 public:
  MetricUnavailableError(std::string metric, const std::string& what)
      : Error(what), metric_(std::move(metric)) {}
  const std::string& metric() const noexcept { return metric_; }

 private:
  std::string metric_;
};

class EmptyAggregateError : public Error {
 public:
  using Error::Error;
};

class IncompleteScorecardError : public Error {
 public:
  using Error::Error;
};

/// Resume refused: the current configuration hashes differently from the
/// one recorded in the manifest. changed() lists the differing settings.
class ResumeMismatchError : public Error {
 public:
  ResumeMismatchError(std::vector<std::string> changed, const std::string& what)
      : Error(what), changed_(std::move(changed)) {}
  const std::vector<std::string>& changed() const noexcept { return changed_; }

 private:
  std::vector<std::string> changed_;
};

}  // namespace bell
