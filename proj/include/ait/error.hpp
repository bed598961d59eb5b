#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ait {

/// Base of every exception the framework throws. `code()` is a stable
/// machine-readable identifier (e.g. "SCHEMA", "FRAME", "UNKNOWN_RUN").
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct SyntaxError : Error {
  explicit SyntaxError(const std::string& w) : Error("SYNTAX", w) {}
};
struct SchemaError : Error {
  explicit SchemaError(const std::string& w) : Error("SCHEMA", w) {}
  SchemaError(std::string code, const std::string& w) : Error(std::move(code), w) {}
};
struct ExpansionError : Error {
  explicit ExpansionError(const std::string& w) : Error("EXPANSION", w) {}
};
struct EncodeError : Error {
  explicit EncodeError(const std::string& w) : Error("ENCODE", w) {}
};
struct FrameError : Error {
  explicit FrameError(const std::string& w) : Error("FRAME", w) {}
};
/// Decoded frame carried a protocol version other than the one we speak.
struct VersionError : SchemaError {
  VersionError(const std::string& w, long long seq)
      : SchemaError("UNSUPPORTED_VERSION", w), seq(seq) {}
  long long seq;
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error("IO", w) {}
};
struct TimeoutError : Error {
  explicit TimeoutError(const std::string& w) : Error("TIMEOUT", w) {}
};
struct HandshakeTimeout : Error {
  explicit HandshakeTimeout(const std::string& w) : Error("HANDSHAKE_TIMEOUT", w) {}
};
struct HandshakeRejected : Error {
  HandshakeRejected(std::string code, const std::string& w) : Error(std::move(code), w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("CONFIG", w) {}
};
struct AdapterError : Error {
  /// kind is one of "timeout", "refused", "malformed", "unsupported", "remote".
  AdapterError(std::string kind, const std::string& w) : Error("ADAPTER", w), kind(std::move(kind)) {}
  std::string kind;
};
struct OracleError : Error {
  explicit OracleError(const std::string& w) : Error("ORACLE", w) {}
};
struct UnknownRun : Error {
  explicit UnknownRun(const std::string& id) : Error("UNKNOWN_RUN", "unknown run: " + id) {}
};
struct RejectedError : Error {
  RejectedError(std::string run_id, std::vector<std::string> reasons)
      : Error("REJECTED", "run rejected"), run_id(std::move(run_id)), reasons(std::move(reasons)) {}
  std::string run_id;
  std::vector<std::string> reasons;
};
struct PartialCollection : Error {
  explicit PartialCollection(std::vector<std::string> missing)
      : Error("PARTIAL_COLLECTION", "results missing from some actors"), missing_actor_ids(std::move(missing)) {}
  std::vector<std::string> missing_actor_ids;
};
struct ConflictError : Error {
  explicit ConflictError(const std::string& w) : Error("CONFLICT", w) {}
};
struct IncompleteRecord : Error {
  explicit IncompleteRecord(const std::string& w) : Error("INCOMPLETE_RECORD", w) {}
};

}  // namespace ait
