#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ait/canonical.hpp"
#include "ait/error.hpp"
#include "ait/net.hpp"

namespace ait::wire {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxFrameBytes = 16u * 1024u * 1024u;

enum class MsgType {
  REGISTER,
  REGISTER_ACK,
  HEALTH_REPORT,
  DISPATCH_STEP,
  STEP_STATUS,
  STEP_RESULT,
  RUN_COMPLETE,
  ABORT,
  SUT_REQUEST,
  SUT_RESPONSE,
  ERROR,
  // control port
  SUBMIT,
  STATUS,
  LIST,
  REPLY,
};

std::string_view to_string(MsgType t);
std::optional<MsgType> parse_msg_type(std::string_view s);

struct WireMessage {
  int version = kProtocolVersion;
  MsgType type = MsgType::ERROR;
  std::optional<std::string> run_id;
  std::uint64_t seq = 0;
  std::optional<std::string> token;
  Json payload = Json::object();

  friend bool operator==(const WireMessage&, const WireMessage&) = default;
};

WireMessage make(MsgType type, Json payload = Json::object(), std::optional<std::string> run_id = std::nullopt);
WireMessage make_error(std::string_view code, std::string_view message,
                       std::optional<std::string> run_id = std::nullopt);

struct HealthSnapshot {
  double cpu_pct = 0;
  double mem_pct = 0;
  double disk_pct = 0;
  bool hardware_ok = true;
  std::uint64_t active_steps = 0;
  std::int64_t timestamp = 0;  // unix ms

  friend bool operator==(const HealthSnapshot&, const HealthSnapshot&) = default;
};

void to_json(Json& j, const HealthSnapshot& h);
/// Throws SchemaError if fields are missing or percentages leave [0,100].
void from_json(const Json& j, HealthSnapshot& h);

/// Throws SchemaError if the payload does not match the schema of `type`.
void check_payload(MsgType type, const std::optional<std::string>& run_id, const Json& payload);

/// Canonical JSON body of a message (no length prefix).
std::string encode_body(const WireMessage& msg);
/// 4-byte big-endian body length followed by the canonical body.
std::vector<std::uint8_t> encode(const WireMessage& msg);

/// Parses a body. Throws VersionError for version != 1, SchemaError for
/// unknown types or bad payloads.
WireMessage decode_body(std::string_view body);
/// Decodes exactly one complete frame. Throws FrameError on truncation,
/// oversize or trailing bytes.
WireMessage decode(std::span<const std::uint8_t> frame);

/// Incremental frame reassembly over an arbitrarily chunked byte stream.
class FrameDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete message, if any. Throws FrameError on an oversized
  /// length prefix (stream unusable afterwards) and SchemaError on a bad
  /// body (the frame is consumed; the stream stays aligned).
  std::optional<WireMessage> next();
  /// Call at end of stream: throws FrameError if a partial frame is buffered.
  void finish() const;
  std::size_t buffered() const { return buf_.size() - off_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t off_ = 0;
};

/// Peer closed the connection cleanly between frames.
struct ConnectionClosed : IoError {
  ConnectionClosed() : IoError("connection closed") {}
};

/// One framed connection. Writes are serialized by an internal mutex and
/// stamped with a per-connection increasing seq; a single reader calls
/// receive(). Incoming seq must strictly increase.
class Connection {
 public:
  explicit Connection(net::Socket sock) : sock_(std::move(sock)) {}

  /// Stamps seq (and token, if set) and writes the frame. Returns the seq used.
  std::uint64_t send(WireMessage msg);
  /// nullopt on timeout. Throws ConnectionClosed, FrameError, SchemaError, IoError.
  std::optional<WireMessage> receive(std::optional<std::chrono::milliseconds> timeout);
  /// Sends msg and waits for the next message (for request/response peers).
  WireMessage request(WireMessage msg, std::chrono::milliseconds timeout);

  void set_token(std::string token) { token_ = std::move(token); }
  const std::optional<std::string>& token() const { return token_; }
  void shutdown() { sock_.shutdown(); }

 private:
  net::Socket sock_;
  std::mutex write_mu_;
  std::uint64_t next_seq_ = 1;
  std::optional<std::string> token_;
  FrameDecoder decoder_;
  std::optional<std::uint64_t> last_in_seq_;
};

struct RegisterInfo {
  std::string actor_id;
  std::string address;
  std::chrono::milliseconds health_period{2000};
  std::optional<HealthSnapshot> health;
};

/// Actor side of registration: sends REGISTER, waits for REGISTER_ACK and
/// installs the session token on `conn`. Returns the token. Throws
/// HandshakeTimeout or HandshakeRejected (code from the peer's ERROR).
std::string handshake(Connection& conn, const RegisterInfo& info, std::chrono::milliseconds timeout);

}  // namespace ait::wire
