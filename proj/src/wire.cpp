#include "ait/wire.hpp"

#include <array>
#include <set>

namespace ait::wire {

namespace {

constexpr std::array<std::pair<MsgType, std::string_view>, 15> kTypeNames{{
    {MsgType::REGISTER, "REGISTER"},
    {MsgType::REGISTER_ACK, "REGISTER_ACK"},
    {MsgType::HEALTH_REPORT, "HEALTH_REPORT"},
    {MsgType::DISPATCH_STEP, "DISPATCH_STEP"},
    {MsgType::STEP_STATUS, "STEP_STATUS"},
    {MsgType::STEP_RESULT, "STEP_RESULT"},
    {MsgType::RUN_COMPLETE, "RUN_COMPLETE"},
    {MsgType::ABORT, "ABORT"},
    {MsgType::SUT_REQUEST, "SUT_REQUEST"},
    {MsgType::SUT_RESPONSE, "SUT_RESPONSE"},
    {MsgType::ERROR, "ERROR"},
    {MsgType::SUBMIT, "SUBMIT"},
    {MsgType::STATUS, "STATUS"},
    {MsgType::LIST, "LIST"},
    {MsgType::REPLY, "REPLY"},
}};

void require(bool cond, const std::string& what) {
  if (!cond) throw SchemaError(what);
}

void require_string(const Json& p, const char* key, bool non_empty = false) {
  require(p.contains(key) && p[key].is_string(), std::string("payload.") + key + " must be a string");
  if (non_empty) require(!p[key].get<std::string>().empty(), std::string("payload.") + key + " must be non-empty");
}

void require_uint(const Json& p, const char* key) {
  require(p.contains(key) && is_uint(p[key]), std::string("payload.") + key + " must be a non-negative integer");
}

void require_object(const Json& p, const char* key) {
  require(p.contains(key) && p[key].is_object(), std::string("payload.") + key + " must be an object");
}

void require_run_id(const std::optional<std::string>& run_id, MsgType t) {
  require(run_id.has_value() && !run_id->empty(), std::string(to_string(t)) + " requires run_id");
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

}  // namespace

std::string_view to_string(MsgType t) {
  for (const auto& [type, name] : kTypeNames)
    if (type == t) return name;
  return "?";
}

std::optional<MsgType> parse_msg_type(std::string_view s) {
  for (const auto& [type, name] : kTypeNames)
    if (name == s) return type;
  return std::nullopt;
}

WireMessage make(MsgType type, Json payload, std::optional<std::string> run_id) {
  WireMessage m;
  m.type = type;
  m.payload = std::move(payload);
  m.run_id = std::move(run_id);
  return m;
}

WireMessage make_error(std::string_view code, std::string_view message, std::optional<std::string> run_id) {
  return make(MsgType::ERROR, Json{{"code", code}, {"message", message}}, std::move(run_id));
}

void to_json(Json& j, const HealthSnapshot& h) {
  j = Json{{"cpu_pct", h.cpu_pct},         {"mem_pct", h.mem_pct},           {"disk_pct", h.disk_pct},
           {"hardware_ok", h.hardware_ok}, {"active_steps", h.active_steps}, {"timestamp", h.timestamp}};
}

void from_json(const Json& j, HealthSnapshot& h) {
  require(j.is_object(), "health must be an object");
  auto pct = [&](const char* key) {
    require(j.contains(key) && j[key].is_number(), std::string("health.") + key + " must be a number");
    double v = j[key].get<double>();
    require(v >= 0.0 && v <= 100.0, std::string("health.") + key + " outside [0,100]");
    return v;
  };
  h.cpu_pct = pct("cpu_pct");
  h.mem_pct = pct("mem_pct");
  h.disk_pct = pct("disk_pct");
  require(j.contains("hardware_ok") && j["hardware_ok"].is_boolean(), "health.hardware_ok must be a boolean");
  h.hardware_ok = j["hardware_ok"].get<bool>();
  require_uint(j, "active_steps");
  h.active_steps = j["active_steps"].get<std::uint64_t>();
  require(j.contains("timestamp") && j["timestamp"].is_number_integer(), "health.timestamp must be an integer");
  h.timestamp = j["timestamp"].get<std::int64_t>();
}

void check_payload(MsgType type, const std::optional<std::string>& run_id, const Json& p) {
  require(p.is_object(), "payload must be an object");
  switch (type) {
    case MsgType::REGISTER:
      require_string(p, "actor_id", true);
      require_string(p, "address");
      if (p.contains("health_period_ms")) {
        require(is_uint(p["health_period_ms"]) && p["health_period_ms"].get<std::uint64_t>() > 0,
                "payload.health_period_ms must be a positive integer");
      }
      if (p.contains("health")) {
        HealthSnapshot h;
        from_json(p["health"], h);
      }
      break;
    case MsgType::REGISTER_ACK:
      require_string(p, "token", true);
      break;
    case MsgType::HEALTH_REPORT: {
      require(p.contains("health"), "payload.health missing");
      HealthSnapshot h;
      from_json(p["health"], h);
      break;
    }
    case MsgType::DISPATCH_STEP:
      require_run_id(run_id, type);
      require_uint(p, "step_index");
      require_string(p, "keyword", true);
      require_object(p, "params");
      break;
    case MsgType::STEP_STATUS:
      require_run_id(run_id, type);
      require_uint(p, "step_index");
      break;
    case MsgType::STEP_RESULT: {
      require_run_id(run_id, type);
      require_uint(p, "step_index");
      require_string(p, "verdict");
      static const std::set<std::string> kVerdicts{"PASS", "FAIL", "ERROR", "SKIPPED"};
      require(kVerdicts.count(p["verdict"].get<std::string>()) == 1, "payload.verdict not a known verdict");
      break;
    }
    case MsgType::RUN_COMPLETE:
    case MsgType::ABORT:
      require_run_id(run_id, type);
      break;
    case MsgType::SUT_REQUEST:
    case MsgType::SUT_RESPONSE:
      require_string(p, "op", true);
      require_object(p, "body");
      break;
    case MsgType::ERROR:
      require_string(p, "code", true);
      require_string(p, "message");
      break;
    case MsgType::SUBMIT:
      require_string(p, "script");
      require_string(p, "config");
      break;
    case MsgType::STATUS:
    case MsgType::LIST:
    case MsgType::REPLY:
      break;
  }
}

std::string encode_body(const WireMessage& msg) {
  if (msg.version != kProtocolVersion) throw EncodeError("cannot encode protocol version " + std::to_string(msg.version));
  try {
    check_payload(msg.type, msg.run_id, msg.payload);
  } catch (const SchemaError& e) {
    throw EncodeError(std::string("invalid ") + std::string(to_string(msg.type)) + ": " + e.what());
  }
  Json j{{"version", msg.version}, {"type", to_string(msg.type)}, {"seq", msg.seq}, {"payload", msg.payload}};
  if (msg.run_id) j["run_id"] = *msg.run_id;
  if (msg.token) j["token"] = *msg.token;
  auto body = canonical(j);
  if (body.size() > kMaxFrameBytes) throw EncodeError("message body exceeds 16 MiB");
  return body;
}

std::vector<std::uint8_t> encode(const WireMessage& msg) {
  auto body = encode_body(msg);
  std::vector<std::uint8_t> out;
  out.reserve(body.size() + 4);
  put_be32(out, static_cast<std::uint32_t>(body.size()));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

WireMessage decode_body(std::string_view body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("body is not valid JSON: ") + e.what());
  }
  require(j.is_object(), "body must be a JSON object");
  static const std::set<std::string> kKeys{"payload", "run_id", "seq", "token", "type", "version"};
  for (const auto& [k, _] : j.items()) require(kKeys.count(k) == 1, "unknown envelope field '" + k + "'");

  WireMessage m;
  require(j.contains("seq") && is_uint(j["seq"]), "seq must be a non-negative integer");
  m.seq = j["seq"].get<std::uint64_t>();
  require(j.contains("version") && j["version"].is_number_integer(), "version must be an integer");
  m.version = j["version"].get<int>();
  if (m.version != kProtocolVersion)
    throw VersionError("unsupported protocol version " + std::to_string(m.version), static_cast<long long>(m.seq));
  require(j.contains("type") && j["type"].is_string(), "type must be a string");
  auto type = parse_msg_type(j["type"].get<std::string>());
  require(type.has_value(), "unknown msg_type '" + j["type"].get<std::string>() + "'");
  m.type = *type;
  if (j.contains("run_id")) {
    require(j["run_id"].is_string(), "run_id must be a string");
    m.run_id = j["run_id"].get<std::string>();
  }
  if (j.contains("token")) {
    require(j["token"].is_string(), "token must be a string");
    m.token = j["token"].get<std::string>();
  }
  require(j.contains("payload"), "payload missing");
  m.payload = std::move(j["payload"]);
  check_payload(m.type, m.run_id, m.payload);
  return m;
}

WireMessage decode(std::span<const std::uint8_t> frame) {
  if (frame.size() < 4) throw FrameError("truncated length prefix");
  auto len = get_be32(frame.data());
  if (len > kMaxFrameBytes) throw FrameError("frame length " + std::to_string(len) + " exceeds 16 MiB");
  if (frame.size() < 4 + std::size_t{len}) throw FrameError("truncated frame body");
  if (frame.size() > 4 + std::size_t{len}) throw FrameError("trailing bytes after frame");
  return decode_body(std::string_view(reinterpret_cast<const char*>(frame.data() + 4), len));
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  if (off_ > 0 && off_ == buf_.size()) {
    buf_.clear();
    off_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<WireMessage> FrameDecoder::next() {
  if (buffered() < 4) return std::nullopt;
  auto len = get_be32(buf_.data() + off_);
  if (len > kMaxFrameBytes) throw FrameError("frame length " + std::to_string(len) + " exceeds 16 MiB");
  if (buffered() < 4 + std::size_t{len}) return std::nullopt;
  std::string_view body(reinterpret_cast<const char*>(buf_.data() + off_ + 4), len);
  off_ += 4 + len;
  auto msg = decode_body(body);
  if (off_ > (1u << 20) && off_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(off_));
    off_ = 0;
  }
  return msg;
}

void FrameDecoder::finish() const {
  if (buffered() != 0) throw FrameError("stream ended inside a frame (" + std::to_string(buffered()) + " bytes pending)");
}

std::uint64_t Connection::send(WireMessage msg) {
  std::lock_guard lock(write_mu_);
  msg.seq = next_seq_;
  if (token_ && !msg.token) msg.token = token_;
  auto bytes = encode(msg);
  sock_.send_all(bytes);
  return next_seq_++;
}

std::optional<WireMessage> Connection::receive(std::optional<std::chrono::milliseconds> timeout) {
  using clock = std::chrono::steady_clock;
  const auto deadline = timeout ? std::optional(clock::now() + *timeout) : std::nullopt;
  std::array<std::uint8_t, 64 * 1024> chunk{};
  for (;;) {
    if (auto m = decoder_.next()) {
      if (last_in_seq_ && m->seq <= *last_in_seq_) throw SchemaError("SEQ", "non-increasing seq " + std::to_string(m->seq));
      last_in_seq_ = m->seq;
      return m;
    }
    std::optional<std::chrono::milliseconds> wait;
    if (deadline) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - clock::now());
      if (left.count() <= 0) return std::nullopt;
      wait = left;
    }
    auto n = sock_.read_some(chunk, wait);
    if (!n) return std::nullopt;
    if (*n == 0) {
      decoder_.finish();
      throw ConnectionClosed();
    }
    decoder_.feed(std::span(chunk.data(), *n));
  }
}

WireMessage Connection::request(WireMessage msg, std::chrono::milliseconds timeout) {
  send(std::move(msg));
  auto reply = receive(timeout);
  if (!reply) throw TimeoutError("no reply within " + std::to_string(timeout.count()) + " ms");
  return std::move(*reply);
}

std::string handshake(Connection& conn, const RegisterInfo& info, std::chrono::milliseconds timeout) {
  Json p{{"actor_id", info.actor_id},
         {"address", info.address},
         {"health_period_ms", static_cast<std::uint64_t>(info.health_period.count())}};
  if (info.health) p["health"] = *info.health;
  conn.send(make(MsgType::REGISTER, std::move(p)));
  std::optional<WireMessage> reply;
  try {
    reply = conn.receive(timeout);
  } catch (const ConnectionClosed&) {
    throw HandshakeRejected("CLOSED", "server closed the connection during registration");
  }
  if (!reply) throw HandshakeTimeout("no REGISTER_ACK within " + std::to_string(timeout.count()) + " ms");
  if (reply->type == MsgType::ERROR)
    throw HandshakeRejected(reply->payload["code"].get<std::string>(), reply->payload["message"].get<std::string>());
  if (reply->type != MsgType::REGISTER_ACK)
    throw HandshakeRejected("PROTOCOL", "expected REGISTER_ACK, got " + std::string(to_string(reply->type)));
  auto token = reply->payload["token"].get<std::string>();
  conn.set_token(token);
  return token;
}

}  // namespace ait::wire
