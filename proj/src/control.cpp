#include "ait/control.hpp"

namespace ait::control {

using wire::MsgType;

Client::Client(const net::Endpoint& ep, Millis timeout) : conn_(net::connect_to(ep, timeout)), timeout_(timeout) {}

Json Client::call(wire::WireMessage msg) {
  auto reply = conn_.request(std::move(msg), timeout_);
  if (reply.type == MsgType::ERROR) {
    auto code = reply.payload["code"].get<std::string>();
    auto message = reply.payload["message"].get<std::string>();
    if (code == "UNKNOWN_RUN") throw UnknownRun(reply.run_id.value_or("?"));
    if (code == "REJECTED") {
      std::vector<std::string> reasons;
      if (reply.payload.contains("reasons")) reasons = reply.payload["reasons"].get<std::vector<std::string>>();
      throw RejectedError(reply.run_id.value_or(""), reasons);
    }
    throw Error(code, message);
  }
  if (reply.type != MsgType::REPLY) throw SchemaError("unexpected reply type " + std::string(wire::to_string(reply.type)));
  return reply.payload;
}

std::string Client::submit(const std::string& script, const std::string& config,
                           const std::optional<std::string>& replay_of) {
  Json p{{"script", script}, {"config", config}};
  if (replay_of) p["replay_of"] = *replay_of;
  return call(wire::make(MsgType::SUBMIT, std::move(p)))["run_id"].get<std::string>();
}

Json Client::status(const std::string& run_id) { return call(wire::make(MsgType::STATUS, Json::object(), run_id)); }

Json Client::list() { return call(wire::make(MsgType::LIST)); }

void Client::abort(const std::string& run_id) { call(wire::make(MsgType::ABORT, Json{{"run_id", run_id}}, run_id)); }

}  // namespace ait::control
