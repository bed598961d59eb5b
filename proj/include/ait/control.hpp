#pragma once

#include <optional>
#include <string>

#include "ait/canonical.hpp"
#include "ait/clock.hpp"
#include "ait/net.hpp"
#include "ait/wire.hpp"

namespace ait::control {

/// Client for the server's control port (SUBMIT / STATUS / LIST / ABORT).
class Client {
 public:
  /// Throws AdapterError{"refused"|"timeout"} when the server is unreachable.
  explicit Client(const net::Endpoint& ep, Millis timeout = Millis(10000));

  /// Returns the run id. Throws RejectedError with the server's reasons.
  std::string submit(const std::string& script, const std::string& config,
                     const std::optional<std::string>& replay_of = std::nullopt);
  /// Throws UnknownRun.
  Json status(const std::string& run_id);
  Json list();
  void abort(const std::string& run_id);

 private:
  Json call(wire::WireMessage msg);

  wire::Connection conn_;
  Millis timeout_;
};

}  // namespace ait::control
