#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace ait::net {

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
  friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

/// Parses "host:port". Throws SchemaError on malformed input.
Endpoint parse_endpoint(const std::string& text);

/// Owning TCP socket handle.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(o.release()) {}
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() {
    int f = fd_;
    fd_ = -1;
    return f;
  }
  void close();
  /// Shuts down both directions so a thread blocked in read() returns.
  void shutdown();

  void send_all(std::span<const std::uint8_t> bytes);
  /// Reads up to `buf.size()` bytes. Returns 0 on orderly close, nullopt on
  /// timeout. Throws IoError on socket errors.
  std::optional<std::size_t> read_some(std::span<std::uint8_t> buf, std::optional<std::chrono::milliseconds> timeout);

 private:
  int fd_ = -1;
};

/// Connects with a bounded wait. Throws AdapterError{"refused"|"timeout"}.
Socket connect_to(const Endpoint& ep, std::chrono::milliseconds timeout);

class Listener {
 public:
  /// Binds host:port (port 0 picks an ephemeral port). Throws IoError.
  explicit Listener(const Endpoint& ep);
  std::uint16_t port() const { return port_; }
  /// Waits up to `timeout` for a connection.
  std::optional<Socket> accept(std::chrono::milliseconds timeout);
  void close() { sock_.close(); }

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

}  // namespace ait::net
