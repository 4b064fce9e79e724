#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace spikekit::net {

/// Owning POSIX socket descriptor.
class Socket
{
public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

  /// Returns false on orderly end of input before `dst` is full.
  bool read_exact(std::span<std::uint8_t> dst);
  void write_all(std::span<const std::uint8_t> src);

private:
  int fd_ = -1;
};

/// Listens on 127.0.0.1:port (0 picks a free port) and returns the socket.
Socket listen_local(std::uint16_t port);
std::uint16_t local_port(const Socket& listener);
Socket accept_one(const Socket& listener);
/// Connects to "host:port".
Socket connect_to(const std::string& endpoint);

} // namespace spikekit::net
