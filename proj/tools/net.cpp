#include "net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "spikekit/errors.hpp"

namespace spikekit::net {

namespace {

IoError sys_error(const std::string& what)
{
  return IoError(what + ": " + std::strerror(errno));
}

} // namespace

Socket::~Socket()
{
  if (fd_ >= 0)
    ::close(fd_);
}

Socket& Socket::operator=(Socket&& other) noexcept
{
  if (this != &other) {
    if (fd_ >= 0)
      ::close(fd_);
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

bool Socket::read_exact(std::span<std::uint8_t> dst)
{
  std::size_t done = 0;
  while (done < dst.size()) {
    const ssize_t n = ::recv(fd_, dst.data() + done, dst.size() - done, 0);
    if (n == 0)
      return false;
    if (n < 0) {
      if (errno == EINTR)
        continue;
      throw sys_error("recv");
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

void Socket::write_all(std::span<const std::uint8_t> src)
{
  std::size_t done = 0;
  while (done < src.size()) {
    const ssize_t n = ::send(fd_, src.data() + done, src.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR)
        continue;
      throw sys_error("send");
    }
    done += static_cast<std::size_t>(n);
  }
}

Socket listen_local(std::uint16_t port)
{
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid())
    throw sys_error("socket");
  const int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
    throw sys_error("bind 127.0.0.1:" + std::to_string(port));
  if (::listen(s.fd(), 1) != 0)
    throw sys_error("listen");
  return s;
}

std::uint16_t local_port(const Socket& listener)
{
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(listener.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0)
    throw sys_error("getsockname");
  return ntohs(addr.sin_port);
}

Socket accept_one(const Socket& listener)
{
  for (;;) {
    const int fd = ::accept(listener.fd(), nullptr, nullptr);
    if (fd >= 0)
      return Socket(fd);
    if (errno != EINTR)
      throw sys_error("accept");
  }
}

Socket connect_to(const std::string& endpoint)
{
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos)
    throw ParseError("endpoint '" + endpoint + "' is not host:port");
  const std::string host = endpoint.substr(0, colon);
  const std::string port = endpoint.substr(colon + 1);

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw IoError("resolve '" + endpoint + "': " + ::gai_strerror(rc));

  Socket s;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    Socket candidate(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (candidate.valid() && ::connect(candidate.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
      s = std::move(candidate);
      break;
    }
  }
  ::freeaddrinfo(res);
  if (!s.valid())
    throw sys_error("connect " + endpoint);
  return s;
}

} // namespace spikekit::net
