/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "bspf/comm/socket.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <thread>
#include <unistd.h>

#include "bspf/error.hpp"

namespace bspf::comm {

namespace {

std::string errno_text() { return std::strerror(errno); }

int remaining_ms(std::chrono::steady_clock::time_point deadline) {
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
  return left.count() < 0 ? 0 : static_cast<int>(std::min<int64_t>(left.count(), 1 << 30));
}

}  // namespace

Socket &Socket::operator=(Socket &&o) noexcept {
  if (this != &o) {
    close();
    fd_ = std::exchange(o.fd_, -1);
  }
  return *this;
}

Socket::~Socket() { close(); }

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::write_all(std::span<const uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    auto n = ::send(fd_, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::PeerFailure, "send failed: " + errno_text());
    }
    done += static_cast<std::size_t>(n);
  }
}

bool Socket::read_all(std::span<uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    auto n = ::recv(fd_, bytes.data() + done, bytes.size() - done, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::PeerFailure, "recv failed: " + errno_text());
    }
    if (n == 0) {
      if (done == 0) return false;
      throw Error(ErrorCode::PeerFailure, "connection closed mid-message");
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

HostPort parse_host_port(const std::string &text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw Error(ErrorCode::InvalidArgument, "expected host:port, got '" + text + "'");
  }
  HostPort hp;
  hp.host = text.substr(0, colon);
  try {
    auto port = std::stoul(text.substr(colon + 1));
    if (port > 65535) throw std::out_of_range("port");
    hp.port = static_cast<uint16_t>(port);
  } catch (const std::exception &) {
    throw Error(ErrorCode::InvalidArgument, "bad port in '" + text + "'");
  }
  return hp;
}

Socket listen_on(const std::string &bind_host, uint16_t port, int backlog) {
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw Error(ErrorCode::IoError, "socket: " + errno_text());
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (bind_host.empty() || bind_host == "0.0.0.0") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
  } else if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) {
    throw Error(ErrorCode::InvalidArgument, "bind address must be IPv4: " + bind_host);
  }
  if (::bind(s.fd(), reinterpret_cast<sockaddr *>(&addr), sizeof(addr)) != 0) {
    throw Error(ErrorCode::IoError, "bind: " + errno_text());
  }
  if (::listen(s.fd(), backlog) != 0) throw Error(ErrorCode::IoError, "listen: " + errno_text());
  return s;
}

uint16_t local_port(const Socket &s) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(s.fd(), reinterpret_cast<sockaddr *>(&addr), &len) != 0) {
    throw Error(ErrorCode::IoError, "getsockname: " + errno_text());
  }
  return ntohs(addr.sin_port);
}

Socket connect_to(const HostPort &hp, std::chrono::steady_clock::time_point deadline) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo *res = nullptr;
  const auto port = std::to_string(hp.port);
  if (int rc = ::getaddrinfo(hp.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorCode::IoError, "cannot resolve " + hp.host + ": " + ::gai_strerror(rc));
  }
  sockaddr_in target{};
  std::memcpy(&target, res->ai_addr, sizeof(target));
  ::freeaddrinfo(res);

  auto backoff = std::chrono::milliseconds(2);
  while (true) {
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) throw Error(ErrorCode::IoError, "socket: " + errno_text());
    if (::connect(s.fd(), reinterpret_cast<sockaddr *>(&target), sizeof(target)) == 0) {
      set_nodelay(s);
      return s;
    }
    if (std::chrono::steady_clock::now() + backoff >= deadline) {
      throw Error(ErrorCode::Timeout, "cannot connect to " + hp.str() + ": " + errno_text());
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::min(backoff * 2, std::chrono::milliseconds(100));
  }
}

Socket accept_until(const Socket &listener, std::chrono::steady_clock::time_point deadline) {
  while (true) {
    pollfd pfd{listener.fd(), POLLIN, 0};
    int rc = ::poll(&pfd, 1, remaining_ms(deadline));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::IoError, "poll: " + errno_text());
    }
    if (rc == 0) return Socket();
    int fd = ::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      throw Error(ErrorCode::IoError, "accept: " + errno_text());
    }
    Socket s(fd);
    set_nodelay(s);
    return s;
  }
}

void set_nodelay(const Socket &s) {
  int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace bspf::comm
