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

#ifndef BSPF_COMM_SOCKET_HPP
#define BSPF_COMM_SOCKET_HPP

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <utility>

namespace bspf::comm {

/// Owning file descriptor for a TCP socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket &&o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket &operator=(Socket &&o) noexcept;
  ~Socket();

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close();
  void shutdown();

  /// Throws PeerFailure on error or orderly close.
  void write_all(std::span<const uint8_t> bytes);
  /// Returns false on orderly close before the first byte; throws PeerFailure on
  /// errors and on a close in the middle of the buffer.
  bool read_all(std::span<uint8_t> bytes);

 private:
  int fd_ = -1;
};

struct HostPort {
  std::string host;
  uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
};

HostPort parse_host_port(const std::string &text);

/// Listening socket bound to the given port (0 picks a free one).
Socket listen_on(const std::string &bind_host, uint16_t port, int backlog = 128);
uint16_t local_port(const Socket &s);

/// Connects, retrying refused connections until the deadline.
Socket connect_to(const HostPort &addr, std::chrono::steady_clock::time_point deadline);

/// Waits for one connection. Returns an invalid socket on timeout.
Socket accept_until(const Socket &listener, std::chrono::steady_clock::time_point deadline);

void set_nodelay(const Socket &s);

}  // namespace bspf::comm

#endif  // BSPF_COMM_SOCKET_HPP
