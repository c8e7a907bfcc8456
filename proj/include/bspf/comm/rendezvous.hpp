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

#ifndef BSPF_COMM_RENDEZVOUS_HPP
#define BSPF_COMM_RENDEZVOUS_HPP

#include <atomic>
#include <chrono>
#include <list>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bspf/comm/socket.hpp"

namespace bspf::comm {

/**
 * Line-oriented key-value service used to bootstrap TCP worlds and to publish
 * store manifests.
 *
 *   PUT <key> <value>   -> OK
 *   GET <key>           -> OK <value> | MISSING
 *   DEL <key>           -> OK
 *   LIST <prefix>       -> OK <key> <key> ...
 *
 * Keys contain no whitespace; a value is the rest of the line.
 */
class RendezvousServer {
 public:
  explicit RendezvousServer(const std::string &bind_host = "127.0.0.1", uint16_t port = 0);
  ~RendezvousServer();

  RendezvousServer(const RendezvousServer &) = delete;
  RendezvousServer &operator=(const RendezvousServer &) = delete;

  uint16_t port() const { return port_; }
  std::string address() const { return host_ + ":" + std::to_string(port_); }
  void stop();

  /// Handles one request line and returns the response line (no newline).
  std::string handle(const std::string &line);

 private:
  void accept_loop();
  void serve(Socket *client);

  std::string host_;
  Socket listener_;
  uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;

  std::mutex clients_mutex_;
  std::list<Socket> clients_;
  std::vector<std::thread> handlers_;

  std::mutex data_mutex_;
  std::map<std::string, std::string> data_;
};

/// One persistent connection to a rendezvous service. Not thread-safe.
class RendezvousClient {
 public:
  RendezvousClient(const std::string &address, std::chrono::milliseconds connect_timeout);

  void put(const std::string &key, const std::string &value);
  std::optional<std::string> get(const std::string &key);
  void del(const std::string &key);
  std::vector<std::string> list(const std::string &prefix);

  /// Polls GET until the key exists; nullopt on timeout.
  std::optional<std::string> wait_for(const std::string &key, std::chrono::steady_clock::time_point deadline);

 private:
  std::string request(const std::string &line);

  Socket socket_;
  std::string buffer_;
};

}  // namespace bspf::comm

#endif  // BSPF_COMM_RENDEZVOUS_HPP
