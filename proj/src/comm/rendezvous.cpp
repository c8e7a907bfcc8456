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

#include "bspf/comm/rendezvous.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <sstream>

#include "bspf/error.hpp"

namespace bspf::comm {

namespace {

bool valid_key(const std::string &key) {
  if (key.empty()) return false;
  for (char ch : key) {
    if (ch == ' ' || ch == '\n' || ch == '\r' || ch == '\t') return false;
  }
  return true;
}

/// Reads one '\n'-terminated line; false on EOF.
bool read_line(Socket &s, std::string &buffer, std::string &line) {
  while (true) {
    auto pos = buffer.find('\n');
    if (pos != std::string::npos) {
      line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return true;
    }
    char chunk[4096];
    auto n = ::recv(s.fd(), chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

}  // namespace

RendezvousServer::RendezvousServer(const std::string &bind_host, uint16_t port)
    : host_(bind_host == "0.0.0.0" ? "127.0.0.1" : bind_host), listener_(listen_on(bind_host, port)) {
  port_ = local_port(listener_);
  acceptor_ = std::thread([this] { accept_loop(); });
}

RendezvousServer::~RendezvousServer() { stop(); }

void RendezvousServer::stop() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  {
    std::lock_guard lock(clients_mutex_);
    for (auto &c : clients_) c.shutdown();
  }
  for (auto &t : handlers_) t.join();
  handlers_.clear();
  listener_.close();
}

void RendezvousServer::accept_loop() {
  while (!stopping_) {
    pollfd pfd{listener_.fd(), POLLIN, 0};
    if (::poll(&pfd, 1, 50) <= 0) continue;
    Socket client = accept_until(listener_, std::chrono::steady_clock::now());
    if (!client.valid()) continue;
    std::lock_guard lock(clients_mutex_);
    clients_.push_back(std::move(client));
    Socket *s = &clients_.back();
    handlers_.emplace_back([this, s] { serve(s); });
  }
}

void RendezvousServer::serve(Socket *client) {
  std::string buffer, line;
  try {
    while (!stopping_ && read_line(*client, buffer, line)) {
      auto response = handle(line) + "\n";
      client->write_all({reinterpret_cast<const uint8_t *>(response.data()), response.size()});
    }
  } catch (const Error &) {
    // client went away
  }
}

std::string RendezvousServer::handle(const std::string &line) {
  auto sp = line.find(' ');
  const std::string verb = line.substr(0, sp);
  std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
  std::string key = rest, value;
  if (auto sp2 = rest.find(' '); sp2 != std::string::npos) {
    key = rest.substr(0, sp2);
    value = rest.substr(sp2 + 1);
  }
  std::lock_guard lock(data_mutex_);
  if (verb == "PUT" && valid_key(key)) {
    data_[key] = value;
    return "OK";
  }
  if (verb == "GET" && valid_key(key)) {
    auto it = data_.find(key);
    return it == data_.end() ? "MISSING" : "OK " + it->second;
  }
  if (verb == "DEL" && valid_key(key)) {
    data_.erase(key);
    return "OK";
  }
  if (verb == "LIST") {
    std::string out = "OK";
    for (auto it = data_.lower_bound(key); it != data_.end() && it->first.compare(0, key.size(), key) == 0; ++it) {
      out += " " + it->first;
    }
    return out;
  }
  return "ERR";
}

RendezvousClient::RendezvousClient(const std::string &address, std::chrono::milliseconds connect_timeout) {
  try {
    socket_ = connect_to(parse_host_port(address), std::chrono::steady_clock::now() + connect_timeout);
  } catch (const Error &e) {
    throw Error(ErrorCode::RendezvousTimeout, std::string("rendezvous service unreachable: ") + e.what());
  }
}

std::string RendezvousClient::request(const std::string &line) {
  const std::string msg = line + "\n";
  socket_.write_all({reinterpret_cast<const uint8_t *>(msg.data()), msg.size()});
  std::string response;
  if (!read_line(socket_, buffer_, response)) throw Error(ErrorCode::PeerFailure, "rendezvous service closed");
  return response;
}

void RendezvousClient::put(const std::string &key, const std::string &value) {
  if (!valid_key(key) || value.find('\n') != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "rendezvous key/value not representable: " + key);
  }
  if (request("PUT " + key + " " + value) != "OK") throw Error(ErrorCode::ProtocolMismatch, "PUT rejected");
}

std::optional<std::string> RendezvousClient::get(const std::string &key) {
  auto r = request("GET " + key);
  if (r == "MISSING") return std::nullopt;
  if (r == "OK") return std::string();
  if (r.rfind("OK ", 0) == 0) return r.substr(3);
  throw Error(ErrorCode::ProtocolMismatch, "unexpected rendezvous reply '" + r + "'");
}

void RendezvousClient::del(const std::string &key) {
  if (request("DEL " + key) != "OK") throw Error(ErrorCode::ProtocolMismatch, "DEL rejected");
}

std::vector<std::string> RendezvousClient::list(const std::string &prefix) {
  auto r = request("LIST " + prefix);
  if (r.rfind("OK", 0) != 0) throw Error(ErrorCode::ProtocolMismatch, "LIST rejected");
  std::vector<std::string> keys;
  std::istringstream in(r.substr(2));
  for (std::string k; in >> k;) keys.push_back(k);
  return keys;
}

std::optional<std::string> RendezvousClient::wait_for(const std::string &key,
                                                      std::chrono::steady_clock::time_point deadline) {
  auto pause = std::chrono::milliseconds(1);
  while (true) {
    if (auto v = get(key)) return v;
    if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
    std::this_thread::sleep_for(pause);
    pause = std::min(pause * 2, std::chrono::milliseconds(50));
  }
}

}  // namespace bspf::comm
