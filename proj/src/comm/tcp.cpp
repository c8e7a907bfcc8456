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

// Full-mesh TCP backend. Bootstrap: each rank listens on an ephemeral port,
// publishes "<ns>/rank/<r> host:port" to the rendezvous service and waits for
// every other rank's key. Rank r then dials every lower rank and accepts a
// connection from every higher one. A reader thread per peer decodes frames
// into the mailbox, so posting never waits on the receiver's progress.

#include <mutex>
#include <thread>

#include "bspf/comm/communicator.hpp"
#include "bspf/comm/rendezvous.hpp"
#include "bspf/serialize.hpp"

namespace bspf::comm {

namespace {

constexpr uint32_t kHelloMagic = 0x48454C4F;

struct Peer {
  Socket socket;
  std::mutex write_mutex;
  std::thread reader;
};

class TcpTransport final : public Transport {
 public:
  TcpTransport(int rank, std::vector<std::unique_ptr<Peer>> peers, std::shared_ptr<Mailbox> inbox)
      : rank_(rank), peers_(std::move(peers)), inbox_(std::move(inbox)) {
    for (std::size_t r = 0; r < peers_.size(); ++r) {
      if (!peers_[r]) continue;
      peers_[r]->reader = std::thread([this, r] { read_loop(r); });
    }
  }

  ~TcpTransport() override {
    for (auto &p : peers_) {
      if (p) p->socket.shutdown();
    }
    for (auto &p : peers_) {
      if (p && p->reader.joinable()) p->reader.join();
    }
  }

  void post(int dest, Frame frame) override {
    auto &peer = *peers_.at(dest);
    uint8_t header[kFrameHeaderSize];
    encode_frame_header(frame, header);
    std::lock_guard lock(peer.write_mutex);
    try {
      peer.socket.write_all(header);
      peer.socket.write_all(frame.payload);
    } catch (const Error &e) {
      throw Error(ErrorCode::PeerFailure, "rank " + std::to_string(dest) + ": " + e.what());
    }
  }

 private:
  void read_loop(std::size_t source) {
    auto &sock = peers_[source]->socket;
    try {
      while (true) {
        uint8_t header[kFrameHeaderSize];
        if (!sock.read_all(header)) break;
        auto h = decode_frame_header(std::span<const uint8_t, kFrameHeaderSize>(header));
        if (h.source != source) throw Error(ErrorCode::ProtocolMismatch, "frame source does not match connection");
        Frame f{h.opcode, h.sequence, h.source, h.tag, Bytes(h.payload_length)};
        if (h.payload_length && !sock.read_all(f.payload)) throw Error(ErrorCode::PeerFailure, "truncated frame");
        inbox_->push(std::move(f));
      }
      inbox_->close_source(source, "connection closed");
    } catch (const std::exception &e) {
      inbox_->close_source(source, e.what());
    }
  }

  int rank_;
  std::vector<std::unique_ptr<Peer>> peers_;
  std::shared_ptr<Mailbox> inbox_;
};

std::string rank_key(const WorldConfig &c, int r) { return c.ns + "/rank/" + std::to_string(r); }

}  // namespace

namespace detail {

std::unique_ptr<Communicator> init_tcp(const WorldConfig &config) {
  const auto deadline = std::chrono::steady_clock::now() + config.timeout;
  auto inbox = std::make_shared<Mailbox>(config.world_size);
  std::vector<std::unique_ptr<Peer>> peers(config.world_size);
  if (config.world_size == 1) {
    return std::make_unique<Communicator>(config, inbox, std::make_unique<TcpTransport>(0, std::move(peers), inbox));
  }
  if (config.rendezvous.empty()) throw Error(ErrorCode::InvalidArgument, "tcp backend needs a rendezvous address");

  Socket listener = listen_on("0.0.0.0", 0);
  const auto my_address = config.advertise_host + ":" + std::to_string(local_port(listener));

  RendezvousClient kv(config.rendezvous, config.timeout);
  const auto world_key = config.ns + "/world";
  if (auto w = kv.get(world_key)) {
    if (*w != std::to_string(config.world_size)) {
      throw Error(ErrorCode::WorldSizeMismatch, "namespace '" + config.ns + "' has world size " + *w);
    }
  } else {
    kv.put(world_key, std::to_string(config.world_size));
  }
  if (kv.get(rank_key(config, config.rank))) {
    throw Error(ErrorCode::DuplicateRank, "rank " + std::to_string(config.rank) + " already registered in '" +
                                              config.ns + "'");
  }
  kv.put(rank_key(config, config.rank), my_address);

  std::vector<std::string> addresses(config.world_size);
  for (int r = 0; r < config.world_size; ++r) {
    auto a = kv.wait_for(rank_key(config, r), deadline);
    if (!a) {
      throw Error(ErrorCode::RendezvousTimeout, "rank " + std::to_string(r) + " never registered in '" + config.ns + "'");
    }
    addresses[r] = *a;
  }

  auto hello = [&](int rank) {
    Bytes b;
    wire::put_u32(b, kHelloMagic);
    wire::put_u32(b, static_cast<uint32_t>(rank));
    wire::put_u32(b, static_cast<uint32_t>(config.world_size));
    return b;
  };

  try {
    for (int r = 0; r < config.rank; ++r) {
      auto p = std::make_unique<Peer>();
      p->socket = connect_to(parse_host_port(addresses[r]), deadline);
      p->socket.write_all(hello(config.rank));
      peers[r] = std::move(p);
    }
    for (int accepted = 0; accepted < config.world_size - 1 - config.rank;) {
      Socket s = accept_until(listener, deadline);
      if (!s.valid()) throw Error(ErrorCode::RendezvousTimeout, "peers did not connect before deadline");
      uint8_t buf[12];
      if (!s.read_all(buf)) continue;
      wire::Reader in(buf);
      const auto magic = in.u32();
      const auto rank = in.u32();
      const auto world = in.u32();
      if (magic != kHelloMagic) throw Error(ErrorCode::ProtocolMismatch, "bad hello");
      if (world != static_cast<uint32_t>(config.world_size)) throw Error(ErrorCode::WorldSizeMismatch, "peer world size");
      if (rank <= static_cast<uint32_t>(config.rank) || rank >= static_cast<uint32_t>(config.world_size) || peers[rank]) {
        throw Error(ErrorCode::DuplicateRank, "unexpected hello from rank " + std::to_string(rank));
      }
      peers[rank] = std::make_unique<Peer>();
      peers[rank]->socket = std::move(s);
      ++accepted;
    }
  } catch (const Error &e) {
    if (e.code() == ErrorCode::Timeout) throw Error(ErrorCode::RendezvousTimeout, e.what());
    throw;
  }
  auto transport = std::make_unique<TcpTransport>(config.rank, std::move(peers), inbox);
  return std::make_unique<Communicator>(config, inbox, std::move(transport));
}

}  // namespace detail

}  // namespace bspf::comm
