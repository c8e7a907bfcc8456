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

#ifndef BSPF_COMM_COMMUNICATOR_HPP
#define BSPF_COMM_COMMUNICATOR_HPP

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bspf/comm/frame.hpp"
#include "bspf/comm/mailbox.hpp"
#include "bspf/comm/timer.hpp"

namespace bspf::comm {

enum class Backend { InProcess, Tcp };

std::string_view backend_name(Backend b);
Backend parse_backend(std::string_view name);

enum class ReduceOp { Sum, Min, Max };

constexpr std::chrono::milliseconds kDefaultTimeout{30000};

struct WorldConfig {
  int world_size = 1;
  int rank = 0;
  Backend backend = Backend::InProcess;
  /// host:port of the rendezvous service (Tcp only).
  std::string rendezvous;
  /// Worlds with different namespaces never see each other.
  std::string ns = "default";
  /// Address other ranks use to reach this one (Tcp only).
  std::string advertise_host = "127.0.0.1";
  std::chrono::milliseconds timeout = kDefaultTimeout;
};

/// Outbound half of a backend. Inbound frames land in the communicator's mailbox.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void post(int dest, Frame frame) = 0;
};

/**
 * A rank's handle on its world. All collectives must be called by every rank in
 * the same order; each collective message carries (sequence, opcode) and a
 * receiver that sees anything else raises ProtocolMismatch.
 *
 * Confined to one thread. Every call blocks until complete, the configured
 * timeout elapses (Timeout), or a peer goes away (PeerFailure).
 */
class Communicator {
 public:
  /// Joins the world described by config. Returns once every rank has joined.
  static std::unique_ptr<Communicator> init(const WorldConfig &config);

  Communicator(const WorldConfig &config, std::shared_ptr<Mailbox> inbox, std::unique_ptr<Transport> transport);
  ~Communicator();

  Communicator(const Communicator &) = delete;
  Communicator &operator=(const Communicator &) = delete;

  int rank() const { return config_.rank; }
  int world_size() const { return config_.world_size; }
  Backend backend() const { return config_.backend; }
  const WorldConfig &config() const { return config_; }
  /// Process-unique identity, fixed for the communicator's lifetime.
  uint64_t id() const { return id_; }
  uint32_t sequence() const { return sequence_; }

  /// Collectives add their elapsed time to the timer's communication total.
  void set_timer(CommTimer *timer) { timer_ = timer; }
  CommTimer *timer() const { return timer_; }

  void barrier();
  void send(int dest, uint32_t tag, std::span<const uint8_t> payload);
  Bytes recv(int src, uint32_t tag);

  /// outgoing[d] goes to rank d; result[s] is what rank s sent to this rank.
  std::vector<Bytes> all_to_all(std::vector<Bytes> outgoing);
  /// Root receives payloads in rank order; other ranks get an empty list.
  std::vector<Bytes> gather(Bytes payload, int root);
  std::vector<Bytes> allgather(Bytes payload);
  Bytes broadcast(Bytes payload, int root);
  int64_t allreduce_i64(int64_t value, ReduceOp op);

  /// Makes blocked and future receives fail with PeerFailure until recover().
  /// Safe to call from any thread.
  void interrupt();
  /**
   * Re-aligns the world after an aborted collective. Must be called by every
   * rank once none of them has operations in flight: exchanges a marker with
   * each peer, discards whatever arrived before it and resets the sequence.
   */
  void recover(std::chrono::milliseconds timeout);

 private:
  uint32_t next_sequence() { return sequence_++; }
  Mailbox::Clock::time_point deadline() const { return Mailbox::Clock::now() + config_.timeout; }
  void check_rank(int r, bool allow_self) const;
  void post(int dest, Opcode op, uint32_t seq, uint32_t tag, Bytes payload);
  Bytes take(int src, Opcode op, uint32_t seq);

  WorldConfig config_;
  std::shared_ptr<Mailbox> inbox_;
  std::unique_ptr<Transport> transport_;
  uint64_t id_;
  uint32_t sequence_ = 0;
  CommTimer *timer_ = nullptr;
};

namespace detail {
std::unique_ptr<Communicator> init_inprocess(const WorldConfig &config);
std::unique_ptr<Communicator> init_tcp(const WorldConfig &config);
}  // namespace detail

}  // namespace bspf::comm

#endif  // BSPF_COMM_COMMUNICATOR_HPP
