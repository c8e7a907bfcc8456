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

#include "bspf/comm/communicator.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>

#include "bspf/serialize.hpp"

namespace bspf::comm {

namespace {

std::atomic<uint64_t> next_id{1};

constexpr uint32_t kRecoveryTag = 0xFFFFFFFFu;
constexpr uint32_t kRecoverySequence = 0xFFFFFFFFu;

}  // namespace

std::string_view backend_name(Backend b) { return b == Backend::InProcess ? "inproc" : "tcp"; }

Backend parse_backend(std::string_view name) {
  if (name == "inproc" || name == "inprocess" || name == "InProcess") return Backend::InProcess;
  if (name == "tcp" || name == "Tcp") return Backend::Tcp;
  throw Error(ErrorCode::InvalidArgument, "unknown backend '" + std::string(name) + "'");
}

std::unique_ptr<Communicator> Communicator::init(const WorldConfig &config) {
  if (config.world_size < 1) throw Error(ErrorCode::InvalidArgument, "world size must be >= 1");
  if (config.rank < 0 || config.rank >= config.world_size) {
    throw Error(ErrorCode::InvalidRank, "rank " + std::to_string(config.rank) + " outside world of " +
                                            std::to_string(config.world_size));
  }
  return config.backend == Backend::InProcess ? detail::init_inprocess(config) : detail::init_tcp(config);
}

Communicator::Communicator(const WorldConfig &config, std::shared_ptr<Mailbox> inbox,
                           std::unique_ptr<Transport> transport)
    : config_(config), inbox_(std::move(inbox)), transport_(std::move(transport)), id_(next_id++) {}

Communicator::~Communicator() { transport_.reset(); }

void Communicator::check_rank(int r, bool allow_self) const {
  if (r < 0 || r >= world_size() || (!allow_self && r == rank())) {
    throw Error(ErrorCode::InvalidRank, "rank " + std::to_string(r) + " is not a valid peer of rank " +
                                            std::to_string(rank()) + " in a world of " + std::to_string(world_size()));
  }
}

void Communicator::post(int dest, Opcode op, uint32_t seq, uint32_t tag, Bytes payload) {
  transport_->post(dest, Frame{op, seq, static_cast<uint32_t>(rank()), tag, std::move(payload)});
}

Bytes Communicator::take(int src, Opcode op, uint32_t seq) {
  Frame f = inbox_->pop(
      static_cast<std::size_t>(src),
      // recovery markers are left for recover()
      [](const Frame &x) {
        return x.opcode != Opcode::P2P && !(x.tag == kRecoveryTag && x.sequence == kRecoverySequence);
      },
      deadline());
  if (f.opcode != op || f.sequence != seq) {
    throw Error(ErrorCode::ProtocolMismatch,
                "rank " + std::to_string(rank()) + " expected " + std::string(opcode_name(op)) + "#" +
                    std::to_string(seq) + " from rank " + std::to_string(src) + " but received " +
                    std::string(opcode_name(f.opcode)) + "#" + std::to_string(f.sequence));
  }
  return std::move(f.payload);
}

void Communicator::barrier() {
  CommTimer::Scope scope(timer_, true);
  const auto seq = next_sequence();
  for (int r = 0; r < world_size(); ++r) {
    if (r != rank()) post(r, Opcode::Barrier, seq, 0, {});
  }
  for (int r = 0; r < world_size(); ++r) {
    if (r != rank()) take(r, Opcode::Barrier, seq);
  }
}

void Communicator::send(int dest, uint32_t tag, std::span<const uint8_t> payload) {
  check_rank(dest, false);
  CommTimer::Scope scope(timer_, true);
  post(dest, Opcode::P2P, sequence_, tag, Bytes(payload.begin(), payload.end()));
}

Bytes Communicator::recv(int src, uint32_t tag) {
  check_rank(src, false);
  CommTimer::Scope scope(timer_, true);
  Frame f = inbox_->pop(
      static_cast<std::size_t>(src), [tag](const Frame &x) { return x.opcode == Opcode::P2P && x.tag == tag; },
      deadline());
  return std::move(f.payload);
}

std::vector<Bytes> Communicator::all_to_all(std::vector<Bytes> outgoing) {
  if (outgoing.size() != static_cast<std::size_t>(world_size())) {
    throw Error(ErrorCode::InvalidArgument, "all_to_all needs one payload per rank");
  }
  CommTimer::Scope scope(timer_, true);
  const auto seq = next_sequence();
  std::vector<Bytes> result(outgoing.size());
  for (int r = 0; r < world_size(); ++r) {
    if (r != rank()) post(r, Opcode::AllToAll, seq, 0, std::move(outgoing[r]));
  }
  result[rank()] = std::move(outgoing[rank()]);
  for (int r = 0; r < world_size(); ++r) {
    if (r != rank()) result[r] = take(r, Opcode::AllToAll, seq);
  }
  return result;
}

std::vector<Bytes> Communicator::gather(Bytes payload, int root) {
  check_rank(root, true);
  CommTimer::Scope scope(timer_, true);
  const auto seq = next_sequence();
  if (rank() != root) {
    post(root, Opcode::Gather, seq, 0, std::move(payload));
    return {};
  }
  std::vector<Bytes> result(world_size());
  result[rank()] = std::move(payload);
  for (int r = 0; r < world_size(); ++r) {
    if (r != rank()) result[r] = take(r, Opcode::Gather, seq);
  }
  return result;
}

std::vector<Bytes> Communicator::allgather(Bytes payload) {
  CommTimer::Scope scope(timer_, true);
  const auto seq = next_sequence();
  for (int r = 0; r < world_size(); ++r) {
    if (r != rank()) post(r, Opcode::AllGather, seq, 0, payload);
  }
  std::vector<Bytes> result(world_size());
  result[rank()] = std::move(payload);
  for (int r = 0; r < world_size(); ++r) {
    if (r != rank()) result[r] = take(r, Opcode::AllGather, seq);
  }
  return result;
}

Bytes Communicator::broadcast(Bytes payload, int root) {
  check_rank(root, true);
  CommTimer::Scope scope(timer_, true);
  const auto seq = next_sequence();
  if (rank() == root) {
    for (int r = 0; r < world_size(); ++r) {
      if (r != rank()) post(r, Opcode::Broadcast, seq, 0, payload);
    }
    return payload;
  }
  return take(root, Opcode::Broadcast, seq);
}

int64_t Communicator::allreduce_i64(int64_t value, ReduceOp op) {
  CommTimer::Scope scope(timer_, true);
  const auto seq = next_sequence();
  Bytes mine;
  wire::put_u64(mine, static_cast<uint64_t>(value));
  for (int r = 0; r < world_size(); ++r) {
    if (r != rank()) post(r, Opcode::AllReduce, seq, static_cast<uint32_t>(op), mine);
  }
  // fold in rank order so every rank computes the identical value
  int64_t acc = 0;
  for (int r = 0; r < world_size(); ++r) {
    int64_t v = value;
    if (r != rank()) {
      auto bytes = take(r, Opcode::AllReduce, seq);
      if (bytes.size() != 8) throw Error(ErrorCode::CorruptPayload, "allreduce payload size");
      v = static_cast<int64_t>(wire::Reader(bytes).u64());
    }
    if (r == 0) {
      acc = v;
      continue;
    }
    switch (op) {
      case ReduceOp::Sum: acc = static_cast<int64_t>(static_cast<uint64_t>(acc) + static_cast<uint64_t>(v)); break;
      case ReduceOp::Min: acc = std::min(acc, v); break;
      case ReduceOp::Max: acc = std::max(acc, v); break;
    }
  }
  return acc;
}

void Communicator::interrupt() { inbox_->interrupt(); }

void Communicator::recover(std::chrono::milliseconds timeout) {
  inbox_->clear_interrupt();
  for (int r = 0; r < world_size(); ++r) {
    if (r != rank()) post(r, Opcode::Barrier, kRecoverySequence, kRecoveryTag, {});
  }
  const auto until = Mailbox::Clock::now() + timeout;
  for (int r = 0; r < world_size(); ++r) {
    if (r == rank()) continue;
    while (true) {
      Frame f = inbox_->pop(static_cast<std::size_t>(r), [](const Frame &) { return true; }, until);
      if (f.opcode == Opcode::Barrier && f.tag == kRecoveryTag && f.sequence == kRecoverySequence) break;
    }
  }
  sequence_ = 0;
}

}  // namespace bspf::comm
