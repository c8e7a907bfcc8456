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

#ifndef BSPF_COMM_MAILBOX_HPP
#define BSPF_COMM_MAILBOX_HPP

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "bspf/comm/frame.hpp"

namespace bspf::comm {

/**
 * Inbound frames of one rank, one FIFO per source. Transports push; the owning
 * communicator pops the first frame from a source that satisfies a predicate.
 */
class Mailbox {
 public:
  using Clock = std::chrono::steady_clock;

  explicit Mailbox(std::size_t sources);

  void push(Frame frame);
  /// Marks a source as gone; pops on it fail with PeerFailure once drained.
  void close_source(std::size_t source, const std::string &reason);
  bool source_closed(std::size_t source) const;

  /// Wakes every waiter with PeerFailure until clear_interrupt().
  void interrupt();
  void clear_interrupt();

  Frame pop(std::size_t source, const std::function<bool(const Frame &)> &match, Clock::time_point deadline);

  std::size_t pending(std::size_t source) const;

 private:
  struct Slot {
    std::deque<Frame> frames;
    bool closed = false;
    std::string reason;
  };

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<Slot> slots_;
  bool interrupted_ = false;
};

}  // namespace bspf::comm

#endif  // BSPF_COMM_MAILBOX_HPP
