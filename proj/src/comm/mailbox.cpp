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

#include "bspf/comm/mailbox.hpp"

#include "bspf/error.hpp"

namespace bspf::comm {

Mailbox::Mailbox(std::size_t sources) : slots_(sources) {}

void Mailbox::push(Frame frame) {
  {
    std::lock_guard lock(mutex_);
    slots_.at(frame.source).frames.push_back(std::move(frame));
  }
  cv_.notify_all();
}

void Mailbox::close_source(std::size_t source, const std::string &reason) {
  {
    std::lock_guard lock(mutex_);
    auto &slot = slots_.at(source);
    if (!slot.closed) {
      slot.closed = true;
      slot.reason = reason;
    }
  }
  cv_.notify_all();
}

bool Mailbox::source_closed(std::size_t source) const {
  std::lock_guard lock(mutex_);
  return slots_.at(source).closed;
}

void Mailbox::interrupt() {
  {
    std::lock_guard lock(mutex_);
    interrupted_ = true;
  }
  cv_.notify_all();
}

void Mailbox::clear_interrupt() {
  std::lock_guard lock(mutex_);
  interrupted_ = false;
}

std::size_t Mailbox::pending(std::size_t source) const {
  std::lock_guard lock(mutex_);
  return slots_.at(source).frames.size();
}

Frame Mailbox::pop(std::size_t source, const std::function<bool(const Frame &)> &match, Clock::time_point deadline) {
  std::unique_lock lock(mutex_);
  auto &slot = slots_.at(source);
  std::size_t scanned = 0;
  while (true) {
    if (interrupted_) throw Error(ErrorCode::PeerFailure, "operation interrupted after a failure on another rank");
    for (auto it = slot.frames.begin() + static_cast<std::ptrdiff_t>(scanned); it != slot.frames.end(); ++it) {
      if (match(*it)) {
        Frame f = std::move(*it);
        slot.frames.erase(it);
        return f;
      }
    }
    scanned = slot.frames.size();
    if (slot.closed) {
      throw Error(ErrorCode::PeerFailure, "rank " + std::to_string(source) + " is unreachable: " + slot.reason);
    }
    if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) {
      // one last look before giving up
      for (auto it = slot.frames.begin() + static_cast<std::ptrdiff_t>(scanned); it != slot.frames.end(); ++it) {
        if (match(*it)) {
          Frame f = std::move(*it);
          slot.frames.erase(it);
          return f;
        }
      }
      throw Error(ErrorCode::Timeout, "no message from rank " + std::to_string(source) + " before deadline");
    }
  }
}

}  // namespace bspf::comm
