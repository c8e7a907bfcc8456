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

#ifndef BSPF_COMM_TIMER_HPP
#define BSPF_COMM_TIMER_HPP

#include <chrono>

namespace bspf {

/// Per-worker accumulation of communication vs computation wall time.
/// Scopes do not nest: a scope opened inside another records nothing.
class CommTimer {
 public:
  using Clock = std::chrono::steady_clock;

  class Scope {
   public:
    /// A null timer makes the scope a no-op.
    Scope(CommTimer *timer, bool comm);
    Scope(const Scope &) = delete;
    Scope &operator=(const Scope &) = delete;
    ~Scope();

   private:
    CommTimer *timer_;
    bool comm_;
    bool outermost_;
    Clock::time_point start_;
  };

  [[nodiscard]] Scope comm() { return Scope(this, true); }
  [[nodiscard]] Scope comp() { return Scope(this, false); }

  double comm_ms() const { return to_ms(comm_); }
  double comp_ms() const { return to_ms(comp_); }
  void reset() { comm_ = comp_ = Clock::duration::zero(); }

 private:
  static double to_ms(Clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); }

  Clock::duration comm_{};
  Clock::duration comp_{};
  int depth_ = 0;
};

inline CommTimer::Scope::Scope(CommTimer *timer, bool comm)
    : timer_(timer), comm_(comm), outermost_(timer && timer->depth_ == 0), start_(Clock::now()) {
  if (timer_) ++timer_->depth_;
}

inline CommTimer::Scope::~Scope() {
  if (!timer_) return;
  --timer_->depth_;
  if (outermost_) (comm_ ? timer_->comm_ : timer_->comp_) += Clock::now() - start_;
}

}  // namespace bspf

#endif  // BSPF_COMM_TIMER_HPP
