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

#include "bspf/executor.hpp"

#include <atomic>
#include <unistd.h>

#include "bspf/store.hpp"

namespace bspf {

namespace {

std::atomic<uint64_t> next_namespace{0};

std::optional<ErrorCode> code_of(const std::exception_ptr &e) {
  try {
    std::rethrow_exception(e);
  } catch (const Error &x) {
    return x.code();
  } catch (...) {
    return std::nullopt;
  }
}

std::string describe(const std::exception_ptr &e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception &x) {
    return x.what();
  } catch (...) {
    return "unknown exception";
  }
}

}  // namespace

void throw_rank_failures(const std::vector<std::exception_ptr> &errors, ErrorCode code) {
  std::vector<int> ranks;
  std::string message;
  // A library error raised identically on every failing rank keeps its code.
  // PeerFailure on other ranks is usually the interrupt that follows it, so
  // those ranks are not named.
  bool root_cause = false;
  for (const auto &e : errors) {
    if (e && code_of(e) != ErrorCode::PeerFailure) root_cause = true;
  }
  std::optional<ErrorCode> shared;
  bool uniform = true;
  for (std::size_t r = 0; r < errors.size(); ++r) {
    if (!errors[r]) continue;
    const auto c = code_of(errors[r]);
    if (root_cause && c == ErrorCode::PeerFailure) continue;
    ranks.push_back(static_cast<int>(r));
    if (!c || (shared && *shared != *c)) uniform = false;
    if (!shared) shared = c;
    if (!message.empty()) message += "; ";
    message += "rank " + std::to_string(r) + ": " + describe(errors[r]);
  }
  throw RankError(uniform && shared ? *shared : code, std::move(ranks), message);
}

std::unique_ptr<Executor> Executor::start(std::size_t parallelism, ExecutorConfig config) {
  if (parallelism < 1) throw Error(ErrorCode::InvalidArgument, "parallelism must be >= 1");
  std::unique_ptr<Executor> ex(new Executor(parallelism, std::move(config)));
  ex->launch();
  return ex;
}

Executor::Executor(std::size_t parallelism, ExecutorConfig config)
    : parallelism_(parallelism), config_(std::move(config)), workers_(parallelism) {
  if (config_.ns.empty()) {
    config_.ns = "executor-" + std::to_string(::getpid()) + "-" + std::to_string(next_namespace++);
  }
  if (!config_.store) config_.store = MemoryStore::shared();
}

void Executor::launch() {
  if (config_.backend == comm::Backend::Tcp && config_.rendezvous.empty() && parallelism_ > 1) {
    rendezvous_ = std::make_unique<comm::RendezvousServer>();
    config_.rendezvous = rendezvous_->address();
  }
  // communicators are created concurrently since init blocks until all ranks join
  std::vector<std::exception_ptr> errors(parallelism_);
  {
    std::vector<std::thread> init_threads;
    for (std::size_t r = 0; r < parallelism_; ++r) {
      init_threads.emplace_back([this, r, &errors] {
        comm::WorldConfig wc;
        wc.world_size = static_cast<int>(parallelism_);
        wc.rank = static_cast<int>(r);
        wc.backend = config_.backend;
        wc.rendezvous = config_.rendezvous;
        wc.ns = config_.ns;
        wc.timeout = config_.timeout;
        try {
          workers_[r].communicator = comm::Communicator::init(wc);
          workers_[r].communicator->set_timer(&workers_[r].timer);
        } catch (...) {
          errors[r] = std::current_exception();
        }
      });
    }
    for (auto &t : init_threads) t.join();
  }
  for (auto &e : errors) {
    if (e) {
      for (auto &w : workers_) w.communicator.reset();
      state_ = ExecutorState::Stopped;
      std::rethrow_exception(e);
    }
  }
  inits_ += parallelism_;
  for (std::size_t r = 0; r < parallelism_; ++r) {
    workers_[r].thread = std::thread([this, r] { worker_loop(static_cast<int>(r)); });
  }
  dispatcher_ = std::thread([this] { dispatch_loop(); });
  std::lock_guard lock(mutex_);
  state_ = ExecutorState::Ready;
}

Executor::~Executor() { stop(); }

ExecutorState Executor::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

std::size_t Executor::completed_submissions() const {
  std::lock_guard lock(mutex_);
  return completed_;
}

std::vector<uint64_t> Executor::communicator_ids() const {
  std::vector<uint64_t> ids;
  for (const auto &w : workers_) ids.push_back(w.communicator ? w.communicator->id() : 0);
  return ids;
}

ExecEnv Executor::make_env(int rank) {
  ExecEnv env;
  env.rank = rank;
  env.world_size = static_cast<int>(parallelism_);
  env.communicator = workers_[rank].communicator.get();
  env.timer = &workers_[rank].timer;
  env.store = config_.store;
  env.seed = config_.seed;
  return env;
}

void Executor::submit(std::shared_ptr<Submission> s) {
  {
    std::lock_guard lock(mutex_);
    if (!stopping_ && state_ != ExecutorState::Stopped) {
      queue_.push_back(std::move(s));
      cv_.notify_all();
      return;
    }
  }
  s->complete({std::make_exception_ptr(Error(ErrorCode::ExecutorStopped, "executor is stopped"))});
}

std::vector<std::exception_ptr> Executor::run_on_all(const std::function<void(int, Worker &)> &fn) {
  std::unique_lock lock(mutex_);
  round_errors_.assign(parallelism_, nullptr);
  round_done_ = 0;
  round_ = &fn;
  ++round_id_;
  cv_.notify_all();
  done_cv_.wait(lock, [this] { return round_done_ == parallelism_; });
  round_ = nullptr;
  return std::move(round_errors_);
}

void Executor::worker_loop(int rank) {
  uint64_t seen = 0;
  while (true) {
    const std::function<void(int, Worker &)> *fn = nullptr;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] { return round_id_ != seen || exit_workers_; });
      if (round_id_ == seen) return;
      seen = round_id_;
      fn = round_;
    }
    std::exception_ptr error;
    try {
      (*fn)(rank, workers_[rank]);
    } catch (...) {
      error = std::current_exception();
      // wake peers blocked on this rank
      for (auto &w : workers_) w.communicator->interrupt();
    }
    std::lock_guard lock(mutex_);
    round_errors_[rank] = error;
    if (++round_done_ == parallelism_) done_cv_.notify_all();
  }
}

void Executor::dispatch_loop() {
  while (true) {
    std::shared_ptr<Submission> s;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) break;
      s = std::move(queue_.front());
      queue_.pop_front();
      state_ = ExecutorState::Running;
    }

    std::function<void(int, Worker &)> body = [this, &s](int rank, Worker &w) {
      w.timer.reset();
      ExecEnv env = make_env(rank);
      s->body(rank, env, w.executable);
    };
    auto errors = run_on_all(body);

    bool failed = false;
    for (auto &e : errors) failed = failed || e;
    bool healthy = true;
    if (failed) {
      std::function<void(int, Worker &)> recover = [this](int, Worker &w) {
        w.communicator->recover(config_.timeout);
      };
      for (auto &e : run_on_all(recover)) healthy = healthy && !e;
    }
    std::deque<std::shared_ptr<Submission>> cancelled;
    {
      std::lock_guard lock(mutex_);
      ++completed_;
      if (!healthy) {
        stopping_ = true;
        cancelled.swap(queue_);
        state_ = ExecutorState::Stopped;
      } else if (!stopping_) {
        state_ = ExecutorState::Ready;
      }
    }
    // state first, so a caller woken by the future sees the executor settled
    s->complete(std::move(errors));
    for (auto &c : cancelled) {
      c->complete({std::make_exception_ptr(Error(ErrorCode::ExecutorStopped, "executor stopped after failed recovery"))});
    }
  }
  std::lock_guard lock(mutex_);
  cv_.notify_all();
}

void Executor::stop() {
  std::deque<std::shared_ptr<Submission>> cancelled;
  {
    std::lock_guard lock(mutex_);
    if (state_ == ExecutorState::Stopped && !dispatcher_.joinable()) return;
    stopping_ = true;
    cancelled.swap(queue_);
    cv_.notify_all();
  }
  for (auto &c : cancelled) {
    c->complete({std::make_exception_ptr(Error(ErrorCode::ExecutorStopped, "executor stopped before dispatch"))});
  }
  if (dispatcher_.joinable()) dispatcher_.join();
  {
    std::lock_guard lock(mutex_);
    exit_workers_ = true;
    cv_.notify_all();
  }
  for (auto &w : workers_) {
    if (w.thread.joinable()) w.thread.join();
  }
  for (auto &w : workers_) {
    w.executable.reset();
    w.communicator.reset();
  }
  if (rendezvous_) rendezvous_->stop();
  std::lock_guard lock(mutex_);
  state_ = ExecutorState::Stopped;
}

}  // namespace bspf
