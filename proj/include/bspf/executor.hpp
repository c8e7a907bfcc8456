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

#ifndef BSPF_EXECUTOR_HPP
#define BSPF_EXECUTOR_HPP

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "bspf/comm/communicator.hpp"
#include "bspf/comm/rendezvous.hpp"
#include "bspf/env.hpp"
#include "bspf/table.hpp"

namespace bspf {

/// Base of user classes instantiated once per worker by start_executable.
class Executable {
 public:
  virtual ~Executable() = default;
};

/// Result slot of functions returning void.
struct Unit {
  bool operator==(const Unit &) const = default;
};

/// Failure of a submission on one or more ranks.
class RankError : public Error {
 public:
  RankError(ErrorCode code, std::vector<int> ranks, const std::string &message)
      : Error(code, message), ranks_(std::move(ranks)) {}

  const std::vector<int> &ranks() const { return ranks_; }

 private:
  std::vector<int> ranks_;
};

enum class ExecutorState { Starting, Ready, Running, Stopped };

struct ExecutorConfig {
  comm::Backend backend = comm::Backend::InProcess;
  /// Tcp only: an existing rendezvous service. Empty starts a private one.
  std::string rendezvous;
  /// Empty picks a process-unique namespace.
  std::string ns;
  std::chrono::milliseconds timeout = comm::kDefaultTimeout;
  std::size_t result_cap_bytes = std::size_t{64} << 20;
  /// Defaults to the process-wide in-memory store.
  std::shared_ptr<DataStore> store;
  uint64_t seed = 0;
};

/// Completion of a submission: one result per rank, in rank order.
template <class R>
class Future {
 public:
  Future() = default;
  explicit Future(std::shared_future<std::vector<R>> f) : future_(std::move(f)) {}

  bool ready() const { return future_.wait_for(std::chrono::seconds(0)) == std::future_status::ready; }
  /// Blocks until done; rethrows the submission's error.
  const std::vector<R> &get() const { return future_.get(); }

  bool wait_for(std::chrono::milliseconds timeout) const {
    return future_.wait_for(timeout) == std::future_status::ready;
  }

 private:
  std::shared_future<std::vector<R>> future_;
};

/// Blocks until the future completes. Throws Timeout if it does not complete in
/// time; the submission keeps running.
template <class R>
const std::vector<R> &wait(const Future<R> &future, std::chrono::milliseconds timeout) {
  if (!future.wait_for(timeout)) throw Error(ErrorCode::Timeout, "submission still running");
  return future.get();
}

namespace detail {

template <class R>
std::size_t result_bytes(const R &r) {
  if constexpr (std::is_same_v<R, Table>) {
    return r.byte_size();
  } else if constexpr (std::is_same_v<R, std::string> || std::is_same_v<R, Bytes>) {
    return r.size();
  } else if constexpr (requires { r.size(); typename R::value_type; }) {
    return r.size() * sizeof(typename R::value_type);
  } else {
    return sizeof(R);
  }
}

}  // namespace detail

/**
 * A gang of persistent workers, one per rank, each holding a communicator that
 * is created once at start and reused by every submission. Submissions run one
 * at a time in FIFO order; each one runs on every worker concurrently.
 *
 * InProcess backend: workers are threads sharing in-memory mailboxes. Tcp
 * backend: workers are threads whose communicators talk over real sockets
 * bootstrapped through a rendezvous service.
 */
class Executor {
 public:
  static std::unique_ptr<Executor> start(std::size_t parallelism, ExecutorConfig config = {});

  ~Executor();
  Executor(const Executor &) = delete;
  Executor &operator=(const Executor &) = delete;

  std::size_t parallelism() const { return parallelism_; }
  ExecutorState state() const;
  const ExecutorConfig &config() const { return config_; }
  const std::string &ns() const { return config_.ns; }

  /// Identity of each worker's communicator.
  std::vector<uint64_t> communicator_ids() const;
  /// Number of communicator initializations performed by this executor.
  std::size_t communicator_inits() const { return inits_; }
  std::size_t completed_submissions() const;

  /// Instantiates one E per worker, replacing any previous executable. Blocks;
  /// a constructor failure raises ConstructionError naming the ranks.
  template <class E>
  void start_executable(std::function<std::unique_ptr<E>(ExecEnv &)> ctor);

  /// Invokes a method of the installed executable on every worker.
  template <class E, class R, class... P, class... A>
  Future<std::conditional_t<std::is_void_v<R>, Unit, R>> execute(R (E::*method)(ExecEnv &, P...), A &&...args);

  /// Runs fn(env) on every worker; workers share one copy of fn.
  template <class F>
  auto run(F fn) -> Future<std::conditional_t<std::is_void_v<std::invoke_result_t<F &, ExecEnv &>>, Unit,
                                              std::invoke_result_t<F &, ExecEnv &>>>;

  /// Cancels queued submissions, joins workers, closes communicators. Idempotent.
  void stop();

 private:
  struct Submission {
    std::function<void(int rank, ExecEnv &, std::unique_ptr<Executable> &)> body;
    std::function<void(std::vector<std::exception_ptr> &&)> complete;
    ErrorCode failure_code = ErrorCode::ExecutionError;
  };

  struct Worker {
    std::unique_ptr<comm::Communicator> communicator;
    std::unique_ptr<Executable> executable;
    CommTimer timer;
    std::thread thread;
  };

  Executor(std::size_t parallelism, ExecutorConfig config);

  void launch();
  void submit(std::shared_ptr<Submission> s);
  void dispatch_loop();
  void worker_loop(int rank);
  /// Runs fn on every worker and waits; returns per-rank errors.
  std::vector<std::exception_ptr> run_on_all(const std::function<void(int, Worker &)> &fn);
  ExecEnv make_env(int rank);

  template <class R>
  std::shared_ptr<Submission> make_submission(std::function<R(int, ExecEnv &, std::unique_ptr<Executable> &)> body,
                                              std::promise<std::vector<std::conditional_t<std::is_void_v<R>, Unit, R>>> promise,
                                              ErrorCode failure_code);

  const std::size_t parallelism_;
  ExecutorConfig config_;
  std::unique_ptr<comm::RendezvousServer> rendezvous_;
  std::vector<Worker> workers_;
  std::size_t inits_ = 0;

  mutable std::mutex mutex_;
  std::condition_variable cv_;           // queue and worker wake-ups
  std::condition_variable done_cv_;      // round completion
  ExecutorState state_ = ExecutorState::Starting;
  bool stopping_ = false;
  bool exit_workers_ = false;
  std::deque<std::shared_ptr<Submission>> queue_;
  std::thread dispatcher_;
  std::size_t completed_ = 0;

  // one round of work handed to every worker
  const std::function<void(int, Worker &)> *round_ = nullptr;
  uint64_t round_id_ = 0;
  std::size_t round_done_ = 0;
  std::vector<std::exception_ptr> round_errors_;
};

/// Combines per-rank failures into one RankError.
[[noreturn]] void throw_rank_failures(const std::vector<std::exception_ptr> &errors, ErrorCode code);

// ---------------------------------------------------------------------------

template <class R>
std::shared_ptr<Executor::Submission> Executor::make_submission(
    std::function<R(int, ExecEnv &, std::unique_ptr<Executable> &)> body,
    std::promise<std::vector<std::conditional_t<std::is_void_v<R>, Unit, R>>> promise, ErrorCode failure_code) {
  using Slot = std::conditional_t<std::is_void_v<R>, Unit, R>;
  auto results = std::make_shared<std::vector<std::optional<Slot>>>(parallelism_);
  auto shared_promise = std::make_shared<decltype(promise)>(std::move(promise));
  auto s = std::make_shared<Submission>();
  s->failure_code = failure_code;
  const auto cap = config_.result_cap_bytes;
  s->body = [body = std::move(body), results, cap](int rank, ExecEnv &env, std::unique_ptr<Executable> &exe) {
    if constexpr (std::is_void_v<R>) {
      body(rank, env, exe);
      (*results)[rank] = Unit{};
    } else {
      R r = body(rank, env, exe);
      if (detail::result_bytes(r) > cap) {
        throw Error(ErrorCode::ResultTooLarge, "result of " + std::to_string(detail::result_bytes(r)) +
                                                   " bytes exceeds the per-rank cap; use the store or files");
      }
      (*results)[rank] = std::move(r);
    }
  };
  s->complete = [results, shared_promise, failure_code](std::vector<std::exception_ptr> &&errors) {
    try {
      bool failed = false;
      for (auto &e : errors) failed = failed || e;
      if (failed) throw_rank_failures(errors, failure_code);
      std::vector<Slot> out;
      out.reserve(results->size());
      for (auto &r : *results) out.push_back(std::move(*r));
      shared_promise->set_value(std::move(out));
    } catch (...) {
      shared_promise->set_exception(std::current_exception());
    }
  };
  return s;
}

template <class E>
void Executor::start_executable(std::function<std::unique_ptr<E>(ExecEnv &)> ctor) {
  std::promise<std::vector<Unit>> promise;
  auto future = promise.get_future().share();
  std::function<void(int, ExecEnv &, std::unique_ptr<Executable> &)> body =
      [ctor = std::move(ctor)](int, ExecEnv &env, std::unique_ptr<Executable> &slot) {
        slot.reset();
        slot = ctor(env);
      };
  submit(make_submission<void>(std::move(body), std::move(promise), ErrorCode::ConstructionError));
  future.get();
}

template <class E, class R, class... P, class... A>
Future<std::conditional_t<std::is_void_v<R>, Unit, R>> Executor::execute(R (E::*method)(ExecEnv &, P...),
                                                                         A &&...args) {
  using Slot = std::conditional_t<std::is_void_v<R>, Unit, R>;
  std::promise<std::vector<Slot>> promise;
  auto future = promise.get_future().share();
  std::function<R(int, ExecEnv &, std::unique_ptr<Executable> &)> body =
      [method, tuple = std::make_tuple(std::decay_t<A>(std::forward<A>(args))...)](
          int, ExecEnv &env, std::unique_ptr<Executable> &slot) -> R {
    auto *target = dynamic_cast<E *>(slot.get());
    if (!target) throw Error(ErrorCode::NoExecutable, "no executable of the requested type is installed");
    return std::apply([&](const auto &...a) -> R { return (target->*method)(env, a...); }, tuple);
  };
  submit(make_submission<R>(std::move(body), std::move(promise), ErrorCode::ExecutionError));
  return Future<Slot>(std::move(future));
}

template <class F>
auto Executor::run(F fn) -> Future<std::conditional_t<std::is_void_v<std::invoke_result_t<F &, ExecEnv &>>, Unit,
                                                      std::invoke_result_t<F &, ExecEnv &>>> {
  using R = std::invoke_result_t<F &, ExecEnv &>;
  using Slot = std::conditional_t<std::is_void_v<R>, Unit, R>;
  std::promise<std::vector<Slot>> promise;
  auto future = promise.get_future().share();
  std::function<R(int, ExecEnv &, std::unique_ptr<Executable> &)> body =
      [fn = std::move(fn)](int, ExecEnv &env, std::unique_ptr<Executable> &) -> R { return fn(env); };
  submit(make_submission<R>(std::move(body), std::move(promise), ErrorCode::ExecutionError));
  return Future<Slot>(std::move(future));
}

}  // namespace bspf

#endif  // BSPF_EXECUTOR_HPP
