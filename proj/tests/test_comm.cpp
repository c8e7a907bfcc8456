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

#include <atomic>
#include <thread>

#include "bspf/comm/communicator.hpp"
#include "bspf/comm/frame.hpp"
#include "bspf/comm/mailbox.hpp"
#include "bspf/comm/rendezvous.hpp"
#include "doctest.h"
#include "support/support.hpp"

using namespace bspf;
using namespace bspf::comm;
using namespace bspf::testing;
using namespace std::chrono_literals;

namespace {

const Backend kBackends[] = {Backend::InProcess, Backend::Tcp};

Bytes str(const std::string &s) { return Bytes(s.begin(), s.end()); }

ErrorCode code_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::ExecutionError;
}

}  // namespace

TEST_SUITE("comm") {
  TEST_CASE("frame round trip and bad magic") {
    Frame f{Opcode::AllGather, 7, 3, 0xABCD, str("payload")};
    auto bytes = encode_frame(f);
    CHECK(bytes.size() == kFrameHeaderSize + 7);
    auto g = decode_frame(bytes);
    CHECK(g.opcode == f.opcode);
    CHECK(g.sequence == 7);
    CHECK(g.source == 3);
    CHECK(g.tag == 0xABCD);
    CHECK(g.payload == f.payload);
    bytes[0] ^= 0xFF;
    CHECK(code_of([&] { decode_frame(bytes); }) == ErrorCode::ProtocolMismatch);
  }

  TEST_CASE("mailbox FIFO, timeout, close and interrupt") {
    Mailbox box(2);
    auto any = [](const Frame &) { return true; };
    box.push({Opcode::P2P, 0, 1, 5, str("a")});
    box.push({Opcode::P2P, 0, 1, 5, str("b")});
    CHECK(box.pop(1, any, Mailbox::Clock::now() + 1s).payload == str("a"));
    CHECK(box.pop(1, any, Mailbox::Clock::now() + 1s).payload == str("b"));
    CHECK(code_of([&] { box.pop(1, any, Mailbox::Clock::now() + 20ms); }) == ErrorCode::Timeout);
    box.push({Opcode::P2P, 0, 1, 5, str("c")});
    box.close_source(1, "gone");
    CHECK(box.pop(1, any, Mailbox::Clock::now() + 1s).payload == str("c"));
    CHECK(code_of([&] { box.pop(1, any, Mailbox::Clock::now() + 1s); }) == ErrorCode::PeerFailure);
    std::thread t([&] {
      std::this_thread::sleep_for(20ms);
      box.interrupt();
    });
    CHECK(code_of([&] { box.pop(0, any, Mailbox::Clock::now() + 5s); }) == ErrorCode::PeerFailure);
    t.join();
  }

  TEST_CASE("rendezvous protocol") {
    RendezvousServer server;
    CHECK(server.handle("GET a/b") == "MISSING");
    CHECK(server.handle("PUT a/b 127.0.0.1:5") == "OK");
    CHECK(server.handle("GET a/b") == "OK 127.0.0.1:5");
    CHECK(server.handle("PUT a/c x") == "OK");
    CHECK(server.handle("LIST a/") == "OK a/b a/c");
    CHECK(server.handle("DEL a/b") == "OK");
    CHECK(server.handle("GET a/b") == "MISSING");
    CHECK(server.handle("BOGUS") == "ERR");
    RendezvousClient client(server.address(), 2s);
    client.put("k", "v w");
    CHECK(client.get("k") == std::optional<std::string>("v w"));
    CHECK_FALSE(client.get("nope").has_value());
    CHECK_FALSE(client.wait_for("nope", std::chrono::steady_clock::now() + 50ms).has_value());
  }

  TEST_CASE("unreachable rendezvous is RendezvousTimeout") {
    WorldConfig cfg;
    cfg.world_size = 2;
    cfg.backend = Backend::Tcp;
    cfg.rendezvous = "127.0.0.1:1";
    cfg.timeout = 300ms;
    CHECK(code_of([&] { Communicator::init(cfg); }) == ErrorCode::RendezvousTimeout);
  }

  TEST_CASE("world of one") {
    for (auto b : kBackends) {
      WorldConfig cfg;
      cfg.backend = b;
      cfg.ns = unique_name("one");
      auto c = Communicator::init(cfg);
      CHECK(c->rank() == 0);
      c->barrier();
      CHECK(c->all_to_all({str("x")}) == std::vector<Bytes>{str("x")});
      CHECK(c->gather(str("p"), 0) == std::vector<Bytes>{str("p")});
      CHECK(c->allgather(str("p")) == std::vector<Bytes>{str("p")});
      CHECK(c->broadcast(str("p"), 0) == str("p"));
      CHECK(c->allreduce_i64(7, ReduceOp::Sum) == 7);
    }
  }

  TEST_CASE("duplicate rank, world size mismatch, missing peers") {
    for (auto b : kBackends) {
      CAPTURE(backend_name(b));
      std::unique_ptr<RendezvousServer> server;
      if (b == Backend::Tcp) server = std::make_unique<RendezvousServer>();
      WorldConfig cfg;
      cfg.backend = b;
      cfg.world_size = 2;
      cfg.rendezvous = server ? server->address() : "";
      cfg.ns = unique_name("dup");
      cfg.timeout = 3s;
      // first rank 0 waits for its peer in the background
      std::thread first([cfg] {
        try {
          Communicator::init(cfg);
        } catch (const Error &) {
        }
      });
      std::this_thread::sleep_for(200ms);
      CHECK(code_of([&] { Communicator::init(cfg); }) == ErrorCode::DuplicateRank);
      first.join();

      if (b == Backend::InProcess) {
        auto other = cfg;
        other.ns = unique_name("size");
        other.timeout = 500ms;
        std::thread a([other] {
          try {
            Communicator::init(other);
          } catch (const Error &) {
          }
        });
        std::this_thread::sleep_for(100ms);
        auto wrong = other;
        wrong.rank = 1;
        wrong.world_size = 3;
        CHECK(code_of([&] { Communicator::init(wrong); }) == ErrorCode::WorldSizeMismatch);
        a.join();
      }

      // world of 4 with only 3 ranks: every joined rank times out
      auto partial = cfg;
      partial.world_size = 4;
      partial.ns = unique_name("partial");
      partial.timeout = 500ms;
      std::atomic<int> timeouts{0};
      std::vector<std::thread> ts;
      for (int r = 0; r < 3; ++r) {
        ts.emplace_back([&, r] {
          auto mine = partial;
          mine.rank = r;
          try {
            Communicator::init(mine);
          } catch (const Error &e) {
            if (e.code() == ErrorCode::RendezvousTimeout) ++timeouts;
          }
        });
      }
      for (auto &t : ts) t.join();
      CHECK(timeouts == 3);
    }
  }

  TEST_CASE("barrier waits for the late rank") {
    for (auto b : kBackends) {
      std::atomic<int64_t> entered{0};
      std::vector<int64_t> returned(4);
      run_world(4, b, [&](ExecEnv &env) {
        auto now = [] { return std::chrono::steady_clock::now().time_since_epoch().count(); };
        if (env.rank == 0) {
          std::this_thread::sleep_for(100ms);
          entered = now();
        }
        env.comm().barrier();
        returned[env.rank] = now();
      });
      for (int r = 1; r < 4; ++r) CHECK(returned[r] >= entered.load());
    }
  }

  TEST_CASE("point to point") {
    for (auto b : kBackends) {
      run_world(2, b, [&](ExecEnv &env) {
        auto &c = env.comm();
        if (env.rank == 0) {
          c.send(1, 9, Bytes{0xAB});
          c.send(1, 4, str("first"));
          c.send(1, 4, str("second"));
        } else {
          CHECK(c.recv(0, 9) == Bytes{0xAB});
          CHECK(c.recv(0, 4) == str("first"));
          CHECK(c.recv(0, 4) == str("second"));
        }
        CHECK(code_of([&] { c.send(env.rank, 1, {}); }) == ErrorCode::InvalidRank);
        CHECK(code_of([&] { c.recv(5, 1); }) == ErrorCode::InvalidRank);
      });
    }
  }

  TEST_CASE("recv without a matching send times out") {
    for (auto b : kBackends) {
      run_world(
          2, b,
          [&](ExecEnv &env) {
            if (env.rank == 1) CHECK(code_of([&] { env.comm().recv(0, 77); }) == ErrorCode::Timeout);
            // rank 0 must outlive rank 1's wait so the failure is a timeout, not a closed peer
            if (env.rank == 0) std::this_thread::sleep_for(600ms);
          },
          300ms);
    }
  }

  TEST_CASE("peer going away is PeerFailure") {
    for (auto b : kBackends) {
      run_world(2, b, [&](ExecEnv &env) {
        if (env.rank == 1) {
          CHECK(code_of([&] { env.comm().recv(0, 1); }) == ErrorCode::PeerFailure);
        }
      });
    }
  }

  TEST_CASE("mismatched collectives are ProtocolMismatch") {
    for (auto b : kBackends) {
      std::atomic<bool> mismatch{false};
      run_world(
          2, b,
          [&](ExecEnv &env) {
            try {
              if (env.rank == 0) {
                env.comm().gather(str("x"), 0);
              } else {
                env.comm().allgather(str("y"));
              }
            } catch (const Error &e) {
              if (e.code() == ErrorCode::ProtocolMismatch) mismatch = true;
            }
          },
          500ms);
      CHECK(mismatch);
    }
  }

  TEST_CASE("collective examples") {
    for (auto b : kBackends) {
      run_world(2, b, [&](ExecEnv &env) {
        const std::string me = env.rank == 0 ? "a" : "b";
        auto got = env.comm().all_to_all({str(me + "0"), str(me + "1")});
        const std::string r = std::to_string(env.rank);
        CHECK(got == std::vector<Bytes>{str("a" + r), str("b" + r)});
        CHECK(env.comm().allgather(str(me)) == std::vector<Bytes>{str("a"), str("b")});
      });
      run_world(3, b, [&](ExecEnv &env) {
        auto got = env.comm().gather(str("r" + std::to_string(env.rank)), 1);
        if (env.rank == 1) {
          CHECK(got == std::vector<Bytes>{str("r0"), str("r1"), str("r2")});
        } else {
          CHECK(got.empty());
        }
        CHECK(env.comm().allreduce_i64(std::vector<int64_t>{5, -2, 9}[env.rank], ReduceOp::Min) == -2);
      });
      run_world(4, b, [&](ExecEnv &env) {
        CHECK(env.comm().broadcast(env.rank == 2 ? str("root") : Bytes{}, 2) == str("root"));
        CHECK(env.comm().allreduce_i64(env.rank + 1, ReduceOp::Sum) == 10);
        CHECK(env.comm().allreduce_i64(env.rank + 1, ReduceOp::Max) == 4);
        // allgather agrees with gather followed by broadcast
        const auto payload = str(std::string(env.rank + 1, 'x'));
        auto all = env.comm().allgather(payload);
        auto gathered = env.comm().gather(payload, 0);
        Bytes flat;
        for (auto &g : gathered) {
          flat.push_back(static_cast<uint8_t>(g.size()));
          flat.insert(flat.end(), g.begin(), g.end());
        }
        auto shared = env.comm().broadcast(flat, 0);
        std::vector<Bytes> rebuilt;
        for (std::size_t i = 0; i < shared.size(); i += 1 + shared[i]) {
          rebuilt.emplace_back(shared.begin() + i + 1, shared.begin() + i + 1 + shared[i]);
        }
        CHECK(rebuilt == all);
      });
    }
  }

  TEST_CASE("randomized conformance against the mailbox simulation") {
    for (auto b : kBackends) {
      for (std::size_t p : {1, 2, 3, 4, 8}) {
        CAPTURE(p);
        try {
          CHECK(comm_conformance(b, p, 100 + p, 25) == 25);
        } catch (const std::exception &e) {
          FAIL(e.what());
        }
      }
    }
  }

  TEST_CASE("interrupt and recover re-align the world") {
    for (auto b : kBackends) {
      run_world(3, b, [&](ExecEnv &env) {
        auto &c = env.comm();
        // rank 2 skips a collective the others started
        if (env.rank != 2) {
          std::thread stopper([&] {
            std::this_thread::sleep_for(100ms);
            c.interrupt();
          });
          CHECK(code_of([&] { c.allgather(str("lost")); }) == ErrorCode::PeerFailure);
          stopper.join();
        }
        c.recover(5s);
        CHECK(c.sequence() == 0u);
        CHECK(c.allreduce_i64(1, ReduceOp::Sum) == 3);
      });
    }
  }
}
