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

#include <algorithm>
#include <mutex>

#include "bspf/operators.hpp"
#include "bspf/table_comm.hpp"
#include "doctest.h"
#include "support/support.hpp"

using namespace bspf;
using namespace bspf::testing;

namespace {

const comm::Backend kBackends[] = {comm::Backend::InProcess, comm::Backend::Tcp};

std::vector<Value> ints(std::initializer_list<int64_t> xs) {
  std::vector<Value> out;
  for (auto x : xs) out.push_back(x);
  return out;
}

Table keys_only(std::vector<Value> v) { return build_table(Schema({{"k", Domain::Int64}}), {std::move(v)}); }

/// Rank r's share of a global table split into p contiguous pieces.
Table piece(const Table &t, std::size_t r, std::size_t p) {
  auto lengths = even_split_lengths(t.num_rows(), p);
  std::size_t start = 0;
  for (std::size_t i = 0; i < r; ++i) start += lengths[i];
  return slice(t, start, lengths[r]);
}

/// Runs op on every rank of a world and returns the rank-ordered outputs.
std::vector<Table> run_op(std::size_t p, comm::Backend b, const std::function<Table(ExecEnv &)> &op) {
  std::vector<std::optional<Table>> out(p);
  run_world(p, b, [&](ExecEnv &env) { out[env.rank] = op(env); });
  std::vector<Table> tables;
  for (auto &t : out) tables.push_back(std::move(*t));
  return tables;
}

}  // namespace

TEST_SUITE("operators") {
  TEST_CASE("join with one rank equals the local kernel") {
    Rng rng(1);
    auto schema = Schema({{"k", Domain::Int64}, {"v", Domain::Utf8}});
    auto l = random_table(rng, schema, 40, 0.1), r = random_table(rng, schema, 30, 0.1);
    auto out = run_op(1, comm::Backend::InProcess, [&](ExecEnv &env) { return dist_join(env, l, r, {{0}}, {{0}}, JoinType::Left); });
    CHECK(out[0] == local_hash_join(l, r, {{0}}, {{0}}, JoinType::Left));
  }

  TEST_CASE("join result does not depend on placement") {
    auto l = keys_only(ints({1, 2})), r = keys_only(ints({2, 3}));
    for (int placement = 0; placement < 2; ++placement) {
      auto out = run_op(2, comm::Backend::InProcess, [&](ExecEnv &env) {
        const bool mine = (env.rank == placement);
        return dist_join(env, mine ? l : slice(l, 0, 0), mine ? slice(r, 0, 0) : r, {{0}}, {{0}}, JoinType::Inner);
      });
      auto all = concat(out);
      CHECK(rows_of(all) == std::vector<Row>{{int64_t{2}, int64_t{2}}});
    }
  }

  TEST_CASE("randomized joins match the serial reference") {
    for (auto b : kBackends) {
      for (std::size_t p : {2, 3, 4, 8}) {
        Rng rng(p * 13 + (b == comm::Backend::Tcp));
        for (int iter = 0; iter < 3; ++iter) {
          const auto kd = static_cast<Domain>(rng() % 4);
          Schema ls({{"k", kd}, {"x", static_cast<Domain>(rng() % 4)}});
          Schema rs({{"k", kd}, {"y", static_cast<Domain>(rng() % 4)}});
          auto l = random_table(rng, ls, rng() % 120, 0.1, 12), r = random_table(rng, rs, rng() % 120, 0.1, 12);
          for (auto jt : {JoinType::Inner, JoinType::Left, JoinType::Right, JoinType::FullOuter}) {
            auto out = run_op(p, b, [&](ExecEnv &env) {
              return dist_join(env, piece(l, env.rank, p), piece(r, env.rank, p), {{0}}, {{0}}, jt);
            });
            std::string why;
            CHECK_MESSAGE(same_multiset(concat(out), ref_join(l, r, {0}, {0}, jt), &why), why);
          }
        }
      }
    }
  }

  TEST_CASE("groupby on one key lands on one rank") {
    auto t = build_table(Schema({{"k", Domain::Int64}, {"v", Domain::Int64}}), {ints({5, 5, 5, 5, 5, 5}), ints({1, 2, 3, 4, 5, 6})});
    auto out = run_op(3, comm::Backend::InProcess,
                      [&](ExecEnv &env) { return dist_groupby(env, piece(t, env.rank, 3), {{0}}, {{1, AggOp::Sum, "s"}}); });
    std::size_t nonempty = 0;
    for (auto &o : out) nonempty += o.num_rows() > 0;
    CHECK(nonempty == 1);
    CHECK(rows_of(concat(out)) == std::vector<Row>{{int64_t{5}, int64_t{21}}});
  }

  TEST_CASE("randomized groupby matches the serial reference") {
    for (auto b : kBackends) {
      for (std::size_t p : {1, 2, 4, 8}) {
        Rng rng(p * 7 + (b == comm::Backend::Tcp));
        for (int iter = 0; iter < 3; ++iter) {
          Schema s({{"k", static_cast<Domain>(rng() % 4)}, {"i", Domain::Int64}, {"f", Domain::Float64}});
          auto t = random_table(rng, s, rng() % 200, 0.15, 10);
          AggSpec aggs;
          for (std::size_t c : {1, 2}) {
            for (auto op : {AggOp::Sum, AggOp::Count, AggOp::Min, AggOp::Max, AggOp::Mean}) {
              aggs.push_back({c, op, std::string(s.field(c).name) + "_" + std::string(agg_op_name(op))});
            }
          }
          auto out = run_op(p, b, [&](ExecEnv &env) { return dist_groupby(env, piece(t, env.rank, p), {{0}}, aggs); });
          std::string why;
          CHECK_MESSAGE(same_multiset(concat(out), ref_groupby(t, {0}, aggs), &why), why);
        }
      }
    }
  }

  TEST_CASE("sort with one rank equals the local kernel") {
    Rng rng(4);
    auto t = random_table(rng, Schema({{"k", Domain::Float64}, {"v", Domain::Utf8}}), 50, 0.1);
    auto out = run_op(1, comm::Backend::InProcess, [&](ExecEnv &env) { return dist_sort(env, t, {{0}}, {false}); });
    CHECK(out[0] == local_sort(t, {{0}}, {false}));
  }

  TEST_CASE("reverse sorted uniform input comes out ascending and balanced") {
    Rng rng(8);
    std::vector<int64_t> keys;
    for (int i = 0; i < 20000; ++i) keys.push_back(static_cast<int64_t>(rng() % 1000000000));
    std::sort(keys.rbegin(), keys.rend());
    std::vector<Value> v(keys.begin(), keys.end());
    auto t = keys_only(v);
    auto out = run_op(4, comm::Backend::InProcess, [&](ExecEnv &env) { return dist_sort(env, piece(t, env.rank, 4), {{0}}, {}); });
    auto all = concat(out);
    CHECK(all == local_sort(t, {{0}}, {}));
    for (auto &o : out) CHECK(o.num_rows() <= 2 * 20000 / 4);
  }

  TEST_CASE("randomized sort matches the serial reference") {
    for (auto b : kBackends) {
      for (std::size_t p : {2, 3, 4, 8}) {
        Rng rng(p * 17 + (b == comm::Backend::Tcp));
        for (int iter = 0; iter < 3; ++iter) {
          Schema s({{"a", static_cast<Domain>(rng() % 4)}, {"b", static_cast<Domain>(rng() % 4)}, {"id", Domain::Int64}});
          auto t = random_table(rng, s, rng() % 200, 0.15, 6);
          std::vector<std::size_t> keys{0};
          if (rng() % 2) keys.push_back(1);
          std::vector<bool> asc;
          for (std::size_t k = 0; k < keys.size(); ++k) asc.push_back(rng() % 2);
          auto out = run_op(p, b, [&](ExecEnv &env) { return dist_sort(env, piece(t, env.rank, p), {keys}, asc); });
          auto got = concat(out), expected = ref_sort(t, keys, asc);
          // key sequence must match exactly; ties may be ordered differently across ranks
          auto key_cols = [&](const Table &x) { return select_columns(x, keys); };
          std::string why;
          CHECK_MESSAGE(same_rows(key_cols(got), key_cols(expected), &why), why);
          CHECK_MESSAGE(same_multiset(got, expected, &why), why);
          for (auto &o : out) CHECK(same_rows(o, local_sort(o, {keys}, asc)));
        }
      }
    }
  }

  TEST_CASE("splitter selection") {
    std::vector<Value> v;
    for (int64_t i = 0; i < 16; ++i) v.push_back(i * 10);
    auto c = keys_only(v);
    CHECK(splitter_select(c, 4, {}) == keys_only(ints({40, 80, 120})));
    CHECK(splitter_select(c, 1, {}).num_rows() == 0);
    // uniform data: partition sizes within 2x of the mean
    Rng rng(5);
    std::vector<Value> u;
    for (int i = 0; i < 100000; ++i) u.push_back(static_cast<int64_t>(rng() % 1000000));
    auto t = keys_only(u);
    auto out = run_op(8, comm::Backend::InProcess, [&](ExecEnv &env) { return dist_sort(env, piece(t, env.rank, 8), {{0}}, {}); });
    for (auto &o : out) {
      CHECK(o.num_rows() <= 2 * 100000 / 8);
      CHECK(o.num_rows() >= 100000 / 8 / 2);
    }
  }

  TEST_CASE("dist_map: local, identity, and no communication") {
    Rng rng(6);
    auto t = random_table(rng, Schema({{"k", Domain::Int64}, {"v", Domain::Float64}}), 100, 0.1);
    std::mutex m;
    std::vector<double> comm_ms;
    auto out = run_op(4, comm::Backend::InProcess, [&](ExecEnv &env) {
      env.timer->reset();
      auto mine = piece(t, env.rank, 4);
      auto same = dist_map(env, mine, [](const Table &x) { return x; });
      CHECK(same == mine);
      auto a = dist_map(env, mine, [](const Table &x) { return add_scalar(x, 0, Value{int64_t{3}}); });
      auto b = dist_map(env, a, [](const Table &x) { return add_scalar(x, 1, Value{1.5}); });
      std::lock_guard lock(m);
      comm_ms.push_back(env.timer->comm_ms());
      return b;
    });
    for (double c : comm_ms) CHECK(c == 0.0);
    CHECK(same_rows(concat(out), add_scalar(add_scalar(t, 0, Value{int64_t{3}}), 1, Value{1.5})));
  }

  TEST_CASE("join timing splits communication and computation") {
    Rng rng(9);
    auto t = random_table(rng, Schema({{"k", Domain::Int64}, {"v", Domain::Int64}}), 20000, 0.0, 5000);
    std::mutex m;
    run_world(2, comm::Backend::InProcess, [&](ExecEnv &env) {
      env.timer->reset();
      const auto t0 = std::chrono::steady_clock::now();
      dist_join(env, piece(t, env.rank, 2), piece(t, env.rank, 2), {{0}}, {{0}}, JoinType::Inner);
      const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      std::lock_guard lock(m);
      CHECK(env.timer->comm_ms() > 0.0);
      CHECK(env.timer->comp_ms() > 0.0);
      CHECK(env.timer->comm_ms() + env.timer->comp_ms() <= wall);
    });
  }
}
