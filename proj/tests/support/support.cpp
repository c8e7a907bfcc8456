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

#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <tuple>
#include <thread>

#include "bspf/comm/rendezvous.hpp"
#include "bspf/store.hpp"

namespace bspf::testing {

Schema random_schema(Rng &rng, std::size_t columns) {
  std::vector<Field> fields;
  for (std::size_t i = 0; i < columns; ++i) {
    fields.push_back({"c" + std::to_string(i), static_cast<Domain>(rng() % 4)});
  }
  return Schema(std::move(fields));
}

Value random_value(Rng &rng, Domain d, double null_p, int range) {
  std::uniform_real_distribution<double> u(0, 1);
  if (u(rng) < null_p) return std::monostate{};
  const auto r = static_cast<int64_t>(rng() % static_cast<uint64_t>(range));
  switch (d) {
    case Domain::Int64: return r - range / 2;
    case Domain::Float64: {
      const auto pick = rng() % 16;
      if (pick == 0) return std::nan("");
      if (pick == 1) return -0.0;
      return static_cast<double>(r - range / 2) * 0.25;
    }
    case Domain::Utf8: {
      static const char *words[] = {"", "a", "b", "ab", "ba", "héllo", "zz", "a,b", "\"q\""};
      return std::string(words[r % 9]);
    }
    case Domain::Boolean: return (r & 1) != 0;
  }
  return std::monostate{};
}

Table random_table(Rng &rng, const Schema &schema, std::size_t rows, double null_p, int range) {
  std::vector<Row> data(rows);
  for (auto &row : data) {
    for (const auto &f : schema.fields()) row.push_back(random_value(rng, f.domain, null_p, range));
  }
  return table_of(schema, data);
}

std::vector<Row> rows_of(const Table &t) {
  std::vector<Row> out(t.num_rows());
  for (std::size_t i = 0; i < t.num_rows(); ++i) {
    for (std::size_t c = 0; c < t.num_columns(); ++c) out[i].push_back(t.value_at(i, c));
  }
  return out;
}

Table table_of(const Schema &schema, const std::vector<Row> &rows) {
  std::vector<std::vector<Value>> cols(schema.num_columns());
  for (const auto &r : rows) {
    for (std::size_t c = 0; c < cols.size(); ++c) cols[c].push_back(r.at(c));
  }
  return build_table(schema, cols);
}

bool same_value(const Value &a, const Value &b) {
  if (a.index() != b.index()) return false;
  if (auto *x = std::get_if<double>(&a)) {
    const double y = std::get<double>(b);
    return (std::isnan(*x) && std::isnan(y)) || *x == y;
  }
  return a == b;
}

int order_values(const Value &a, const Value &b) {
  const bool na = std::holds_alternative<std::monostate>(a), nb = std::holds_alternative<std::monostate>(b);
  if (na || nb) return na == nb ? 0 : (na ? 1 : -1);
  if (auto *x = std::get_if<double>(&a)) {
    const double y = std::get<double>(b);
    if (std::isnan(*x) || std::isnan(y)) return std::isnan(*x) == std::isnan(y) ? 0 : (std::isnan(*x) ? 1 : -1);
    return *x < y ? -1 : (y < *x ? 1 : 0);
  }
  return a < b ? -1 : (b < a ? 1 : 0);
}

namespace {

std::string show(const Row &r) {
  std::string s = "(";
  for (std::size_t i = 0; i < r.size(); ++i) s += (i ? ", " : "") + value_to_string(r[i]);
  return s + ")";
}

bool same_row_lists(const std::vector<Row> &a, const std::vector<Row> &b, std::string *why) {
  if (a.size() != b.size()) {
    if (why) *why = "row count " + std::to_string(a.size()) + " vs " + std::to_string(b.size());
    return false;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    bool eq = a[i].size() == b[i].size();
    for (std::size_t c = 0; eq && c < a[i].size(); ++c) eq = same_value(a[i][c], b[i][c]);
    if (!eq) {
      if (why) *why = "row " + std::to_string(i) + ": " + show(a[i]) + " vs " + show(b[i]);
      return false;
    }
  }
  return true;
}

void sort_rows(std::vector<Row> &rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const Row &x, const Row &y) {
    for (std::size_t c = 0; c < x.size(); ++c) {
      if (int r = order_values(x[c], y[c])) return r < 0;
    }
    return false;
  });
}

bool is_null(const Value &v) { return std::holds_alternative<std::monostate>(v); }

}  // namespace

bool same_rows(const Table &a, const Table &b, std::string *why) {
  if (!(a.schema() == b.schema())) {
    if (why) *why = "schemas differ";
    return false;
  }
  return same_row_lists(rows_of(a), rows_of(b), why);
}

bool same_multiset(const Table &a, const Table &b, std::string *why) {
  if (!(a.schema() == b.schema())) {
    if (why) *why = "schemas differ";
    return false;
  }
  auto ra = rows_of(a), rb = rows_of(b);
  sort_rows(ra);
  sort_rows(rb);
  return same_row_lists(ra, rb, why);
}

Table ref_join(const Table &left, const Table &right, const std::vector<std::size_t> &lk,
               const std::vector<std::size_t> &rk, JoinType jt) {
  auto L = rows_of(left), R = rows_of(right);
  auto matches = [&](const Row &l, const Row &r) {
    for (std::size_t k = 0; k < lk.size(); ++k) {
      if (is_null(l[lk[k]]) || is_null(r[rk[k]]) || !same_value(l[lk[k]], r[rk[k]])) return false;
    }
    return true;
  };
  const Row left_nulls(left.num_columns()), right_nulls(right.num_columns());
  std::vector<Row> out;
  std::vector<bool> used(R.size(), false);
  for (const auto &l : L) {
    bool any = false;
    for (std::size_t j = 0; j < R.size(); ++j) {
      if (!matches(l, R[j])) continue;
      Row row = l;
      row.insert(row.end(), R[j].begin(), R[j].end());
      out.push_back(std::move(row));
      used[j] = any = true;
    }
    if (!any && (jt == JoinType::Left || jt == JoinType::FullOuter)) {
      Row row = l;
      row.insert(row.end(), right_nulls.begin(), right_nulls.end());
      out.push_back(std::move(row));
    }
  }
  if (jt == JoinType::Right || jt == JoinType::FullOuter) {
    for (std::size_t j = 0; j < R.size(); ++j) {
      if (used[j]) continue;
      Row row = left_nulls;
      row.insert(row.end(), R[j].begin(), R[j].end());
      out.push_back(std::move(row));
    }
  }
  // output naming: right names that clash get "_r" until unique
  std::vector<Field> fields = left.schema().fields();
  for (auto f : right.schema().fields()) {
    auto taken = [&](const std::string &n) {
      for (const auto &x : fields) {
        if (x.name == n) return true;
      }
      return false;
    };
    while (taken(f.name)) f.name += "_r";
    fields.push_back(f);
  }
  return table_of(Schema(std::move(fields)), out);
}

Table ref_groupby(const Table &t, const std::vector<std::size_t> &keys, const AggSpec &aggs) {
  const auto rows = rows_of(t);
  std::vector<std::size_t> first;              // representative row per group
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t g = 0;
    for (; g < first.size(); ++g) {
      bool eq = true;
      for (auto k : keys) eq = eq && same_value(rows[first[g]][k], rows[i][k]);
      if (eq) break;
    }
    if (g == first.size()) {
      first.push_back(i);
      members.emplace_back();
    }
    members[g].push_back(i);
  }
  std::vector<Field> fields;
  for (auto k : keys) fields.push_back(t.schema().field(k));
  for (const auto &a : aggs) {
    const auto d = t.schema().field(a.column).domain;
    fields.push_back({a.name, a.op == AggOp::Count ? Domain::Int64 : a.op == AggOp::Mean ? Domain::Float64 : d});
  }
  std::vector<Row> out;
  for (std::size_t g = 0; g < first.size(); ++g) {
    Row row;
    for (auto k : keys) row.push_back(rows[first[g]][k]);
    for (const auto &a : aggs) {
      std::vector<Value> present;
      for (auto i : members[g]) {
        if (!is_null(rows[i][a.column])) present.push_back(rows[i][a.column]);
      }
      if (a.op == AggOp::Count) {
        row.push_back(static_cast<int64_t>(present.size()));
        continue;
      }
      if (present.empty()) {
        row.push_back(std::monostate{});
        continue;
      }
      Value acc = present[0];
      for (std::size_t j = 1; j < present.size(); ++j) {
        const auto &v = present[j];
        if (a.op == AggOp::Sum || a.op == AggOp::Mean) {
          if (auto *x = std::get_if<int64_t>(&acc)) {
            acc = static_cast<int64_t>(static_cast<uint64_t>(*x) + static_cast<uint64_t>(std::get<int64_t>(v)));
          } else {
            acc = std::get<double>(acc) + std::get<double>(v);
          }
        } else if ((a.op == AggOp::Min && order_values(v, acc) < 0) || (a.op == AggOp::Max && order_values(v, acc) > 0)) {
          acc = v;
        }
      }
      if (a.op == AggOp::Mean) {
        const double s = std::holds_alternative<int64_t>(acc) ? static_cast<double>(std::get<int64_t>(acc)) : std::get<double>(acc);
        acc = s / static_cast<double>(present.size());
      }
      row.push_back(acc);
    }
    out.push_back(std::move(row));
  }
  return table_of(Schema(std::move(fields)), out);
}

Table ref_sort(const Table &t, const std::vector<std::size_t> &keys, const std::vector<bool> &ascending) {
  auto rows = rows_of(t);
  auto less = [&](const Row &x, const Row &y) {
    for (std::size_t k = 0; k < keys.size(); ++k) {
      const auto &a = x[keys[k]], &b = y[keys[k]];
      int r = order_values(a, b);
      if (r == 0) continue;
      const bool asc = ascending.empty() || ascending[k];
      if (!asc && !is_null(a) && !is_null(b)) r = -r;
      return r < 0;
    }
    return false;
  };
  // insertion sort: trivially stable
  for (std::size_t i = 1; i < rows.size(); ++i) {
    for (std::size_t j = i; j > 0 && less(rows[j], rows[j - 1]); --j) std::swap(rows[j], rows[j - 1]);
  }
  return table_of(t.schema(), rows);
}

std::vector<Table> ref_shuffle(const std::vector<Table> &inputs, const std::vector<std::vector<uint32_t>> &assign,
                               std::size_t world) {
  std::vector<std::vector<Row>> out(world);
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    auto rows = rows_of(inputs[s]);
    for (std::size_t i = 0; i < rows.size(); ++i) out.at(assign[s][i]).push_back(rows[i]);
  }
  std::vector<Table> tables;
  for (auto &rows : out) tables.push_back(table_of(inputs.at(0).schema(), rows));
  return tables;
}

namespace mailbox {

std::vector<std::vector<Bytes>> all_to_all(const std::vector<std::vector<Bytes>> &outgoing) {
  const auto p = outgoing.size();
  // one FIFO per (src, dst); deliver in a single pass
  std::map<std::pair<std::size_t, std::size_t>, std::vector<Bytes>> boxes;
  for (std::size_t s = 0; s < p; ++s) {
    for (std::size_t d = 0; d < p; ++d) boxes[{s, d}].push_back(outgoing[s][d]);
  }
  std::vector<std::vector<Bytes>> incoming(p, std::vector<Bytes>(p));
  for (std::size_t d = 0; d < p; ++d) {
    for (std::size_t s = 0; s < p; ++s) incoming[d][s] = boxes[{s, d}].front();
  }
  return incoming;
}

std::vector<std::vector<Bytes>> gather(const std::vector<Bytes> &payloads, int root) {
  std::vector<std::vector<Bytes>> out(payloads.size());
  out.at(root) = payloads;
  return out;
}

std::vector<std::vector<Bytes>> allgather(const std::vector<Bytes> &payloads) {
  return std::vector<std::vector<Bytes>>(payloads.size(), payloads);
}

std::vector<Bytes> broadcast(const std::vector<Bytes> &payloads, int root) {
  return std::vector<Bytes>(payloads.size(), payloads.at(root));
}

std::vector<int64_t> allreduce(const std::vector<int64_t> &values, comm::ReduceOp op) {
  int64_t acc = values.at(0);
  for (std::size_t i = 1; i < values.size(); ++i) {
    switch (op) {
      case comm::ReduceOp::Sum: acc = static_cast<int64_t>(static_cast<uint64_t>(acc) + static_cast<uint64_t>(values[i])); break;
      case comm::ReduceOp::Min: acc = std::min(acc, values[i]); break;
      case comm::ReduceOp::Max: acc = std::max(acc, values[i]); break;
    }
  }
  return std::vector<int64_t>(values.size(), acc);
}

}  // namespace mailbox

std::string unique_name(const std::string &prefix) {
  static std::atomic<int> n{0};
  return prefix + "-" + std::to_string(::getpid()) + "-" + std::to_string(n++);
}

void run_world(std::size_t world, comm::Backend backend, const std::function<void(ExecEnv &)> &fn,
               std::chrono::milliseconds timeout) {
  std::unique_ptr<comm::RendezvousServer> server;
  if (backend == comm::Backend::Tcp) server = std::make_unique<comm::RendezvousServer>();
  const auto ns = unique_name("world");
  std::vector<std::exception_ptr> errors(world);
  std::vector<std::thread> threads;
  for (std::size_t r = 0; r < world; ++r) {
    threads.emplace_back([&, r] {
      try {
        comm::WorldConfig cfg;
        cfg.world_size = static_cast<int>(world);
        cfg.rank = static_cast<int>(r);
        cfg.backend = backend;
        cfg.rendezvous = server ? server->address() : "";
        cfg.ns = ns;
        cfg.timeout = timeout;
        auto c = comm::Communicator::init(cfg);
        CommTimer timer;
        c->set_timer(&timer);
        ExecEnv env;
        env.rank = static_cast<int>(r);
        env.world_size = static_cast<int>(world);
        env.communicator = c.get();
        env.timer = &timer;
        env.store = MemoryStore::shared();
        fn(env);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    });
  }
  for (auto &t : threads) t.join();
  for (auto &e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::size_t comm_conformance(comm::Backend backend, std::size_t world, uint64_t seed, std::size_t cases) {
  run_world(world, backend, [&](ExecEnv &env) {
    auto &c = env.comm();
    const int p = env.world_size, me = env.rank;
    auto fail = [&](std::size_t i, const std::string &what) {
      throw Error(ErrorCode::ExecutionError, "case " + std::to_string(i) + " rank " + std::to_string(me) + ": " + what);
    };
    for (std::size_t i = 0; i < cases; ++i) {
      Rng rng(seed * 1000003 + i);
      const auto op = rng() % 7;
      std::vector<Bytes> payloads;
      for (int r = 0; r < p; ++r) payloads.push_back(random_bytes(rng, 96));
      const int root = static_cast<int>(rng() % p);
      switch (op) {
        case 0: c.barrier(); break;
        case 1: {
          if (p == 1) {
            try {
              c.send(0, 1, payloads[0]);
              fail(i, "send to self accepted");
            } catch (const Error &e) {
              if (e.code() != ErrorCode::InvalidRank) throw;
            }
            break;
          }
          const int shift = 1 + static_cast<int>(rng() % (p - 1));
          const auto tag = static_cast<uint32_t>(rng() % 1000);
          const std::size_t count = 1 + rng() % 3;
          // message m from rank r: payloads[(r + m) % p] with a trailing marker byte
          auto message = [&](int r, std::size_t m) {
            Bytes b = payloads[(r + m) % p];
            b.push_back(static_cast<uint8_t>(m));
            return b;
          };
          for (std::size_t m = 0; m < count; ++m) c.send((me + shift) % p, tag, message(me, m));
          const int src = (me - shift + p) % p;
          for (std::size_t m = 0; m < count; ++m) {
            if (c.recv(src, tag) != message(src, m)) fail(i, "recv order or content");
          }
          break;
        }
        case 2: {
          std::vector<std::vector<Bytes>> outgoing(p);
          for (int s = 0; s < p; ++s) {
            for (int d = 0; d < p; ++d) {
              Bytes b = payloads[(s + d) % p];
              b.push_back(static_cast<uint8_t>(s * 16 + d));
              outgoing[s].push_back(b);
            }
          }
          if (c.all_to_all(outgoing[me]) != mailbox::all_to_all(outgoing)[me]) fail(i, "all_to_all");
          break;
        }
        case 3:
          if (c.gather(payloads[me], root) != mailbox::gather(payloads, root)[me]) fail(i, "gather");
          break;
        case 4:
          if (c.allgather(payloads[me]) != mailbox::allgather(payloads)[me]) fail(i, "allgather");
          break;
        case 5:
          if (c.broadcast(me == root ? payloads[root] : Bytes{}, root) != mailbox::broadcast(payloads, root)[me]) {
            fail(i, "broadcast");
          }
          break;
        case 6: {
          std::vector<int64_t> values;
          for (int r = 0; r < p; ++r) values.push_back(static_cast<int64_t>(rng()));
          const auto rop = static_cast<comm::ReduceOp>(rng() % 3);
          if (c.allreduce_i64(values[me], rop) != mailbox::allreduce(values, rop)[me]) fail(i, "allreduce");
          break;
        }
      }
    }
  });
  return cases;
}

namespace {

[[noreturn]] void mismatch(const std::string &kernel, uint64_t seed, const std::string &why) {
  throw Error(ErrorCode::ExecutionError, kernel + " differs from its reference (case seed " + std::to_string(seed) +
                                             "): " + why);
}

std::size_t random_rows(Rng &rng) {
  // favour small tables but reach the 256-row cap
  const auto pick = rng() % 10;
  return pick < 6 ? rng() % 33 : (pick < 9 ? rng() % 129 : rng() % 257);
}

/// Left/right tables sharing key domains; right names sometimes clash.
std::tuple<Table, Table, std::vector<std::size_t>, std::vector<std::size_t>> join_inputs(Rng &rng) {
  const std::size_t nk = 1 + rng() % 2;
  std::vector<Domain> key_domains;
  for (std::size_t k = 0; k < nk; ++k) key_domains.push_back(static_cast<Domain>(rng() % 4));
  auto side = [&](const std::string &prefix, std::vector<std::size_t> &keys) {
    std::vector<Field> fields;
    const std::size_t extra = rng() % 3;
    const std::size_t total = nk + extra;
    std::vector<std::size_t> slots(total);
    std::iota(slots.begin(), slots.end(), 0);
    std::shuffle(slots.begin(), slots.end(), rng);
    std::vector<Domain> domains(total);
    for (std::size_t c = 0; c < total; ++c) domains[c] = static_cast<Domain>(rng() % 4);
    keys.clear();
    for (std::size_t k = 0; k < nk; ++k) {
      domains[slots[k]] = key_domains[k];
      keys.push_back(slots[k]);
    }
    for (std::size_t c = 0; c < total; ++c) fields.push_back({prefix + std::to_string(c), domains[c]});
    return Schema(std::move(fields));
  };
  std::vector<std::size_t> lk, rk;
  auto ls = side("c", lk);
  auto rs = side(rng() % 2 ? "c" : "d", rk);
  const int range = 2 + static_cast<int>(rng() % 8);
  return {random_table(rng, ls, random_rows(rng) / 2, 0.15, range), random_table(rng, rs, random_rows(rng) / 2, 0.15, range),
          lk, rk};
}

void check_hash(Rng &rng, uint64_t seed) {
  auto schema = random_schema(rng, 1 + rng() % 4);
  auto t = random_table(rng, schema, random_rows(rng), 0.2, 4);
  KeySpec keys;
  for (std::size_t c = 0; c < schema.num_columns(); ++c) {
    if (c == 0 || rng() % 2) keys.columns.push_back(c);
  }
  const auto h = hash_keys(t, keys);
  if (h != hash_keys(t, keys)) mismatch("hash", seed, "not deterministic");
  // rows with equal keys hash equally, also after a round trip through another table
  auto copy = take(t, std::vector<std::size_t>(t.num_rows(), 0));
  const auto hc = hash_keys(copy, keys);
  const auto rows = rows_of(t);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (hc[i] != h[0]) mismatch("hash", seed, "copied row hashes differently");
    for (std::size_t j = 0; j < i; ++j) {
      bool eq = true;
      for (auto k : keys.columns) eq = eq && same_value(rows[i][k], rows[j][k]);
      if (eq && h[i] != h[j]) mismatch("hash", seed, "equal keys, different hashes at rows " + std::to_string(j) + "," + std::to_string(i));
    }
  }
}

void check_join(Rng &rng, uint64_t seed) {
  auto [l, r, lk, rk] = join_inputs(rng);
  for (auto jt : {JoinType::Inner, JoinType::Left, JoinType::Right, JoinType::FullOuter}) {
    std::string why;
    if (!same_rows(local_hash_join(l, r, {lk}, {rk}, jt), ref_join(l, r, lk, rk, jt), &why)) {
      mismatch("join/" + std::string(join_type_name(jt)), seed, why);
    }
  }
}

std::pair<std::vector<std::size_t>, AggSpec> groupby_spec(Rng &rng, const Schema &schema) {
  std::vector<std::size_t> keys;
  AggSpec aggs;
  for (std::size_t c = 0; c < schema.num_columns(); ++c) {
    if (keys.empty() || rng() % 3 == 0) {
      keys.push_back(c);
      continue;
    }
    const bool numeric = is_numeric(schema.field(c).domain);
    const std::size_t n = 1 + rng() % 3;
    for (std::size_t a = 0; a < n; ++a) {
      const auto op = numeric ? static_cast<AggOp>(rng() % 5) : AggOp::Count;
      aggs.push_back({c, op, "a" + std::to_string(aggs.size())});
    }
  }
  if (aggs.empty()) aggs.push_back({0, AggOp::Count, "n"});
  return {keys, aggs};
}

Schema numeric_heavy_schema(Rng &rng) {
  std::vector<Field> fields;
  const std::size_t n = 2 + rng() % 4;
  for (std::size_t c = 0; c < n; ++c) {
    const auto pick = rng() % 6;
    fields.push_back({"c" + std::to_string(c), pick < 2 ? Domain::Int64 : pick < 4 ? Domain::Float64 : static_cast<Domain>(rng() % 4)});
  }
  return Schema(std::move(fields));
}

void check_groupby(Rng &rng, uint64_t seed) {
  auto schema = numeric_heavy_schema(rng);
  auto t = random_table(rng, schema, random_rows(rng), 0.15, 2 + static_cast<int>(rng() % 10));
  auto [keys, aggs] = groupby_spec(rng, schema);
  std::string why;
  if (!same_rows(local_groupby(t, {keys}, aggs), ref_groupby(t, keys, aggs), &why)) mismatch("groupby", seed, why);
}

void check_decompose(Rng &rng, uint64_t seed) {
  auto schema = numeric_heavy_schema(rng);
  auto t = random_table(rng, schema, random_rows(rng), 0.15, 2 + static_cast<int>(rng() % 10));
  auto [keys, aggs] = groupby_spec(rng, schema);
  // random contiguous split into 1..4 partitions
  const std::size_t parts = 1 + rng() % 4;
  std::vector<Table> partials;
  std::size_t start = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const auto len = p + 1 == parts ? t.num_rows() - start : rng() % (t.num_rows() - start + 1);
    partials.push_back(partial_aggregate(slice(t, start, len), {keys}, aggs));
    start += len;
  }
  auto combined = final_combine(concat(partials), {keys}, aggs);
  std::string why;
  if (!same_multiset(combined, ref_groupby(t, keys, aggs), &why)) mismatch("decompose", seed, why);
  if (parts == 1 && !same_rows(combined, local_groupby(t, {keys}, aggs), &why)) mismatch("decompose", seed, why);
}

Table with_row_ids(const Table &t) {
  std::vector<Field> fields = t.schema().fields();
  fields.push_back({"row_id", Domain::Int64});
  std::vector<std::shared_ptr<const Column>> cols;
  for (std::size_t c = 0; c < t.num_columns(); ++c) cols.push_back(t.column_ptr(c));
  std::vector<int64_t> ids(t.num_rows());
  std::iota(ids.begin(), ids.end(), 0);
  cols.push_back(std::make_shared<const Column>(
      Column::int64(std::move(ids), std::vector<uint8_t>(bits::bytes_for(t.num_rows()), 0xFF))));
  return Table(Schema(std::move(fields)), std::move(cols));
}

std::pair<std::vector<std::size_t>, std::vector<bool>> sort_spec(Rng &rng, std::size_t columns) {
  std::vector<std::size_t> all(columns);
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  const std::size_t nk = 1 + rng() % std::min<std::size_t>(3, columns);
  std::vector<std::size_t> keys(all.begin(), all.begin() + nk);
  std::vector<bool> asc;
  if (rng() % 3) {
    for (std::size_t k = 0; k < nk; ++k) asc.push_back(rng() % 2);
  }
  return {keys, asc};
}

void check_sort(Rng &rng, uint64_t seed) {
  auto schema = random_schema(rng, 1 + rng() % 3);
  auto t = with_row_ids(random_table(rng, schema, random_rows(rng), 0.15, 2 + static_cast<int>(rng() % 6)));
  auto [keys, asc] = sort_spec(rng, schema.num_columns());
  std::string why;
  // tagged row ids make any stability violation visible
  if (!same_rows(local_sort(t, {keys}, asc), ref_sort(t, keys, asc), &why)) mismatch("sort", seed, why);
  // merging sorted runs equals sorting their concatenation
  const std::size_t cut = t.num_rows() ? rng() % t.num_rows() : 0;
  auto a = local_sort(slice(t, 0, cut), {keys}, asc), b = local_sort(slice(t, cut, t.num_rows() - cut), {keys}, asc);
  if (!same_rows(merge_sorted({a, b}, {keys}, asc), ref_sort(t, keys, asc), &why)) mismatch("merge_sorted", seed, why);
}

void check_range_partition(Rng &rng, uint64_t seed) {
  auto schema = random_schema(rng, 1 + rng() % 3);
  auto t = random_table(rng, schema, random_rows(rng), 0.15, 2 + static_cast<int>(rng() % 8));
  auto [keys, asc] = sort_spec(rng, schema.num_columns());
  auto sorted = local_sort(t, {keys}, asc);
  const std::size_t p = 1 + rng() % 8;
  auto candidates = select_splitter_candidates(sorted, {keys}, p);
  const auto n = sorted.num_rows();
  if (candidates.num_rows() != std::min(n, p)) mismatch("range_partition", seed, "candidate count");
  auto splitters = ref_sort(candidates, [&] {
    std::vector<std::size_t> k(keys.size());
    std::iota(k.begin(), k.end(), 0);
    return k;
  }(), asc);
  splitters = slice(splitters, 0, std::min<std::size_t>(splitters.num_rows(), p - 1));
  const auto a = range_partition(sorted, {keys}, asc, splitters).target;
  const auto rows = rows_of(sorted), srows = rows_of(splitters);
  for (std::size_t i = 0; i < n; ++i) {
    // reference: number of splitters <= key under the sort order
    uint32_t expect = 0;
    for (const auto &s : srows) {
      int cmp = 0;
      for (std::size_t k = 0; k < keys.size() && cmp == 0; ++k) {
        const auto &x = s[k], &y = rows[i][keys[k]];
        cmp = order_values(x, y);
        const bool up = asc.empty() || asc[k];
        if (!up && !is_null(x) && !is_null(y)) cmp = -cmp;
      }
      if (cmp <= 0) ++expect;
    }
    if (a[i] != expect) mismatch("range_partition", seed, "row " + std::to_string(i));
    if (i > 0 && a[i] < a[i - 1]) mismatch("range_partition", seed, "assignment not monotone");
  }
}

void check_add_scalar(Rng &rng, uint64_t seed) {
  auto schema = numeric_heavy_schema(rng);
  auto t = random_table(rng, schema, random_rows(rng), 0.2, 100);
  std::size_t col = 0;
  while (col < schema.num_columns() && !is_numeric(schema.field(col).domain)) ++col;
  if (col == schema.num_columns()) {
    try {
      add_scalar(t, 0, Value{int64_t{1}});
    } catch (const Error &e) {
      if (e.code() == ErrorCode::DomainMismatch) return;
    }
    mismatch("add_scalar", seed, "non-numeric column accepted");
  }
  const auto pick = rng() % 3;
  const Value s = pick == 0 ? Value{static_cast<int64_t>(rng() % 11) - 5} : pick == 1 ? Value{0.5 * static_cast<double>(rng() % 9)} : Value{};
  auto got = add_scalar(t, col, s);
  auto rows = rows_of(t);
  const bool to_float = schema.field(col).domain == Domain::Float64 || std::holds_alternative<double>(s);
  for (auto &r : rows) {
    auto &v = r[col];
    if (is_null(v) || is_null(s)) {
      v = std::monostate{};
    } else if (!to_float) {
      v = static_cast<int64_t>(static_cast<uint64_t>(std::get<int64_t>(v)) + static_cast<uint64_t>(std::get<int64_t>(s)));
    } else {
      const double x = std::holds_alternative<int64_t>(v) ? static_cast<double>(std::get<int64_t>(v)) : std::get<double>(v);
      const double y = std::holds_alternative<int64_t>(s) ? static_cast<double>(std::get<int64_t>(s)) : std::get<double>(s);
      v = x + y;
    }
  }
  std::vector<Field> fields = schema.fields();
  if (to_float) fields[col].domain = Domain::Float64;
  std::string why;
  if (!same_rows(got, table_of(Schema(fields), rows), &why)) mismatch("add_scalar", seed, why);
}

}  // namespace

std::size_t kernel_oracles(const std::string &kernel, uint64_t seed, std::size_t tables) {
  for (std::size_t i = 0; i < tables; ++i) {
    const uint64_t case_seed = seed * 7919 + i;
    Rng rng(case_seed);
    if (kernel == "hash") {
      check_hash(rng, case_seed);
    } else if (kernel == "join") {
      check_join(rng, case_seed);
    } else if (kernel == "groupby") {
      check_groupby(rng, case_seed);
    } else if (kernel == "sort") {
      check_sort(rng, case_seed);
    } else if (kernel == "decompose") {
      check_decompose(rng, case_seed);
    } else if (kernel == "range_partition") {
      check_range_partition(rng, case_seed);
    } else if (kernel == "add_scalar") {
      check_add_scalar(rng, case_seed);
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown kernel " + kernel);
    }
  }
  return tables;
}

Bytes random_bytes(Rng &rng, std::size_t max_len) {
  Bytes b(rng() % (max_len + 1));
  for (auto &x : b) x = static_cast<uint8_t>(rng());
  return b;
}

}  // namespace bspf::testing
