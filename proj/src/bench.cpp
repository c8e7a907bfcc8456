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

#include "bspf/bench.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "bspf/csv.hpp"
#include "bspf/executor.hpp"
#include "bspf/operators.hpp"
#include "bspf/serialize.hpp"
#include "bspf/table_comm.hpp"

namespace bspf::bench {

namespace {

uint64_t splitmix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Random word for one cell; streams separate columns and their null masks.
uint64_t cell(uint64_t seed, uint64_t stream, uint64_t row) {
  return splitmix64(splitmix64(seed ^ (stream * 0xD6E8FEB86659FD93ull)) + row);
}

uint64_t below(uint64_t word, uint64_t bound) {
  return static_cast<uint64_t>((static_cast<unsigned __int128>(word) * bound) >> 64);
}

bool is_null(const GenSpec &spec, uint64_t stream, uint64_t row) {
  if (spec.null_fraction <= 0) return false;
  return static_cast<double>(cell(spec.seed, stream + 500, row) >> 11) * 0x1.0p-53 < spec.null_fraction;
}

constexpr uint64_t kValueRange = 1000000000;

Column int_column(const GenSpec &spec, uint64_t stream, std::size_t start, std::size_t len, uint64_t bound) {
  std::vector<int64_t> values(len);
  std::vector<uint8_t> validity(bits::bytes_for(len), 0);
  for (std::size_t i = 0; i < len; ++i) {
    if (is_null(spec, stream, start + i)) continue;
    values[i] = static_cast<int64_t>(below(cell(spec.seed, stream, start + i), bound));
    bits::set(validity, i, true);
  }
  return Column::int64(std::move(values), std::move(validity));
}

std::pair<std::size_t, std::size_t> shard_range(std::size_t total, std::size_t rank, std::size_t world) {
  if (world == 0 || rank >= world) throw Error(ErrorCode::InvalidRank, "shard " + std::to_string(rank) + " of " + std::to_string(world));
  const auto lengths = even_split_lengths(total, world);
  std::size_t start = 0;
  for (std::size_t r = 0; r < rank; ++r) start += lengths[r];
  return {start, lengths[rank]};
}

std::string value_name(std::size_t j) { return j == 0 ? "v" : "v" + std::to_string(j + 1); }

/// Appends row i of every column of t to the builders starting at `first`.
void append_row(std::vector<ColumnBuilder> &out, std::size_t first, const Table &t, std::size_t i) {
  for (std::size_t c = 0; c < t.num_columns(); ++c) out[first + c].append_from(t.column(c), i);
}

void append_nulls(std::vector<ColumnBuilder> &out, std::size_t first, std::size_t count) {
  for (std::size_t c = 0; c < count; ++c) out[first + c].append_null();
}

std::vector<ColumnBuilder> builders(const Schema &schema) {
  std::vector<ColumnBuilder> out;
  for (const auto &f : schema.fields()) out.emplace_back(f.domain);
  return out;
}

Table finish(const Schema &schema, std::vector<ColumnBuilder> &&b) {
  std::vector<Column> cols;
  for (auto &x : b) cols.push_back(std::move(x).finish());
  return Table(schema, std::move(cols));
}

std::optional<int64_t> int_at(const Table &t, std::size_t col, std::size_t row) {
  const auto &c = t.column(col);
  if (!c.is_valid(row)) return std::nullopt;
  return c.int64_at(row);
}

bool float_close(const Column &a, std::size_t i, const Column &b, std::size_t j, double tol) {
  if (cells_equal(a, i, b, j)) return true;
  if (a.domain() != Domain::Float64 || b.domain() != Domain::Float64 || !a.is_valid(i) || !b.is_valid(j)) return false;
  const double x = a.float64_at(i), y = b.float64_at(j);
  return std::fabs(x - y) <= tol * std::max(std::fabs(x), std::fabs(y));
}

/// Copy of t with the first cell of column 0 changed.
Table perturb(const Table &t) {
  if (t.num_rows() == 0) {
    auto b = builders(t.schema());
    for (auto &x : b) x.append_null();
    return finish(t.schema(), std::move(b));
  }
  std::vector<std::shared_ptr<const Column>> cols;
  for (std::size_t c = 0; c < t.num_columns(); ++c) cols.push_back(t.column_ptr(c));
  ColumnBuilder b(t.schema().field(0).domain);
  const auto &src = t.column(0);
  for (std::size_t i = 0; i < t.num_rows(); ++i) {
    if (i != 0) {
      b.append_from(src, i);
    } else if (src.domain() == Domain::Int64) {
      b.append(src.is_valid(0) ? src.int64_at(0) + 1 : int64_t{0});
    } else if (src.domain() == Domain::Float64) {
      b.append(src.is_valid(0) ? src.float64_at(0) + 1 : 0.0);
    } else {
      b.append_null();
    }
  }
  cols[0] = std::make_shared<const Column>(std::move(b).finish());
  return Table(t.schema(), std::move(cols));
}

}  // namespace

// ---------------------------------------------------------------------------
// generation

void GenSpec::validate() const {
  if (!(cardinality > 0.0 && cardinality <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "cardinality must be in (0, 1], got " + std::to_string(cardinality));
  }
  if (value_columns == 0) throw Error(ErrorCode::InvalidArgument, "at least one value column is required");
  if (!(null_fraction >= 0.0 && null_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "null fraction must be in [0, 1]");
  }
}

std::size_t GenSpec::key_range() const {
  const auto m = static_cast<std::size_t>(std::ceil(cardinality * static_cast<double>(rows)));
  return std::max<std::size_t>(m, 1);
}

Table generate(const GenSpec &spec, std::size_t rank, std::size_t world) {
  spec.validate();
  const auto [start, len] = shard_range(spec.rows, rank, world);
  std::vector<Field> fields{{"k", Domain::Int64}};
  std::vector<Column> cols;
  cols.push_back(int_column(spec, 1, start, len, spec.key_range()));
  for (std::size_t j = 0; j < spec.value_columns; ++j) {
    fields.push_back({value_name(j), Domain::Int64});
    cols.push_back(int_column(spec, 2 + j, start, len, kValueRange));
  }
  return Table(Schema(std::move(fields)), std::move(cols));
}

Table generate_dimension(const GenSpec &spec, std::size_t rank, std::size_t world) {
  spec.validate();
  const auto m = spec.key_range();
  const auto [start, len] = shard_range(m, rank, world);
  std::vector<Column> cols;
  cols.push_back(int_column(spec, 1001, start, len, m));
  cols.push_back(int_column(spec, 1002, start, len, kValueRange));
  return Table(Schema({{"k", Domain::Int64}, {"w", Domain::Int64}}), std::move(cols));
}

double expected_distinct(std::size_t n, std::size_t m) {
  const double md = static_cast<double>(m);
  return md * -std::expm1(static_cast<double>(n) * std::log1p(-1.0 / md));
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Join: return "join";
    case Op::Groupby: return "groupby";
    case Op::Sort: return "sort";
    case Op::Map: return "map";
    case Op::Pipeline: return "pipeline";
  }
  return "?";
}

Op parse_op(std::string_view name) {
  for (Op op : {Op::Join, Op::Groupby, Op::Sort, Op::Map, Op::Pipeline}) {
    if (op_name(op) == name) return op;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown operator '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// oracles

Table oracle_join(const Table &left, const Table &right, JoinType jt) {
  const auto schema = join_schema(left.schema(), right.schema());
  std::map<int64_t, std::vector<std::size_t>> index;
  for (std::size_t j = 0; j < right.num_rows(); ++j) {
    if (auto k = int_at(right, 0, j)) index[*k].push_back(j);
  }
  std::vector<bool> matched(right.num_rows(), false);
  auto out = builders(schema);
  const auto nl = left.num_columns(), nr = right.num_columns();
  for (std::size_t i = 0; i < left.num_rows(); ++i) {
    auto k = int_at(left, 0, i);
    auto it = k ? index.find(*k) : index.end();
    if (it != index.end()) {
      for (auto j : it->second) {
        append_row(out, 0, left, i);
        append_row(out, nl, right, j);
        matched[j] = true;
      }
    } else if (jt == JoinType::Left || jt == JoinType::FullOuter) {
      append_row(out, 0, left, i);
      append_nulls(out, nl, nr);
    }
  }
  if (jt == JoinType::Right || jt == JoinType::FullOuter) {
    for (std::size_t j = 0; j < right.num_rows(); ++j) {
      if (matched[j]) continue;
      append_nulls(out, 0, nl);
      append_row(out, nl, right, j);
    }
  }
  return finish(schema, std::move(out));
}

namespace {

struct Acc {
  uint64_t sum = 0;  // wraps like the kernel
  int64_t count = 0;
  int64_t min = 0, max = 0;
};

void add(Acc &a, std::optional<int64_t> v) {
  if (!v) return;
  if (a.count == 0 || *v < a.min) a.min = *v;
  if (a.count == 0 || *v > a.max) a.max = *v;
  a.sum += static_cast<uint64_t>(*v);
  ++a.count;
}

using GroupKey = std::pair<bool, int64_t>;  // (is null, value)

GroupKey group_key(const Table &t, std::size_t col, std::size_t row) {
  auto v = int_at(t, col, row);
  return v ? GroupKey{false, *v} : GroupKey{true, 0};
}

void append_key(ColumnBuilder &b, const GroupKey &k) {
  if (k.first) {
    b.append_null();
  } else {
    b.append(k.second);
  }
}

}  // namespace

Table oracle_groupby(const Table &t) {
  std::map<GroupKey, Acc> groups;
  for (std::size_t i = 0; i < t.num_rows(); ++i) add(groups[group_key(t, 0, i)], int_at(t, 1, i));
  Schema schema({{t.schema().field(0).name, Domain::Int64},
                 {"sum", Domain::Int64},
                 {"count", Domain::Int64},
                 {"min", Domain::Int64},
                 {"max", Domain::Int64},
                 {"mean", Domain::Float64}});
  auto out = builders(schema);
  for (const auto &[k, a] : groups) {
    append_key(out[0], k);
    if (a.count == 0) {
      out[1].append_null();
    } else {
      out[1].append(static_cast<int64_t>(a.sum));
    }
    out[2].append(a.count);
    for (int c : {3, 4, 5}) {
      if (a.count == 0) {
        out[c].append_null();
      } else if (c == 5) {
        out[c].append(static_cast<double>(static_cast<int64_t>(a.sum)) / static_cast<double>(a.count));
      } else {
        out[c].append(c == 3 ? a.min : a.max);
      }
    }
  }
  return finish(schema, std::move(out));
}

Table oracle_sort(const Table &t) {
  std::vector<std::size_t> order(t.num_rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto x = int_at(t, 0, a), y = int_at(t, 0, b);
    if (!x || !y) return x.has_value() && !y.has_value();
    return *x < *y;
  });
  auto out = builders(t.schema());
  for (auto i : order) append_row(out, 0, t, i);
  return finish(t.schema(), std::move(out));
}

Table oracle_map(const Table &t) {
  std::vector<std::shared_ptr<const Column>> cols;
  std::vector<Field> fields = t.schema().fields();
  for (std::size_t c = 0; c < t.num_columns(); ++c) cols.push_back(t.column_ptr(c));
  ColumnBuilder b(Domain::Float64);
  for (std::size_t i = 0; i < t.num_rows(); ++i) {
    if (auto v = int_at(t, 1, i)) {
      b.append(static_cast<double>(*v + 1) + 0.5);
    } else {
      b.append_null();
    }
  }
  cols[1] = std::make_shared<const Column>(std::move(b).finish());
  fields[1].domain = Domain::Float64;
  return Table(Schema(std::move(fields)), std::move(cols));
}

Table oracle_pipeline(const Table &left, const Table &right) {
  // inner join on k, group by k: sum(v), mean(w); sort by v_sum; v_sum + 0.5
  std::map<int64_t, std::vector<std::size_t>> index;
  for (std::size_t j = 0; j < right.num_rows(); ++j) {
    if (auto k = int_at(right, 0, j)) index[*k].push_back(j);
  }
  std::map<int64_t, std::pair<Acc, Acc>> groups;
  for (std::size_t i = 0; i < left.num_rows(); ++i) {
    auto k = int_at(left, 0, i);
    if (!k) continue;
    auto it = index.find(*k);
    if (it == index.end()) continue;
    for (auto j : it->second) {
      auto &g = groups[*k];
      add(g.first, int_at(left, 1, i));
      add(g.second, int_at(right, 1, j));
    }
  }
  struct Row {
    int64_t k;
    std::optional<int64_t> v_sum;
    std::optional<double> w_mean;
  };
  std::vector<Row> rows;
  for (const auto &[k, g] : groups) {
    Row r{k, std::nullopt, std::nullopt};
    if (g.first.count > 0) r.v_sum = static_cast<int64_t>(g.first.sum);
    if (g.second.count > 0) {
      r.w_mean = static_cast<double>(static_cast<int64_t>(g.second.sum)) / static_cast<double>(g.second.count);
    }
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row &a, const Row &b) {
    if (!a.v_sum || !b.v_sum) return a.v_sum.has_value() && !b.v_sum.has_value();
    return *a.v_sum < *b.v_sum;
  });
  Schema schema({{"k", Domain::Int64}, {"v_sum", Domain::Float64}, {"w_mean", Domain::Float64}});
  auto out = builders(schema);
  for (const auto &r : rows) {
    out[0].append(r.k);
    if (r.v_sum) {
      out[1].append(static_cast<double>(*r.v_sum) + 0.5);
    } else {
      out[1].append_null();
    }
    if (r.w_mean) {
      out[2].append(*r.w_mean);
    } else {
      out[2].append_null();
    }
  }
  return finish(schema, std::move(out));
}

std::optional<std::string> diff_tables(const Table &actual, const Table &expected, double rel_tol,
                                       std::optional<std::size_t> ordered_column) {
  if (!(actual.schema() == expected.schema())) {
    auto describe = [](const Schema &s) {
      std::string out;
      for (const auto &f : s.fields()) out += (out.empty() ? "" : ", ") + f.name + ":" + std::string(domain_name(f.domain));
      return "(" + out + ")";
    };
    return "schema " + describe(actual.schema()) + " != expected " + describe(expected.schema());
  }
  if (actual.num_rows() != expected.num_rows()) {
    return "row count " + std::to_string(actual.num_rows()) + " != expected " + std::to_string(expected.num_rows());
  }
  if (ordered_column) {
    const auto &a = actual.column(*ordered_column), &e = expected.column(*ordered_column);
    for (std::size_t i = 0; i < actual.num_rows(); ++i) {
      if (!float_close(a, i, e, i, rel_tol)) {
        return "order differs at row " + std::to_string(i) + ": got " + value_to_string(a.value_at(i)) +
               " expected " + value_to_string(e.value_at(i));
      }
    }
  }
  const auto ca = canonicalize(actual), ce = canonicalize(expected);
  for (std::size_t i = 0; i < ca.num_rows(); ++i) {
    for (std::size_t c = 0; c < ca.num_columns(); ++c) {
      if (!float_close(ca.column(c), i, ce.column(c), i, rel_tol)) {
        return "first differing row " + std::to_string(i) + ": got " + format_row(ca, i) + " expected " +
               format_row(ce, i);
      }
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// jobs

nlohmann::json job_to_json(const Job &job) {
  return {{"kind", job.kind},
          {"op", std::string(op_name(job.op))},
          {"rows", job.spec.rows},
          {"cardinality", job.spec.cardinality},
          {"seed", job.spec.seed},
          {"value_columns", job.spec.value_columns},
          {"null_fraction", job.spec.null_fraction},
          {"repeats", job.repeats},
          {"corrupt", job.corrupt}};
}

Job job_from_json(const nlohmann::json &j) {
  try {
    Job job;
    job.kind = j.at("kind").get<std::string>();
    job.op = parse_op(j.at("op").get<std::string>());
    job.spec.rows = j.at("rows").get<std::size_t>();
    job.spec.cardinality = j.at("cardinality").get<double>();
    job.spec.seed = j.at("seed").get<uint64_t>();
    job.spec.value_columns = j.at("value_columns").get<std::size_t>();
    job.spec.null_fraction = j.at("null_fraction").get<double>();
    job.repeats = j.at("repeats").get<std::size_t>();
    job.corrupt = j.at("corrupt").get<bool>();
    return job;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad job description: ") + e.what());
  }
}

namespace {

const KeySpec kKey{{0}};

AggSpec all_aggs() {
  return {{1, AggOp::Sum, "sum"}, {1, AggOp::Count, "count"}, {1, AggOp::Min, "min"},
          {1, AggOp::Max, "max"}, {1, AggOp::Mean, "mean"}};
}

Table map_chain(ExecEnv &env, const Table &t) {
  auto plus_one = dist_map(env, t, [](const Table &x) { return add_scalar(x, 1, Value{int64_t{1}}); });
  return dist_map(env, plus_one, [](const Table &x) { return add_scalar(x, 1, Value{0.5}); });
}

Table pipeline(ExecEnv &env, const Table &left, const Table &right) {
  auto joined = dist_join(env, left, right, kKey, kKey, JoinType::Inner);
  // joined: k, v, k_r, w
  auto grouped = dist_groupby(env, joined, kKey, {{1, AggOp::Sum, "v_sum"}, {3, AggOp::Mean, "w_mean"}});
  auto sorted = dist_sort(env, grouped, KeySpec{{1}}, {});
  return dist_map(env, sorted, [](const Table &x) { return add_scalar(x, 1, Value{0.5}); });
}

/// One distributed computation with its serial reference.
struct Case {
  std::string name;
  std::function<Table(ExecEnv &, const Table &, const Table &)> run;
  std::function<Table(const Table &, const Table &)> oracle;
  std::optional<std::size_t> ordered_column;
  double tol = 0.0;
};

std::vector<Case> cases_for(Op op) {
  std::vector<Case> out;
  switch (op) {
    case Op::Join:
      for (auto jt : {JoinType::Inner, JoinType::Left, JoinType::Right, JoinType::FullOuter}) {
        out.push_back({"join/" + std::string(join_type_name(jt)),
                       [jt](ExecEnv &env, const Table &l, const Table &r) { return dist_join(env, l, r, kKey, kKey, jt); },
                       [jt](const Table &l, const Table &r) { return oracle_join(l, r, jt); }, std::nullopt, 0.0});
      }
      break;
    case Op::Groupby:
      out.push_back({"groupby/sum,count,min,max,mean",
                     [](ExecEnv &env, const Table &l, const Table &) { return dist_groupby(env, l, kKey, all_aggs()); },
                     [](const Table &l, const Table &) { return oracle_groupby(l); }, std::nullopt, 1e-12});
      break;
    case Op::Sort:
      out.push_back({"sort",
                     [](ExecEnv &env, const Table &l, const Table &) { return dist_sort(env, l, kKey, {}); },
                     [](const Table &l, const Table &) { return oracle_sort(l); }, 0, 0.0});
      break;
    case Op::Map:
      out.push_back({"map", [](ExecEnv &env, const Table &l, const Table &) { return map_chain(env, l); },
                     [](const Table &l, const Table &) { return oracle_map(l); }, std::nullopt, 0.0});
      break;
    case Op::Pipeline:
      out.push_back({"pipeline/join,groupby,sort,add_scalar",
                     [](ExecEnv &env, const Table &l, const Table &r) { return pipeline(env, l, r); },
                     [](const Table &l, const Table &r) { return oracle_pipeline(l, r); }, 1, 1e-12});
      break;
  }
  return out;
}

bool uses_dimension(Op op) { return op == Op::Join || op == Op::Pipeline; }

Bytes pack_doubles(const std::vector<double> &v) {
  Bytes b;
  for (double d : v) wire::put_u64(b, std::bit_cast<uint64_t>(d));
  return b;
}

std::vector<double> unpack_doubles(const Bytes &b) {
  wire::Reader r(b);
  std::vector<double> out;
  while (r.remaining() > 0) out.push_back(std::bit_cast<double>(r.u64()));
  return out;
}

/// Gathers the result to rank 0 and checks it there. Returns null elsewhere.
nlohmann::json check_case(ExecEnv &env, const Case &cs, const Job &job, const Table &result) {
  auto gathered = gather_table(env.comm(), result, 0);
  if (env.rank != 0) return nullptr;
  auto expected = cs.oracle(generate(job.spec), generate_dimension(job.spec));
  if (job.corrupt) expected = perturb(expected);
  auto diff = diff_tables(gathered, expected, cs.tol, cs.ordered_column);
  return {{"name", cs.name}, {"pass", !diff}, {"rows", gathered.num_rows()}, {"detail", diff.value_or("")}};
}

}  // namespace

nlohmann::json run_job_rank(ExecEnv &env, const Job &job) {
  if (!env.timer) throw Error(ErrorCode::InvalidArgument, "job needs a timer");
  job.spec.validate();
  auto &c = env.comm();
  const auto rank = static_cast<std::size_t>(env.rank), world = static_cast<std::size_t>(env.world_size);
  nlohmann::json markers = nlohmann::json::array();

  markers.push_back("ingest_begin");
  const Table left = generate(job.spec, rank, world);
  const Table right = uses_dimension(job.op) ? generate_dimension(job.spec, rank, world)
                                             : Table::empty(Schema({{"k", Domain::Int64}}));
  markers.push_back("ingest_end");
  const auto cases = cases_for(job.op);

  if (job.kind == "verify") {
    nlohmann::json report = {{"pass", true}, {"cases", nlohmann::json::array()}};
    for (const auto &cs : cases) {
      auto outcome = check_case(env, cs, job, cs.run(env, left, right));
      if (env.rank != 0) continue;
      report["pass"] = report["pass"].get<bool>() && outcome["pass"].get<bool>();
      report["cases"].push_back(outcome);
    }
    return env.rank == 0 ? report : nlohmann::json(nullptr);
  }
  if (job.kind != "bench") throw Error(ErrorCode::InvalidArgument, "unknown job kind '" + job.kind + "'");

  const auto &cs = cases.front();
  if (job.op == Op::Pipeline) {
    // verified before it is timed
    auto outcome = check_case(env, cs, job, cs.run(env, left, right));
    const bool ok = c.broadcast(Bytes{static_cast<uint8_t>(env.rank != 0 || outcome["pass"].get<bool>())}, 0).at(0);
    if (!ok) throw Error(ErrorCode::ExecutionError, "pipeline result differs from the serial composition");
    if (env.rank == 0) markers.push_back("verified");
  }
  const std::size_t rows_in = job.spec.rows + (uses_dimension(job.op) ? job.spec.key_range() : 0);
  nlohmann::json records = nlohmann::json::array();
  for (std::size_t rep = 0; rep < job.repeats; ++rep) {
    c.barrier();
    env.timer->reset();
    markers.push_back("timed_begin");
    const auto t0 = std::chrono::steady_clock::now();
    const Table out = cs.run(env, left, right);
    const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    markers.push_back("timed_end");
    const std::vector<double> mine{wall, env.timer->comm_ms(), env.timer->comp_ms(),
                                   static_cast<double>(out.num_rows())};
    auto all = c.gather(pack_doubles(mine), 0);
    if (env.rank != 0) continue;
    std::vector<double> walls, comms, comps;
    double rows_out = 0;
    for (const auto &b : all) {
      auto v = unpack_doubles(b);
      walls.push_back(v[0]);
      comms.push_back(v[1]);
      comps.push_back(v[2]);
      rows_out += v[3];
    }
    records.push_back({{"op", std::string(op_name(job.op))},
                       {"p", world},
                       {"repeat", rep},
                       {"wall_ms", *std::max_element(walls.begin(), walls.end())},
                       {"comm_ms_max", *std::max_element(comms.begin(), comms.end())},
                       {"comp_ms_max", *std::max_element(comps.begin(), comps.end())},
                       {"rows_in", rows_in},
                       {"rows_out", static_cast<std::size_t>(rows_out)},
                       {"seed", job.spec.seed},
                       {"wall_ms_rank", walls},
                       {"comm_ms_rank", comms},
                       {"comp_ms_rank", comps}});
  }
  if (env.rank != 0) return nullptr;
  return {{"records", records}, {"markers", markers}};
}

nlohmann::json run_job(const Job &job, std::size_t parallelism, comm::Backend backend,
                       std::chrono::milliseconds timeout) {
  ExecutorConfig cfg;
  cfg.backend = backend;
  cfg.timeout = timeout;
  auto exec = Executor::start(parallelism, cfg);
  auto results = exec->run([job](ExecEnv &env) { return run_job_rank(env, job).dump(); }).get();
  exec->stop();
  return nlohmann::json::parse(results.at(0));
}

// ---------------------------------------------------------------------------
// records and reports

std::vector<BenchRecord> records_from_json(const nlohmann::json &report, const std::string &backend) {
  std::vector<BenchRecord> out;
  for (const auto &r : report.at("records")) {
    BenchRecord b;
    b.op = r.at("op").get<std::string>();
    b.backend = backend;
    b.p = r.at("p").get<std::size_t>();
    b.repeat = r.at("repeat").get<std::size_t>();
    b.wall_ms = r.at("wall_ms").get<double>();
    b.comm_ms_max = r.at("comm_ms_max").get<double>();
    b.comp_ms_max = r.at("comp_ms_max").get<double>();
    b.rows_in = r.at("rows_in").get<std::size_t>();
    b.rows_out = r.at("rows_out").get<std::size_t>();
    b.seed = r.at("seed").get<uint64_t>();
    b.wall_ms_rank = r.at("wall_ms_rank").get<std::vector<double>>();
    b.comm_ms_rank = r.at("comm_ms_rank").get<std::vector<double>>();
    b.comp_ms_rank = r.at("comp_ms_rank").get<std::vector<double>>();
    out.push_back(std::move(b));
  }
  return out;
}

std::string format_records(const std::vector<BenchRecord> &records, bool header) {
  std::ostringstream os;
  if (header) os << kBenchHeader << "\n";
  char buf[256];
  for (const auto &r : records) {
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%zu,%.4f,%.4f,%.4f,%zu,%zu,%llu\n", r.op.c_str(), r.backend.c_str(), r.p,
                  r.repeat, r.wall_ms, r.comm_ms_max, r.comp_ms_max, r.rows_in, r.rows_out,
                  static_cast<unsigned long long>(r.seed));
    os << buf;
  }
  return os.str();
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

}  // namespace

std::vector<ReportRow> summarize(const std::string &csv_text) {
  csv::ReadOptions opts;
  opts.domains = {{"op", Domain::Utf8},           {"backend", Domain::Utf8},     {"p", Domain::Int64},
                  {"repeat", Domain::Int64},      {"wall_ms", Domain::Float64},  {"comm_ms_max", Domain::Float64},
                  {"comp_ms_max", Domain::Float64}, {"rows_in", Domain::Int64},  {"rows_out", Domain::Int64},
                  {"seed", Domain::Int64}};
  Table t = [&] {
    try {
      return csv::parse(csv_text, opts);
    } catch (const Error &e) {
      if (e.code() == ErrorCode::MalformedCsv) throw;
      throw Error(ErrorCode::MalformedCsv, e.what());
    }
  }();
  std::size_t idx[10];
  std::size_t n = 0;
  for (const auto &[name, d] : opts.domains) {
    (void)d;
    auto i = t.schema().index_of(name);
    if (!i) throw Error(ErrorCode::MalformedCsv, "bench CSV lacks column '" + name + "'");
    idx[n++] = *i;
  }
  const auto col = [&](const char *name) { return *t.schema().index_of(name); };
  const auto op = col("op"), be = col("backend"), p = col("p"), wall = col("wall_ms"), cm = col("comm_ms_max"),
             cp = col("comp_ms_max");
  struct Samples {
    std::vector<double> wall, comm, comp;
  };
  std::map<std::tuple<std::string, std::string, int64_t>, Samples> groups;
  for (std::size_t i = 0; i < t.num_rows(); ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      if (!t.column(idx[k]).is_valid(i)) {
        throw Error(ErrorCode::MalformedCsv, "empty field in bench CSV row " + std::to_string(i + 1));
      }
    }
    auto &s = groups[{std::string(t.column(op).utf8_at(i)), std::string(t.column(be).utf8_at(i)),
                      t.column(p).int64_at(i)}];
    s.wall.push_back(t.column(wall).float64_at(i));
    s.comm.push_back(t.column(cm).float64_at(i));
    s.comp.push_back(t.column(cp).float64_at(i));
  }
  std::vector<ReportRow> rows;
  for (const auto &[key, s] : groups) {
    ReportRow r;
    r.op = std::get<0>(key);
    r.backend = std::get<1>(key);
    r.p = static_cast<std::size_t>(std::get<2>(key));
    r.runs = s.wall.size();
    r.median_wall_ms = median(s.wall);
    r.median_comm_ms = median(s.comm);
    r.median_comp_ms = median(s.comp);
    const double busy = r.median_comm_ms + r.median_comp_ms;
    r.comm_fraction = busy > 0 ? r.median_comm_ms / busy : 0.0;
    rows.push_back(r);
  }
  for (auto &r : rows) {
    for (const auto &base : rows) {
      if (base.op == r.op && base.backend == r.backend && base.p == 1 && r.median_wall_ms > 0) {
        r.speedup = base.median_wall_ms / r.median_wall_ms;
      }
    }
  }
  return rows;
}

std::string format_report(const std::vector<ReportRow> &rows) {
  std::ostringstream os;
  os << "| op | backend | p | runs | median wall ms | speedup | comm fraction |\n";
  os << "|---|---|---|---|---|---|---|\n";
  char buf[256];
  for (const auto &r : rows) {
    const std::string speedup = r.speedup ? [&] {
      char s[32];
      std::snprintf(s, sizeof s, "%.2f", *r.speedup);
      return std::string(s);
    }()
                                          : "n/a";
    std::snprintf(buf, sizeof buf, "| %s | %s | %zu | %zu | %.3f | %s | %.3f |\n", r.op.c_str(), r.backend.c_str(), r.p,
                  r.runs, r.median_wall_ms, speedup.c_str(), r.comm_fraction);
    os << buf;
  }
  return os.str();
}

std::string format_plot_data(const std::vector<ReportRow> &rows) {
  std::ostringstream os;
  os << "op,backend,p,median_wall_ms,median_comm_ms,median_comp_ms,speedup,comm_fraction\n";
  char buf[256];
  for (const auto &r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.4f,%.4f,%.4f,%s,%.6f\n", r.op.c_str(), r.backend.c_str(), r.p,
                  r.median_wall_ms, r.median_comm_ms, r.median_comp_ms,
                  r.speedup ? std::to_string(*r.speedup).c_str() : "", r.comm_fraction);
    os << buf;
  }
  return os.str();
}

}  // namespace bspf::bench
