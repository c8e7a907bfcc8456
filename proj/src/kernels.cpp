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

#include "bspf/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <queue>
#include <set>

namespace bspf {

namespace {

constexpr uint64_t kHashSeed = 0x243F6A8885A308D3ULL;
constexpr uint64_t kNullHash = 0x13198A2E03707344ULL;
constexpr uint64_t kDomainSalt[4] = {0xA4093822299F31D0ULL, 0x082EFA98EC4E6C89ULL, 0x452821E638D01377ULL,
                                     0xBE5466CF34E90C6CULL};

// splitmix64 finalizer
inline uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline uint64_t canonical_bits(double v) {
  if (v == 0.0) return 0;
  if (std::isnan(v)) return 0x7FF8000000000000ULL;
  return std::bit_cast<uint64_t>(v);
}

void hash_column_into(const Column &c, std::vector<uint64_t> &h) {
  const auto salt = kDomainSalt[static_cast<int>(c.domain())];
  const auto n = c.length();
  auto combine = [&h](std::size_t i, uint64_t cell) { h[i] = mix64(h[i] ^ cell); };
  switch (c.domain()) {
    case Domain::Int64: {
      auto v = c.int64_values();
      for (std::size_t i = 0; i < n; ++i) combine(i, c.is_valid(i) ? mix64(salt ^ static_cast<uint64_t>(v[i])) : kNullHash);
      break;
    }
    case Domain::Float64: {
      auto v = c.float64_values();
      for (std::size_t i = 0; i < n; ++i) combine(i, c.is_valid(i) ? mix64(salt ^ canonical_bits(v[i])) : kNullHash);
      break;
    }
    case Domain::Boolean: {
      for (std::size_t i = 0; i < n; ++i) combine(i, c.is_valid(i) ? mix64(salt ^ (c.bool_at(i) ? 1u : 0u)) : kNullHash);
      break;
    }
    case Domain::Utf8: {
      for (std::size_t i = 0; i < n; ++i) {
        if (!c.is_valid(i)) {
          combine(i, kNullHash);
          continue;
        }
        uint64_t f = 0xcbf29ce484222325ULL;
        for (char ch : c.utf8_at(i)) {
          f ^= static_cast<uint8_t>(ch);
          f *= 0x100000001b3ULL;
        }
        combine(i, mix64(salt ^ f));
      }
      break;
    }
  }
}

/// Compares key tuples of rows drawn from two tables (possibly the same one).
class KeyMatcher {
 public:
  KeyMatcher(const Table &a, const KeySpec &ka, const Table &b, const KeySpec &kb) {
    for (std::size_t k = 0; k < ka.size(); ++k) {
      a_.push_back(&a.column(ka.columns[k]));
      b_.push_back(&b.column(kb.columns[k]));
    }
    all_int_ = std::all_of(a_.begin(), a_.end(), [](const Column *c) { return c->domain() == Domain::Int64; });
  }

  /// Null equals null.
  bool equal(std::size_t i, std::size_t j) const {
    for (std::size_t k = 0; k < a_.size(); ++k) {
      if (all_int_) {
        const bool va = a_[k]->is_valid(i), vb = b_[k]->is_valid(j);
        if (va != vb || (va && a_[k]->int64_at(i) != b_[k]->int64_at(j))) return false;
      } else if (!cells_equal(*a_[k], i, *b_[k], j)) {
        return false;
      }
    }
    return true;
  }

  bool a_has_null(std::size_t i) const {
    for (auto *c : a_) {
      if (!c->is_valid(i)) return true;
    }
    return false;
  }

  bool b_has_null(std::size_t j) const {
    for (auto *c : b_) {
      if (!c->is_valid(j)) return true;
    }
    return false;
  }

 private:
  std::vector<const Column *> a_, b_;
  bool all_int_ = false;
};

std::size_t table_capacity(std::size_t n) { return std::bit_ceil(std::max<std::size_t>(16, n * 2)); }

void check_key_domains(const Table &left, const KeySpec &lk, const Table &right, const KeySpec &rk) {
  if (lk.size() != rk.size()) throw Error(ErrorCode::InvalidArgument, "join key lists differ in length");
  for (std::size_t k = 0; k < lk.size(); ++k) {
    const auto &lf = left.schema().field(lk.columns[k]);
    const auto &rf = right.schema().field(rk.columns[k]);
    if (lf.domain != rf.domain) {
      throw Error(ErrorCode::DomainMismatch, "join key '" + lf.name + "' is " + std::string(domain_name(lf.domain)) +
                                                 " but '" + rf.name + "' is " + std::string(domain_name(rf.domain)));
    }
  }
}

// ---------------------------------------------------------------------------
// grouping

struct GroupIndex {
  std::vector<std::size_t> first_row;  // representative row of each group
  std::vector<std::size_t> row_group;  // group of each row
};

GroupIndex group_rows(const Table &t, const KeySpec &keys) {
  GroupIndex g;
  const auto n = t.num_rows();
  g.row_group.resize(n);
  const auto hashes = hash_keys(t, keys);
  KeyMatcher eq(t, keys, t, keys);
  const auto cap = table_capacity(n);
  const auto mask = cap - 1;
  std::vector<std::size_t> slots(cap, kNullRow);  // group id per slot
  for (std::size_t i = 0; i < n; ++i) {
    auto pos = hashes[i] & mask;
    while (true) {
      const auto gid = slots[pos];
      if (gid == kNullRow) {
        slots[pos] = g.first_row.size();
        g.row_group[i] = g.first_row.size();
        g.first_row.push_back(i);
        break;
      }
      const auto rep = g.first_row[gid];
      if (hashes[rep] == hashes[i] && eq.equal(rep, i)) {
        g.row_group[i] = gid;
        break;
      }
      pos = (pos + 1) & mask;
    }
  }
  return g;
}

enum class Reduce { Sum, Count, Min, Max };

int compare_double(double x, double y) {
  const bool nx = std::isnan(x), ny = std::isnan(y);
  if (nx || ny) return nx == ny ? 0 : (nx ? 1 : -1);
  return x < y ? -1 : (y < x ? 1 : 0);
}

Column reduce_column(const Column &c, const GroupIndex &g, Reduce kind) {
  const auto groups = g.first_row.size();
  std::vector<uint8_t> seen(groups, 0);
  auto validity_from_seen = [&] {
    std::vector<uint8_t> v(bits::bytes_for(groups), 0);
    for (std::size_t k = 0; k < groups; ++k) bits::set(v, k, seen[k] != 0);
    return v;
  };
  if (kind == Reduce::Count) {
    std::vector<int64_t> counts(groups, 0);
    for (std::size_t i = 0; i < c.length(); ++i) counts[g.row_group[i]] += c.is_valid(i);
    return Column::int64(std::move(counts), std::vector<uint8_t>(bits::bytes_for(groups), 0xFF));
  }
  if (c.domain() == Domain::Int64) {
    std::vector<int64_t> acc(groups, 0);
    auto v = c.int64_values();
    for (std::size_t i = 0; i < c.length(); ++i) {
      if (!c.is_valid(i)) continue;
      const auto k = g.row_group[i];
      if (!seen[k]) {
        seen[k] = 1;
        acc[k] = v[i];
        continue;
      }
      switch (kind) {
        case Reduce::Sum: acc[k] = static_cast<int64_t>(static_cast<uint64_t>(acc[k]) + static_cast<uint64_t>(v[i])); break;
        case Reduce::Min: acc[k] = std::min(acc[k], v[i]); break;
        case Reduce::Max: acc[k] = std::max(acc[k], v[i]); break;
        case Reduce::Count: break;
      }
    }
    auto validity = validity_from_seen();
    return Column::int64(std::move(acc), std::move(validity));
  }
  if (c.domain() == Domain::Float64) {
    std::vector<double> acc(groups, 0.0);
    auto v = c.float64_values();
    for (std::size_t i = 0; i < c.length(); ++i) {
      if (!c.is_valid(i)) continue;
      const auto k = g.row_group[i];
      if (!seen[k]) {
        seen[k] = 1;
        acc[k] = v[i];
        continue;
      }
      switch (kind) {
        case Reduce::Sum: acc[k] += v[i]; break;
        case Reduce::Min:
          if (compare_double(v[i], acc[k]) < 0) acc[k] = v[i];
          break;
        case Reduce::Max:
          if (compare_double(v[i], acc[k]) > 0) acc[k] = v[i];
          break;
        case Reduce::Count: break;
      }
    }
    auto validity = validity_from_seen();
    return Column::float64(std::move(acc), std::move(validity));
  }
  throw Error(ErrorCode::DomainMismatch, "numeric aggregate over " + std::string(domain_name(c.domain())) + " column");
}

/// sum / count elementwise in Float64; null where the sum is null or count is 0.
Column divide(const Column &sum, const Column &count) {
  const auto n = sum.length();
  std::vector<double> out(n, 0.0);
  std::vector<uint8_t> validity(bits::bytes_for(n), 0);
  for (std::size_t k = 0; k < n; ++k) {
    if (!sum.is_valid(k) || !count.is_valid(k) || count.int64_at(k) == 0) continue;
    const double s = sum.domain() == Domain::Int64 ? static_cast<double>(sum.int64_at(k)) : sum.float64_at(k);
    out[k] = s / static_cast<double>(count.int64_at(k));
    bits::set(validity, k, true);
  }
  return Column::float64(std::move(out), std::move(validity));
}

void check_aggs(const Schema &schema, const AggSpec &aggs) {
  for (const auto &a : aggs) {
    if (a.column >= schema.num_columns()) {
      throw Error(ErrorCode::InvalidArgument, "aggregate '" + a.name + "' refers to column " + std::to_string(a.column));
    }
    if (a.op != AggOp::Count && !is_numeric(schema.field(a.column).domain)) {
      throw Error(ErrorCode::DomainMismatch, std::string(agg_op_name(a.op)) + " over non-numeric column '" +
                                                 schema.field(a.column).name + "'");
    }
  }
}

Table assemble(const Table &t, const KeySpec &keys, const GroupIndex &g, std::vector<Field> agg_fields,
               std::vector<Column> agg_columns) {
  std::vector<Field> fields;
  std::vector<std::shared_ptr<const Column>> columns;
  for (auto k : keys.columns) {
    fields.push_back(t.schema().field(k));
    columns.push_back(std::make_shared<const Column>(take_column(t.column(k), g.first_row)));
  }
  for (std::size_t i = 0; i < agg_fields.size(); ++i) {
    fields.push_back(std::move(agg_fields[i]));
    columns.push_back(std::make_shared<const Column>(std::move(agg_columns[i])));
  }
  return Table(Schema(std::move(fields)), std::move(columns));
}

Reduce reduce_for(AggOp op) {
  switch (op) {
    case AggOp::Sum: return Reduce::Sum;
    case AggOp::Count: return Reduce::Count;
    case AggOp::Min: return Reduce::Min;
    case AggOp::Max: return Reduce::Max;
    case AggOp::Mean: break;
  }
  throw Error(ErrorCode::InvalidArgument, "mean has no single reduction");
}

}  // namespace

void KeySpec::validate(const Schema &schema) const {
  if (columns.empty()) throw Error(ErrorCode::InvalidArgument, "key list is empty");
  std::set<std::size_t> seen;
  for (auto c : columns) {
    if (c >= schema.num_columns()) throw Error(ErrorCode::InvalidArgument, "key column " + std::to_string(c) + " out of range");
    if (!seen.insert(c).second) throw Error(ErrorCode::InvalidArgument, "key column " + std::to_string(c) + " repeated");
  }
}

std::string_view agg_op_name(AggOp op) {
  switch (op) {
    case AggOp::Sum: return "sum";
    case AggOp::Count: return "count";
    case AggOp::Min: return "min";
    case AggOp::Max: return "max";
    case AggOp::Mean: return "mean";
  }
  return "?";
}

std::string_view join_type_name(JoinType jt) {
  switch (jt) {
    case JoinType::Inner: return "inner";
    case JoinType::Left: return "left";
    case JoinType::Right: return "right";
    case JoinType::FullOuter: return "full_outer";
  }
  return "?";
}

std::vector<uint64_t> hash_keys(const Table &t, const KeySpec &keys) {
  keys.validate(t.schema());
  std::vector<uint64_t> h(t.num_rows(), kHashSeed);
  for (auto k : keys.columns) hash_column_into(t.column(k), h);
  return h;
}

PartitionAssignment hash_partition(const Table &t, const KeySpec &keys, std::size_t parts) {
  PartitionAssignment a;
  const auto h = hash_keys(t, keys);
  a.target.resize(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) a.target[i] = static_cast<uint32_t>(h[i] % parts);
  return a;
}

Schema join_schema(const Schema &left, const Schema &right) {
  std::vector<Field> fields = left.fields();
  std::set<std::string> names;
  for (const auto &f : fields) names.insert(f.name);
  for (const auto &f : right.fields()) {
    std::string name = f.name;
    while (names.count(name)) name += "_r";
    names.insert(name);
    fields.push_back({name, f.domain});
  }
  return Schema(std::move(fields));
}

Table local_hash_join(const Table &left, const Table &right, const KeySpec &left_keys, const KeySpec &right_keys,
                      JoinType jt) {
  left_keys.validate(left.schema());
  right_keys.validate(right.schema());
  check_key_domains(left, left_keys, right, right_keys);

  const auto lh = hash_keys(left, left_keys);
  const auto rh = hash_keys(right, right_keys);
  KeyMatcher eq(left, left_keys, right, right_keys);

  // chained hash table over the right side; chains list rows in ascending order
  const auto cap = table_capacity(right.num_rows());
  const auto mask = cap - 1;
  std::vector<std::size_t> head(cap, kNullRow), next(right.num_rows(), kNullRow);
  for (std::size_t j = right.num_rows(); j-- > 0;) {
    if (eq.b_has_null(j)) continue;
    const auto b = rh[j] & mask;
    next[j] = head[b];
    head[b] = j;
  }

  const bool keep_left = jt == JoinType::Left || jt == JoinType::FullOuter;
  const bool keep_right = jt == JoinType::Right || jt == JoinType::FullOuter;
  std::vector<uint8_t> right_matched(keep_right ? right.num_rows() : 0, 0);
  std::vector<std::size_t> li, ri;
  li.reserve(left.num_rows());
  ri.reserve(left.num_rows());
  for (std::size_t i = 0; i < left.num_rows(); ++i) {
    bool matched = false;
    if (!eq.a_has_null(i)) {
      for (auto j = head[lh[i] & mask]; j != kNullRow; j = next[j]) {
        if (rh[j] != lh[i] || !eq.equal(i, j)) continue;
        li.push_back(i);
        ri.push_back(j);
        matched = true;
        if (keep_right) right_matched[j] = 1;
      }
    }
    if (!matched && keep_left) {
      li.push_back(i);
      ri.push_back(kNullRow);
    }
  }
  if (keep_right) {
    for (std::size_t j = 0; j < right.num_rows(); ++j) {
      if (!right_matched[j]) {
        li.push_back(kNullRow);
        ri.push_back(j);
      }
    }
  }

  std::vector<Column> columns;
  columns.reserve(left.num_columns() + right.num_columns());
  for (std::size_t c = 0; c < left.num_columns(); ++c) columns.push_back(take_column(left.column(c), li));
  for (std::size_t c = 0; c < right.num_columns(); ++c) columns.push_back(take_column(right.column(c), ri));
  return Table(join_schema(left.schema(), right.schema()), std::move(columns));
}

Table local_groupby(const Table &t, const KeySpec &keys, const AggSpec &aggs) {
  keys.validate(t.schema());
  check_aggs(t.schema(), aggs);
  const auto g = group_rows(t, keys);
  std::vector<Field> fields;
  std::vector<Column> columns;
  for (const auto &a : aggs) {
    const auto &src = t.column(a.column);
    if (a.op == AggOp::Mean) {
      columns.push_back(divide(reduce_column(src, g, Reduce::Sum), reduce_column(src, g, Reduce::Count)));
      fields.push_back({a.name, Domain::Float64});
    } else {
      columns.push_back(reduce_column(src, g, reduce_for(a.op)));
      fields.push_back({a.name, columns.back().domain()});
    }
  }
  return assemble(t, keys, g, std::move(fields), std::move(columns));
}

Table partial_aggregate(const Table &t, const KeySpec &keys, const AggSpec &aggs) {
  keys.validate(t.schema());
  check_aggs(t.schema(), aggs);
  const auto g = group_rows(t, keys);
  std::vector<Field> fields;
  std::vector<Column> columns;
  for (const auto &a : aggs) {
    const auto &src = t.column(a.column);
    if (a.op == AggOp::Mean) {
      columns.push_back(reduce_column(src, g, Reduce::Sum));
      fields.push_back({a.name + "#sum", src.domain()});
      columns.push_back(reduce_column(src, g, Reduce::Count));
      fields.push_back({a.name + "#count", Domain::Int64});
    } else {
      columns.push_back(reduce_column(src, g, reduce_for(a.op)));
      fields.push_back({a.name, columns.back().domain()});
    }
  }
  return assemble(t, keys, g, std::move(fields), std::move(columns));
}

Table final_combine(const Table &partials, const KeySpec &keys, const AggSpec &aggs) {
  KeySpec local_keys;
  for (std::size_t k = 0; k < keys.size(); ++k) local_keys.columns.push_back(k);
  local_keys.validate(partials.schema());
  const auto g = group_rows(partials, local_keys);
  std::vector<Field> fields;
  std::vector<Column> columns;
  std::size_t col = keys.size();
  for (const auto &a : aggs) {
    if (col >= partials.num_columns()) throw Error(ErrorCode::SchemaMismatch, "partial table lacks aggregate state");
    if (a.op == AggOp::Mean) {
      if (col + 1 >= partials.num_columns()) throw Error(ErrorCode::SchemaMismatch, "partial table lacks mean count");
      columns.push_back(divide(reduce_column(partials.column(col), g, Reduce::Sum),
                               reduce_column(partials.column(col + 1), g, Reduce::Sum)));
      fields.push_back({a.name, Domain::Float64});
      col += 2;
      continue;
    }
    const auto &src = partials.column(col++);
    switch (a.op) {
      case AggOp::Count: columns.push_back(reduce_column(src, g, Reduce::Sum)); break;
      case AggOp::Sum: columns.push_back(reduce_column(src, g, Reduce::Sum)); break;
      case AggOp::Min: columns.push_back(reduce_column(src, g, Reduce::Min)); break;
      case AggOp::Max: columns.push_back(reduce_column(src, g, Reduce::Max)); break;
      case AggOp::Mean: break;
    }
    fields.push_back({a.name, columns.back().domain()});
  }
  return assemble(partials, local_keys, g, std::move(fields), std::move(columns));
}

int compare_keys(const Table &a, std::size_t i, const std::vector<std::size_t> &keys_a, const Table &b, std::size_t j,
                 const std::vector<std::size_t> &keys_b, const SortOrder &ascending) {
  for (std::size_t k = 0; k < keys_a.size(); ++k) {
    const auto &ca = a.column(keys_a[k]);
    const auto &cb = b.column(keys_b[k]);
    int r = compare_cells(ca, i, cb, j);
    if (r == 0) continue;
    // nulls stay last whatever the direction
    const bool flip = !ascending.empty() && !ascending[k] && ca.is_valid(i) && cb.is_valid(j);
    return flip ? -r : r;
  }
  return 0;
}

std::vector<std::size_t> sort_indices(const Table &t, const KeySpec &keys, const SortOrder &ascending) {
  keys.validate(t.schema());
  if (!ascending.empty() && ascending.size() != keys.size()) {
    throw Error(ErrorCode::InvalidArgument, "one direction flag per sort key required");
  }
  std::vector<std::size_t> idx(t.num_rows());
  std::iota(idx.begin(), idx.end(), 0);
  const bool single_int = keys.size() == 1 && t.column(keys.columns[0]).domain() == Domain::Int64;
  if (single_int) {
    const auto &c = t.column(keys.columns[0]);
    const bool asc = ascending.empty() || ascending[0];
    auto v = c.int64_values();
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
      const bool vx = c.is_valid(x), vy = c.is_valid(y);
      if (!vx || !vy) return vx && !vy;
      return asc ? v[x] < v[y] : v[y] < v[x];
    });
    return idx;
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
    return compare_keys(t, x, keys.columns, t, y, keys.columns, ascending) < 0;
  });
  return idx;
}

Table local_sort(const Table &t, const KeySpec &keys, const SortOrder &ascending) {
  return take(t, sort_indices(t, keys, ascending));
}

Table merge_sorted(const std::vector<Table> &runs, const KeySpec &keys, const SortOrder &ascending) {
  if (runs.empty()) throw Error(ErrorCode::InvalidArgument, "merge of zero runs");
  const Table all = concat(runs);
  keys.validate(all.schema());
  std::vector<std::size_t> begin(runs.size() + 1, 0);
  for (std::size_t r = 0; r < runs.size(); ++r) begin[r + 1] = begin[r] + runs[r].num_rows();

  // heap of (position in `all`, run); ties resolved by run index
  using Cursor = std::pair<std::size_t, std::size_t>;
  auto after = [&](const Cursor &x, const Cursor &y) {
    int c = compare_keys(all, x.first, keys.columns, all, y.first, keys.columns, ascending);
    return c != 0 ? c > 0 : x.second > y.second;
  };
  std::priority_queue<Cursor, std::vector<Cursor>, decltype(after)> heap(after);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (begin[r] < begin[r + 1]) heap.push({begin[r], r});
  }
  std::vector<std::size_t> order;
  order.reserve(all.num_rows());
  while (!heap.empty()) {
    auto [pos, run] = heap.top();
    heap.pop();
    order.push_back(pos);
    if (pos + 1 < begin[run + 1]) heap.push({pos + 1, run});
  }
  return take(all, order);
}

Table select_splitter_candidates(const Table &sorted, const KeySpec &keys, std::size_t count) {
  keys.validate(sorted.schema());
  const auto n = sorted.num_rows();
  std::vector<std::size_t> idx;
  if (n < count) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0);
  } else {
    for (std::size_t i = 0; i < count; ++i) idx.push_back(i * n / count);
  }
  return select_columns(take(sorted, idx), keys.columns);
}

PartitionAssignment range_partition(const Table &sorted, const KeySpec &keys, const SortOrder &ascending,
                                    const Table &splitters) {
  keys.validate(sorted.schema());
  if (splitters.num_columns() != keys.size()) {
    throw Error(ErrorCode::SchemaMismatch, "splitters must hold exactly the key columns");
  }
  std::vector<std::size_t> splitter_keys(keys.size());
  std::iota(splitter_keys.begin(), splitter_keys.end(), 0);
  PartitionAssignment a;
  a.target.resize(sorted.num_rows());
  for (std::size_t i = 0; i < sorted.num_rows(); ++i) {
    // upper bound: first splitter strictly greater than the row key
    std::size_t lo = 0, hi = splitters.num_rows();
    while (lo < hi) {
      const auto mid = (lo + hi) / 2;
      if (compare_keys(splitters, mid, splitter_keys, sorted, i, keys.columns, ascending) <= 0) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    a.target[i] = static_cast<uint32_t>(lo);
  }
  return a;
}

Table add_scalar(const Table &t, std::size_t column, const Value &scalar) {
  if (column >= t.num_columns()) throw Error(ErrorCode::InvalidArgument, "column " + std::to_string(column) + " out of range");
  const auto &c = t.column(column);
  if (!is_numeric(c.domain())) {
    throw Error(ErrorCode::DomainMismatch, "add_scalar on " + std::string(domain_name(c.domain())) + " column");
  }
  const auto n = c.length();
  Column out = [&]() -> Column {
    if (std::holds_alternative<std::monostate>(scalar)) {
      return c.domain() == Domain::Int64
                 ? Column::int64(std::vector<int64_t>(n, 0), std::vector<uint8_t>(bits::bytes_for(n), 0))
                 : Column::float64(std::vector<double>(n, 0.0), std::vector<uint8_t>(bits::bytes_for(n), 0));
    }
    std::vector<uint8_t> validity(c.validity().begin(), c.validity().end());
    if (const auto *s = std::get_if<int64_t>(&scalar)) {
      if (c.domain() == Domain::Int64) {
        std::vector<int64_t> v(c.int64_values().begin(), c.int64_values().end());
        for (std::size_t i = 0; i < n; ++i) {
          if (c.is_valid(i)) v[i] = static_cast<int64_t>(static_cast<uint64_t>(v[i]) + static_cast<uint64_t>(*s));
        }
        return Column::int64(std::move(v), std::move(validity));
      }
      std::vector<double> v(c.float64_values().begin(), c.float64_values().end());
      for (std::size_t i = 0; i < n; ++i) {
        if (c.is_valid(i)) v[i] += static_cast<double>(*s);
      }
      return Column::float64(std::move(v), std::move(validity));
    }
    if (const auto *s = std::get_if<double>(&scalar)) {
      std::vector<double> v(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (!c.is_valid(i)) continue;
        v[i] = (c.domain() == Domain::Int64 ? static_cast<double>(c.int64_at(i)) : c.float64_at(i)) + *s;
      }
      return Column::float64(std::move(v), std::move(validity));
    }
    throw Error(ErrorCode::DomainMismatch, "add_scalar needs a numeric scalar");
  }();
  std::vector<Field> fields = t.schema().fields();
  fields[column].domain = out.domain();
  std::vector<std::shared_ptr<const Column>> columns;
  for (std::size_t i = 0; i < t.num_columns(); ++i) {
    columns.push_back(i == column ? std::make_shared<const Column>(std::move(out)) : t.column_ptr(i));
  }
  return Table(Schema(std::move(fields)), std::move(columns));
}

}  // namespace bspf
