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

#include "bspf/operators.hpp"

#include <numeric>

#include "bspf/serialize.hpp"

namespace bspf {

namespace {

KeySpec leading_keys(std::size_t count) {
  KeySpec k;
  k.columns.resize(count);
  std::iota(k.columns.begin(), k.columns.end(), 0);
  return k;
}

}  // namespace

Table dist_join(ExecEnv &env, const Table &left, const Table &right, const KeySpec &left_keys,
                const KeySpec &right_keys, JoinType jt) {
  auto &c = env.comm();
  const auto p = static_cast<std::size_t>(env.world_size);
  PartitionAssignment la, ra;
  {
    CommTimer::Scope s(env.timer, false);
    left_keys.validate(left.schema());
    right_keys.validate(right.schema());
    la = hash_partition(left, left_keys, p);
    ra = hash_partition(right, right_keys, p);
  }
  Table left_local = left, right_local = right;
  {
    CommTimer::Scope s(env.timer, true);
    left_local = shuffle_table(c, left, la);
    right_local = shuffle_table(c, right, ra);
  }
  CommTimer::Scope s(env.timer, false);
  return local_hash_join(left_local, right_local, left_keys, right_keys, jt);
}

Table dist_groupby(ExecEnv &env, const Table &t, const KeySpec &keys, const AggSpec &aggs) {
  auto &c = env.comm();
  Table partial = t;
  PartitionAssignment assign;
  {
    CommTimer::Scope s(env.timer, false);
    partial = partial_aggregate(t, keys, aggs);
    assign = hash_partition(partial, leading_keys(keys.size()), static_cast<std::size_t>(env.world_size));
  }
  {
    CommTimer::Scope s(env.timer, true);
    partial = shuffle_table(c, partial, assign);
  }
  CommTimer::Scope s(env.timer, false);
  return final_combine(partial, keys, aggs);
}

Table splitter_select(const Table &candidates, std::size_t world_size, const SortOrder &ascending) {
  const auto key_count = candidates.num_columns();
  const auto keys = leading_keys(key_count);
  const Table sorted = local_sort(candidates, keys, ascending);
  const auto c = sorted.num_rows();
  std::vector<std::size_t> idx;
  if (c > 0) {
    for (std::size_t i = 1; i < world_size; ++i) idx.push_back(std::min((i * c + world_size - 1) / world_size, c - 1));
  }
  return take(sorted, idx);
}

Table dist_sort(ExecEnv &env, const Table &t, const KeySpec &keys, const SortOrder &ascending) {
  auto &c = env.comm();
  const auto p = static_cast<std::size_t>(env.world_size);
  Table sorted = t, candidates = t;
  {
    CommTimer::Scope s(env.timer, false);
    sorted = local_sort(t, keys, ascending);
    if (p == 1) return sorted;
    candidates = select_splitter_candidates(sorted, keys, p);
  }
  std::vector<Bytes> gathered;
  {
    CommTimer::Scope s(env.timer, true);
    gathered = c.allgather(serialize_table(candidates));
  }
  PartitionAssignment assign;
  {
    CommTimer::Scope s(env.timer, false);
    std::vector<Table> parts;
    for (auto &b : gathered) parts.push_back(deserialize_table(b));
    const Table splitters = splitter_select(concat(parts), p, ascending);
    assign = range_partition(sorted, keys, ascending, splitters);
  }
  std::vector<Table> runs;
  {
    CommTimer::Scope s(env.timer, true);
    runs = shuffle_table_parts(c, sorted, assign);
  }
  CommTimer::Scope s(env.timer, false);
  return merge_sorted(runs, keys, ascending);
}

Table dist_map(ExecEnv &env, const Table &t, const std::function<Table(const Table &)> &op) {
  CommTimer::Scope s(env.timer, false);
  return op(t);
}

}  // namespace bspf
