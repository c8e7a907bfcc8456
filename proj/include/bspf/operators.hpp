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

#ifndef BSPF_OPERATORS_HPP
#define BSPF_OPERATORS_HPP

#include <functional>

#include "bspf/env.hpp"
#include "bspf/kernels.hpp"

namespace bspf {

// Distributed operators. Every rank of the world must call the same operator,
// in the same order, with its own partition. Shuffle stages are timed as
// communication and local stages as computation on env.timer.

/// Hash-shuffles both sides on their keys, then joins locally.
Table dist_join(ExecEnv &env, const Table &left, const Table &right, const KeySpec &left_keys,
                const KeySpec &right_keys, JoinType jt);

/// Combine-shuffle-reduce: partial aggregation, hash shuffle of the partials on
/// the keys, final combine.
Table dist_groupby(ExecEnv &env, const Table &t, const KeySpec &keys, const AggSpec &aggs);

/// Sample sort: local sort, regular sampling of world_size candidates per
/// rank, allgather, splitter selection, range shuffle and a merge of the
/// received sorted runs. Rank-major concatenation of the outputs is sorted.
Table dist_sort(ExecEnv &env, const Table &t, const KeySpec &keys, const SortOrder &ascending);

/// Applies a local transform to this rank's partition with no communication.
Table dist_map(ExecEnv &env, const Table &t, const std::function<Table(const Table &)> &op);

/// Sorts the gathered candidates (key columns only) and picks rows
/// ceil(i*C/p) for i in [1, p) as the p-1 splitters.
Table splitter_select(const Table &candidates, std::size_t world_size, const SortOrder &ascending);

}  // namespace bspf

#endif  // BSPF_OPERATORS_HPP
