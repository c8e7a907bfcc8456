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

#ifndef BSPF_KERNELS_HPP
#define BSPF_KERNELS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "bspf/table.hpp"
#include "bspf/table_comm.hpp"

namespace bspf {

/// Ordered key column indices; all other columns are values.
struct KeySpec {
  std::vector<std::size_t> columns;

  /// Throws InvalidArgument unless nonempty, distinct and in range.
  void validate(const Schema &schema) const;
  std::size_t size() const { return columns.size(); }
};

enum class AggOp { Sum, Count, Min, Max, Mean };

std::string_view agg_op_name(AggOp op);

struct Aggregate {
  std::size_t column;
  AggOp op;
  std::string name;
};

using AggSpec = std::vector<Aggregate>;

enum class JoinType { Inner, Left, Right, FullOuter };

std::string_view join_type_name(JoinType jt);

/// Per-row 64-bit hash of the key columns. Depends only on the key values and
/// their domains, so every rank and process computes the same partitioning.
std::vector<uint64_t> hash_keys(const Table &t, const KeySpec &keys);

/// hash mod parts for every row.
PartitionAssignment hash_partition(const Table &t, const KeySpec &keys, std::size_t parts);

/// Left columns followed by every right column; a right name that clashes gets "_r".
Schema join_schema(const Schema &left, const Schema &right);

/**
 * Hash join (build on right, probe with left). Null keys never match but are
 * kept by outer joins. Output order: left rows in order, each followed by its
 * matches in right order; then unmatched right rows (Right/FullOuter).
 */
Table local_hash_join(const Table &left, const Table &right, const KeySpec &left_keys, const KeySpec &right_keys,
                      JoinType jt);

/// One row per distinct key tuple (null is its own group), in first-occurrence
/// order: key columns, then one column per aggregate. Sum/Min/Max/Mean over no
/// present values give null; Count counts present values; Mean is Float64.
Table local_groupby(const Table &t, const KeySpec &keys, const AggSpec &aggs);

/// Decomposed groupby. partial_aggregate emits keys then, per aggregate, its
/// partial state (Mean carries "<name>#sum" and "<name>#count"); final_combine
/// takes the concatenation of such partials and the original key/agg specs.
Table partial_aggregate(const Table &t, const KeySpec &keys, const AggSpec &aggs);
Table final_combine(const Table &partials, const KeySpec &keys, const AggSpec &aggs);

/// Per-key direction; an empty list means all ascending. Nulls sort last in both directions.
using SortOrder = std::vector<bool>;

/// Three-way comparison of row i of a on keys_a with row j of b on keys_b.
int compare_keys(const Table &a, std::size_t i, const std::vector<std::size_t> &keys_a, const Table &b, std::size_t j,
                 const std::vector<std::size_t> &keys_b, const SortOrder &ascending);

std::vector<std::size_t> sort_indices(const Table &t, const KeySpec &keys, const SortOrder &ascending);

/// Stable sort by keys.
Table local_sort(const Table &t, const KeySpec &keys, const SortOrder &ascending);

/// Merges tables that are each sorted by keys; ties keep run order.
Table merge_sorted(const std::vector<Table> &runs, const KeySpec &keys, const SortOrder &ascending);

/// Key columns of rows floor(i*N/count), i in [0, count); every row if N < count.
Table select_splitter_candidates(const Table &sorted, const KeySpec &keys, std::size_t count);

/// Target of each row = number of splitters <= its key. Splitters hold only the
/// key columns, in key order.
PartitionAssignment range_partition(const Table &sorted, const KeySpec &keys, const SortOrder &ascending,
                                    const Table &splitters);

/// Adds a numeric scalar to one column; nulls stay null. An Int64 column with a
/// Float64 scalar becomes Float64.
Table add_scalar(const Table &t, std::size_t column, const Value &scalar);

}  // namespace bspf

#endif  // BSPF_KERNELS_HPP
