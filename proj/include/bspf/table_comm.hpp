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

#ifndef BSPF_TABLE_COMM_HPP
#define BSPF_TABLE_COMM_HPP

#include <cstdint>
#include <vector>

#include "bspf/comm/communicator.hpp"
#include "bspf/table.hpp"

namespace bspf {

/// Destination rank for every row of a table.
struct PartitionAssignment {
  std::vector<uint32_t> target;
};

/**
 * Moves every row to its assigned rank. Two phases: an all-to-all of payload
 * sizes (each tagged with the sender's schema digest), then an all-to-all of
 * the serialized partitions. The result on rank r is the rows sent to r,
 * ordered by source rank and then by original row order.
 */
Table shuffle_table(comm::Communicator &c, const Table &t, const PartitionAssignment &assign);

/// shuffle_table without the final concatenation: one table per source rank.
std::vector<Table> shuffle_table_parts(comm::Communicator &c, const Table &t, const PartitionAssignment &assign);

/// Root receives the rank-order concatenation; other ranks get an empty table.
Table gather_table(comm::Communicator &c, const Table &t, int root);

/// Every rank returns a copy of the root's table; non-root input is ignored.
Table broadcast_table(comm::Communicator &c, const Table &t, int root);

/// Rebalances rows so rank r holds the r-th contiguous chunk of the global
/// rank-major row sequence (chunk sizes differ by at most one).
Table repartition_even(comm::Communicator &c, const Table &t);

/// Chunk lengths of the ceiling split of `total` rows over `parts` ranks.
std::vector<std::size_t> even_split_lengths(std::size_t total, std::size_t parts);

/// Raises SchemaMismatch on every rank unless all ranks hold the same schema.
void check_schema_consistency(comm::Communicator &c, const Schema &schema);

}  // namespace bspf

#endif  // BSPF_TABLE_COMM_HPP
