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

#ifndef BSPF_TESTS_SUPPORT_HPP
#define BSPF_TESTS_SUPPORT_HPP

// Test-only oracles and harnesses. Everything here works on Values and plain
// containers so it shares no code paths with the kernels under test.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bspf/comm/communicator.hpp"
#include "bspf/env.hpp"
#include "bspf/kernels.hpp"
#include "bspf/table.hpp"

namespace bspf::testing {

using Rng = std::mt19937_64;
using Row = std::vector<Value>;

/// Random schema of `columns` columns over all four domains.
Schema random_schema(Rng &rng, std::size_t columns);

/// Values drawn from small ranges so keys collide; floats are multiples of
/// 0.25 plus occasional -0.0 and NaN, so sums are exact in any order.
Value random_value(Rng &rng, Domain d, double null_p, int range = 8);
Table random_table(Rng &rng, const Schema &schema, std::size_t rows, double null_p, int range = 8);

std::vector<Row> rows_of(const Table &t);
Table table_of(const Schema &schema, const std::vector<Row> &rows);

/// NaN equals NaN, -0.0 equals 0.0; null equals null.
bool same_value(const Value &a, const Value &b);
/// Nulls last, NaN after numbers, false < true, bytewise strings.
int order_values(const Value &a, const Value &b);

/// Cellwise same_value; on mismatch `why` names the first difference.
bool same_rows(const Table &a, const Table &b, std::string *why = nullptr);
/// same_rows after sorting both row lists with order_values.
bool same_multiset(const Table &a, const Table &b, std::string *why = nullptr);

/// Nested-loop join with SQL null semantics, output in the kernel's documented order.
Table ref_join(const Table &left, const Table &right, const std::vector<std::size_t> &lk,
               const std::vector<std::size_t> &rk, JoinType jt);
/// Linear-scan groupby in first-occurrence order.
Table ref_groupby(const Table &t, const std::vector<std::size_t> &keys, const AggSpec &aggs);
/// Insertion sort (stable) by the keys; nulls last in both directions.
Table ref_sort(const Table &t, const std::vector<std::size_t> &keys, const std::vector<bool> &ascending);
/// Destination d receives, in source order, the rows each source assigned to d.
std::vector<Table> ref_shuffle(const std::vector<Table> &inputs, const std::vector<std::vector<uint32_t>> &assign,
                               std::size_t world);

/// Single-threaded mailbox simulation of the collectives.
namespace mailbox {
std::vector<std::vector<Bytes>> all_to_all(const std::vector<std::vector<Bytes>> &outgoing);
std::vector<std::vector<Bytes>> gather(const std::vector<Bytes> &payloads, int root);
std::vector<std::vector<Bytes>> allgather(const std::vector<Bytes> &payloads);
std::vector<Bytes> broadcast(const std::vector<Bytes> &payloads, int root);
std::vector<int64_t> allreduce(const std::vector<int64_t> &values, comm::ReduceOp op);
}  // namespace mailbox

/// Runs fn on `world` threads, each holding a freshly initialized communicator
/// of the given backend. Rethrows the first failure after all threads finish.
void run_world(std::size_t world, comm::Backend backend, const std::function<void(ExecEnv &)> &fn,
               std::chrono::milliseconds timeout = std::chrono::milliseconds(20000));

/**
 * Runs `cases` randomized collective cases (barrier, send/recv, all_to_all,
 * gather, allgather, broadcast, allreduce) in one world and checks every
 * rank's results against the mailbox simulation. Inputs derive from the seed
 * so all ranks agree on them. Throws on the first mismatch; returns the number
 * of cases checked.
 */
std::size_t comm_conformance(comm::Backend backend, std::size_t world, uint64_t seed, std::size_t cases);

/// Kernels covered by kernel_oracles.
inline const std::vector<std::string> kKernelNames{"hash", "join", "groupby", "sort",
                                                   "decompose", "range_partition", "add_scalar"};

/**
 * Checks one kernel on `tables` randomized inputs (<= 256 rows, all domains,
 * nulls) against the brute-force references above. Throws on the first
 * mismatch with the case seed; returns the number of inputs checked.
 */
std::size_t kernel_oracles(const std::string &kernel, uint64_t seed, std::size_t tables);

std::string unique_name(const std::string &prefix);

Bytes random_bytes(Rng &rng, std::size_t max_len);

}  // namespace bspf::testing

#endif  // BSPF_TESTS_SUPPORT_HPP
