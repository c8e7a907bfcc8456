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

#include "bspf/table_comm.hpp"

#include "bspf/serialize.hpp"

namespace bspf {

namespace {

uint64_t read_u64(const Bytes &b, std::size_t at = 0) {
  wire::Reader in(std::span<const uint8_t>(b).subspan(at));
  return in.u64();
}

Bytes encode_u64(uint64_t v) {
  Bytes out;
  wire::put_u64(out, v);
  return out;
}

}  // namespace

std::vector<std::size_t> even_split_lengths(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> out(parts, total / parts);
  for (std::size_t i = 0; i < total % parts; ++i) ++out[i];
  return out;
}

void check_schema_consistency(comm::Communicator &c, const Schema &schema) {
  const auto digests = c.allgather(encode_u64(schema_digest(schema)));
  for (int r = 0; r < c.world_size(); ++r) {
    if (read_u64(digests[r]) != read_u64(digests[c.rank()])) {
      throw Error(ErrorCode::SchemaMismatch, "rank " + std::to_string(r) + " holds a different schema than rank " +
                                                 std::to_string(c.rank()));
    }
  }
}

std::vector<Table> shuffle_table_parts(comm::Communicator &c, const Table &t, const PartitionAssignment &assign) {
  const auto p = static_cast<std::size_t>(c.world_size());
  if (assign.target.size() != t.num_rows()) {
    throw Error(ErrorCode::LengthMismatch, "assignment covers " + std::to_string(assign.target.size()) +
                                               " rows, table has " + std::to_string(t.num_rows()));
  }
  std::vector<std::vector<std::size_t>> rows(p);
  for (std::size_t i = 0; i < assign.target.size(); ++i) {
    const auto dest = assign.target[i];
    if (dest >= p) throw Error(ErrorCode::InvalidRank, "row " + std::to_string(i) + " assigned to rank " + std::to_string(dest));
    rows[dest].push_back(i);
  }

  std::vector<Table> parts(p, Table::empty(t.schema()));
  std::vector<Bytes> outgoing(p);
  for (std::size_t d = 0; d < p; ++d) {
    if (d == static_cast<std::size_t>(c.rank())) {
      parts[d] = rows[d].size() == t.num_rows() ? t : take(t, rows[d]);
    } else {
      outgoing[d] = serialize_table(take(t, rows[d]));
    }
  }

  // counts: schema digest + payload size per destination
  const auto digest = schema_digest(t.schema());
  std::vector<Bytes> counts(p);
  for (std::size_t d = 0; d < p; ++d) {
    wire::put_u64(counts[d], digest);
    wire::put_u64(counts[d], outgoing[d].size());
  }
  auto incoming_counts = c.all_to_all(std::move(counts));
  bool mismatch = false;
  for (std::size_t s = 0; s < p; ++s) mismatch = mismatch || read_u64(incoming_counts[s]) != digest;

  auto incoming = c.all_to_all(std::move(outgoing));
  if (mismatch) throw Error(ErrorCode::SchemaMismatch, "shuffle between ranks holding different schemas");
  for (std::size_t s = 0; s < p; ++s) {
    if (s == static_cast<std::size_t>(c.rank())) continue;
    if (incoming[s].size() != read_u64(incoming_counts[s], 8)) {
      throw Error(ErrorCode::CorruptPayload, "shuffle payload from rank " + std::to_string(s) + " has unexpected size");
    }
    parts[s] = deserialize_table(incoming[s]);
  }
  return parts;
}

Table shuffle_table(comm::Communicator &c, const Table &t, const PartitionAssignment &assign) {
  return concat(shuffle_table_parts(c, t, assign), t.schema());
}

Table gather_table(comm::Communicator &c, const Table &t, int root) {
  check_schema_consistency(c, t.schema());
  auto payloads = c.gather(serialize_table(t), root);
  if (c.rank() != root) return Table::empty(t.schema());
  std::vector<Table> parts;
  parts.reserve(payloads.size());
  for (int r = 0; r < c.world_size(); ++r) parts.push_back(r == root ? t : deserialize_table(payloads[r]));
  return concat(parts, t.schema());
}

Table broadcast_table(comm::Communicator &c, const Table &t, int root) {
  auto payload = c.broadcast(c.rank() == root ? serialize_table(t) : Bytes{}, root);
  return c.rank() == root ? t : deserialize_table(payload);
}

Table repartition_even(comm::Communicator &c, const Table &t) {
  const auto p = static_cast<std::size_t>(c.world_size());
  auto lengths = c.allgather(encode_u64(t.num_rows()));
  std::size_t total = 0, my_start = 0;
  for (std::size_t r = 0; r < p; ++r) {
    const auto n = read_u64(lengths[r]);
    if (r < static_cast<std::size_t>(c.rank())) my_start += n;
    total += n;
  }
  const auto chunks = even_split_lengths(total, p);
  PartitionAssignment assign;
  assign.target.resize(t.num_rows());
  std::size_t dest = 0, chunk_end = chunks[0];
  for (std::size_t i = 0; i < t.num_rows(); ++i) {
    const auto global = my_start + i;
    while (global >= chunk_end) chunk_end += chunks[++dest];
    assign.target[i] = static_cast<uint32_t>(dest);
  }
  return shuffle_table(c, t, assign);
}

}  // namespace bspf
