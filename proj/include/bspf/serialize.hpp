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

#ifndef BSPF_SERIALIZE_HPP
#define BSPF_SERIALIZE_HPP

#include <cstdint>
#include <filesystem>
#include <span>

#include "bspf/table.hpp"

namespace bspf {

/**
 * Native table encoding (little-endian):
 *   "BSPF" u16 version=1, u32 column count, then per column
 *   u8 domain tag, u32 name length, name bytes, u64 rows,
 *   u64 validity length + bytes, u64 offsets length + bytes (0 for fixed width),
 *   u64 data length + bytes.
 * Utf8 offsets are encoded as int64 values.
 */
Bytes serialize_table(const Table &t);
Table deserialize_table(std::span<const uint8_t> bytes);

/// Encoding of the schema alone ("BSPF" header + per column tag and name).
Bytes serialize_schema(const Schema &schema);
uint64_t schema_digest(const Schema &schema);

void write_table_file(const std::filesystem::path &path, const Table &t);
Table read_table_file(const std::filesystem::path &path);

Bytes read_file_bytes(const std::filesystem::path &path);
void write_file_bytes(const std::filesystem::path &path, std::span<const uint8_t> bytes);

namespace wire {

inline void put_u8(Bytes &out, uint8_t v) { out.push_back(v); }
inline void put_u16(Bytes &out, uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
inline void put_u32(Bytes &out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
inline void put_u64(Bytes &out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
inline void put_bytes(Bytes &out, std::span<const uint8_t> b) { out.insert(out.end(), b.begin(), b.end()); }

/// Bounds-checked little-endian reader; throws CorruptPayload past the end.
class Reader {
 public:
  explicit Reader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t u8() { return static_cast<uint8_t>(fixed(1)); }
  uint16_t u16() { return static_cast<uint16_t>(fixed(2)); }
  uint32_t u32() { return static_cast<uint32_t>(fixed(4)); }
  uint64_t u64() { return fixed(8); }
  std::span<const uint8_t> bytes(uint64_t n);

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  uint64_t fixed(int width);

  std::span<const uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace wire

}  // namespace bspf

#endif  // BSPF_SERIALIZE_HPP
