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

#include "bspf/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace bspf {

namespace {

constexpr uint8_t kMagic[4] = {'B', 'S', 'P', 'F'};
constexpr uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "buffers are copied verbatim as little-endian");

template <class T>
void put_array(Bytes &out, std::span<const T> values) {
  const auto n = values.size() * sizeof(T);
  wire::put_u64(out, n);
  const auto pos = out.size();
  out.resize(pos + n);
  if (n) std::memcpy(out.data() + pos, values.data(), n);
}

template <class T>
std::vector<T> get_array(wire::Reader &in) {
  const auto n = in.u64();
  if (n % sizeof(T) != 0) throw Error(ErrorCode::CorruptPayload, "buffer length not a multiple of element width");
  auto raw = in.bytes(n);
  std::vector<T> out(n / sizeof(T));
  if (n) std::memcpy(out.data(), raw.data(), n);
  return out;
}

void put_header(Bytes &out, std::size_t columns) {
  wire::put_bytes(out, kMagic);
  wire::put_u16(out, kVersion);
  wire::put_u32(out, static_cast<uint32_t>(columns));
}

void put_field(Bytes &out, const Field &f) {
  wire::put_u8(out, static_cast<uint8_t>(f.domain));
  wire::put_u32(out, static_cast<uint32_t>(f.name.size()));
  wire::put_bytes(out, {reinterpret_cast<const uint8_t *>(f.name.data()), f.name.size()});
}

}  // namespace

namespace wire {

std::span<const uint8_t> Reader::bytes(uint64_t n) {
  if (n > remaining()) throw Error(ErrorCode::CorruptPayload, "truncated payload");
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

uint64_t Reader::fixed(int width) {
  auto b = bytes(width);
  uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace wire

Bytes serialize_table(const Table &t) {
  Bytes out;
  out.reserve(16 + t.byte_size() + t.num_columns() * 64);
  put_header(out, t.num_columns());
  for (std::size_t c = 0; c < t.num_columns(); ++c) {
    const auto &col = t.column(c);
    put_field(out, t.schema().field(c));
    wire::put_u64(out, col.length());
    put_array(out, col.validity());
    switch (col.domain()) {
      case Domain::Int64:
        wire::put_u64(out, 0);
        put_array(out, col.int64_values());
        break;
      case Domain::Float64:
        wire::put_u64(out, 0);
        put_array(out, col.float64_values());
        break;
      case Domain::Boolean:
        wire::put_u64(out, 0);
        put_array(out, col.byte_values());
        break;
      case Domain::Utf8:
        put_array(out, col.offsets());
        put_array(out, col.byte_values());
        break;
    }
  }
  return out;
}

Table deserialize_table(std::span<const uint8_t> bytes) {
  wire::Reader in(bytes);
  auto magic = in.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw Error(ErrorCode::CorruptPayload, "bad magic");
  if (in.u16() != kVersion) throw Error(ErrorCode::CorruptPayload, "unsupported version");
  const auto m = in.u32();
  if (m == 0) throw Error(ErrorCode::CorruptPayload, "zero columns");
  std::vector<Field> fields;
  std::vector<Column> columns;
  for (uint32_t c = 0; c < m; ++c) {
    const auto tag = in.u8();
    if (tag > 3) throw Error(ErrorCode::CorruptPayload, "unknown domain tag");
    const auto domain = static_cast<Domain>(tag);
    auto name = in.bytes(in.u32());
    const auto rows = in.u64();
    auto validity = get_array<uint8_t>(in);
    auto offsets = get_array<int64_t>(in);
    if (validity.size() != bits::bytes_for(rows)) throw Error(ErrorCode::CorruptPayload, "validity length");
    switch (domain) {
      case Domain::Int64: {
        auto data = get_array<int64_t>(in);
        if (!offsets.empty() || data.size() != rows) throw Error(ErrorCode::CorruptPayload, "int64 buffers");
        columns.push_back(Column::int64(std::move(data), std::move(validity)));
        break;
      }
      case Domain::Float64: {
        auto data = get_array<double>(in);
        if (!offsets.empty() || data.size() != rows) throw Error(ErrorCode::CorruptPayload, "float64 buffers");
        columns.push_back(Column::float64(std::move(data), std::move(validity)));
        break;
      }
      case Domain::Boolean: {
        auto data = get_array<uint8_t>(in);
        if (!offsets.empty() || data.size() != rows) throw Error(ErrorCode::CorruptPayload, "boolean buffers");
        columns.push_back(Column::boolean(std::move(data), std::move(validity)));
        break;
      }
      case Domain::Utf8: {
        auto data = get_array<uint8_t>(in);
        if (offsets.size() != rows + 1) throw Error(ErrorCode::CorruptPayload, "utf8 offsets length");
        columns.push_back(Column::utf8(std::move(offsets), std::move(data), std::move(validity)));
        break;
      }
    }
    fields.push_back({std::string(reinterpret_cast<const char *>(name.data()), name.size()), domain});
  }
  if (in.remaining() != 0) throw Error(ErrorCode::CorruptPayload, "trailing bytes");
  try {
    return Table(Schema(std::move(fields)), std::move(columns));
  } catch (const Error &e) {
    throw Error(ErrorCode::CorruptPayload, e.what());
  }
}

Bytes serialize_schema(const Schema &schema) {
  Bytes out;
  put_header(out, schema.num_columns());
  for (const auto &f : schema.fields()) put_field(out, f);
  return out;
}

uint64_t schema_digest(const Schema &schema) {
  // FNV-1a over the schema encoding
  uint64_t h = 0xcbf29ce484222325ULL;
  for (uint8_t b : serialize_schema(schema)) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Bytes read_file_bytes(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  Bytes out(size);
  in.read(reinterpret_cast<char *>(out.data()), static_cast<std::streamsize>(size));
  if (!in) throw Error(ErrorCode::IoError, "short read on " + path.string());
  return out;
}

void write_file_bytes(const std::filesystem::path &path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot create " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed on " + path.string());
}

void write_table_file(const std::filesystem::path &path, const Table &t) { write_file_bytes(path, serialize_table(t)); }

Table read_table_file(const std::filesystem::path &path) { return deserialize_table(read_file_bytes(path)); }

}  // namespace bspf
