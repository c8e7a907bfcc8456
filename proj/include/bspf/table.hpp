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

#ifndef BSPF_TABLE_HPP
#define BSPF_TABLE_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bspf/error.hpp"

namespace bspf {

using Bytes = std::vector<uint8_t>;

enum class Domain : uint8_t { Int64 = 0, Float64 = 1, Utf8 = 2, Boolean = 3 };

std::string_view domain_name(Domain domain);
std::optional<Domain> parse_domain(std::string_view name);
inline bool is_numeric(Domain d) { return d == Domain::Int64 || d == Domain::Float64; }

struct Field {
  std::string name;
  Domain domain;

  bool operator==(const Field &) const = default;
};

/// Ordered column names and domains. At least one column, names unique and nonempty.
class Schema {
 public:
  explicit Schema(std::vector<Field> fields);

  std::size_t num_columns() const { return fields_.size(); }
  const Field &field(std::size_t i) const { return fields_.at(i); }
  const std::vector<Field> &fields() const { return fields_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  bool operator==(const Schema &) const = default;

 private:
  std::vector<Field> fields_;
};

/// A cell value used at API boundaries (construction, scalars, debugging).
/// std::monostate is null.
using Value = std::variant<std::monostate, int64_t, double, std::string, bool>;

std::string value_to_string(const Value &v);

namespace bits {
inline bool get(std::span<const uint8_t> bitmap, std::size_t i) { return (bitmap[i >> 3] >> (i & 7)) & 1; }
inline void set(std::span<uint8_t> bitmap, std::size_t i, bool v) {
  if (v) {
    bitmap[i >> 3] = static_cast<uint8_t>(bitmap[i >> 3] | (1u << (i & 7)));
  } else {
    bitmap[i >> 3] = static_cast<uint8_t>(bitmap[i >> 3] & ~(1u << (i & 7)));
  }
}
inline std::size_t bytes_for(std::size_t n) { return (n + 7) / 8; }
}  // namespace bits

/**
 * One column: validity bitmap (always materialized, bit set = present), plus
 * either fixed-width values or Utf8 offsets + bytes. Slots of null values hold
 * zero / empty strings.
 */
class Column {
 public:
  static Column int64(std::vector<int64_t> values, std::vector<uint8_t> validity);
  static Column float64(std::vector<double> values, std::vector<uint8_t> validity);
  static Column boolean(std::vector<uint8_t> values, std::vector<uint8_t> validity);
  static Column utf8(std::vector<int64_t> offsets, std::vector<uint8_t> data, std::vector<uint8_t> validity);

  Domain domain() const { return domain_; }
  std::size_t length() const { return length_; }
  bool is_valid(std::size_t i) const { return bits::get(validity_, i); }
  std::size_t null_count() const;

  std::span<const uint8_t> validity() const { return validity_; }
  std::span<const int64_t> int64_values() const { return ints_; }
  std::span<const double> float64_values() const { return doubles_; }
  /// Boolean values (one byte each) or Utf8 payload bytes.
  std::span<const uint8_t> byte_values() const { return bytes_; }
  /// Utf8 offsets, length()+1 entries.
  std::span<const int64_t> offsets() const { return ints_; }

  int64_t int64_at(std::size_t i) const { return ints_[i]; }
  double float64_at(std::size_t i) const { return doubles_[i]; }
  bool bool_at(std::size_t i) const { return bytes_[i] != 0; }
  std::string_view utf8_at(std::size_t i) const {
    return {reinterpret_cast<const char *>(bytes_.data()) + ints_[i], static_cast<std::size_t>(ints_[i + 1] - ints_[i])};
  }
  Value value_at(std::size_t i) const;

  std::size_t byte_size() const;

  /// Checks every buffer invariant; throws CorruptPayload on violation.
  void validate() const;

 private:
  Column(Domain domain, std::size_t length) : domain_(domain), length_(length) {}

  Domain domain_;
  std::size_t length_;
  std::vector<uint8_t> validity_;
  std::vector<int64_t> ints_;   // Int64 values or Utf8 offsets
  std::vector<double> doubles_;
  std::vector<uint8_t> bytes_;  // Boolean values or Utf8 bytes

  friend class ColumnBuilder;
};

class ColumnBuilder {
 public:
  explicit ColumnBuilder(Domain domain, std::size_t reserve = 0);

  Domain domain() const { return domain_; }
  std::size_t length() const { return length_; }

  void append_null();
  void append(int64_t v);
  void append(double v);
  void append(bool v);
  void append(std::string_view v);
  void append(const char *v) { append(std::string_view(v)); }
  /// Throws DomainMismatch if the value does not belong to the builder's domain.
  void append_value(const Value &v);
  void append_from(const Column &src, std::size_t row);

  Column finish() &&;

 private:
  void push_validity(bool valid);

  Domain domain_;
  std::size_t length_ = 0;
  std::vector<uint8_t> validity_;
  std::vector<int64_t> ints_;
  std::vector<double> doubles_;
  std::vector<uint8_t> bytes_;
};

/// Immutable columnar table. Copies share column buffers.
class Table {
 public:
  Table(Schema schema, std::vector<Column> columns);
  Table(Schema schema, std::vector<std::shared_ptr<const Column>> columns);

  static Table empty(const Schema &schema);

  const Schema &schema() const { return schema_; }
  std::size_t num_rows() const { return num_rows_; }
  std::size_t num_columns() const { return columns_.size(); }
  const Column &column(std::size_t i) const { return *columns_.at(i); }
  std::shared_ptr<const Column> column_ptr(std::size_t i) const { return columns_.at(i); }
  Value value_at(std::size_t row, std::size_t col) const { return column(col).value_at(row); }
  std::size_t byte_size() const;

  /// Re-checks every table and column invariant.
  void validate() const;

 private:
  Schema schema_;
  std::vector<std::shared_ptr<const Column>> columns_;
  std::size_t num_rows_ = 0;
};

bool operator==(const Column &a, const Column &b);
bool operator==(const Table &a, const Table &b);

struct RowRef {
  RowRef(const Table &t, std::size_t row);

  const Table *table;
  std::size_t row;
};

/// Index that take_column turns into a null slot.
inline constexpr std::size_t kNullRow = static_cast<std::size_t>(-1);

Table build_table(const Schema &schema, const std::vector<std::vector<Value>> &columns);

Table slice(const Table &t, std::size_t start, std::size_t length);
Table take(const Table &t, std::span<const std::size_t> indices);
/// Unchecked gather; kNullRow entries produce nulls.
Column take_column(const Column &c, std::span<const std::size_t> indices);
Table concat(const std::vector<Table> &parts, const std::optional<Schema> &schema = std::nullopt);
Table select_columns(const Table &t, std::span<const std::size_t> columns);

/// Total order on a single cell: nulls after all present values; Float64 uses
/// -0.0 == 0.0 and NaN above every number; Utf8 compares bytes.
int compare_cells(const Column &a, std::size_t i, const Column &b, std::size_t j);
/// Equality under the same order (null equals null).
inline bool cells_equal(const Column &a, std::size_t i, const Column &b, std::size_t j) {
  return compare_cells(a, i, b, j) == 0;
}

/// Sorts rows lexicographically over all columns (order of compare_cells).
Table canonicalize(const Table &t);

std::string format_row(const Table &t, std::size_t row);

}  // namespace bspf

#endif  // BSPF_TABLE_HPP
