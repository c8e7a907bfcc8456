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

#include "bspf/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace bspf {

std::string_view domain_name(Domain domain) {
  switch (domain) {
    case Domain::Int64: return "int64";
    case Domain::Float64: return "float64";
    case Domain::Utf8: return "utf8";
    case Domain::Boolean: return "bool";
  }
  return "unknown";
}

std::optional<Domain> parse_domain(std::string_view name) {
  if (name == "int64") return Domain::Int64;
  if (name == "float64") return Domain::Float64;
  if (name == "utf8" || name == "string") return Domain::Utf8;
  if (name == "bool" || name == "boolean") return Domain::Boolean;
  return std::nullopt;
}

Schema::Schema(std::vector<Field> fields) : fields_(std::move(fields)) {
  if (fields_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "schema needs at least one column");
  }
  std::unordered_set<std::string_view> seen;
  for (const auto &f : fields_) {
    if (f.name.empty()) throw Error(ErrorCode::InvalidArgument, "empty column name");
    if (static_cast<uint8_t>(f.domain) > 3) throw Error(ErrorCode::InvalidArgument, "unknown domain");
    if (!seen.insert(f.name).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate column name '" + f.name + "'");
    }
  }
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (fields_[i].name == name) return i;
  }
  return std::nullopt;
}

std::string value_to_string(const Value &v) {
  struct Visitor {
    std::string operator()(std::monostate) const { return "null"; }
    std::string operator()(int64_t x) const { return std::to_string(x); }
    std::string operator()(double x) const {
      std::ostringstream os;
      os.precision(17);
      os << x;
      return os.str();
    }
    std::string operator()(const std::string &s) const { return "\"" + s + "\""; }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
  };
  return std::visit(Visitor{}, v);
}

// ---------------------------------------------------------------------------
// Column

Column Column::int64(std::vector<int64_t> values, std::vector<uint8_t> validity) {
  Column c(Domain::Int64, values.size());
  c.ints_ = std::move(values);
  c.validity_ = std::move(validity);
  c.validate();
  return c;
}

Column Column::float64(std::vector<double> values, std::vector<uint8_t> validity) {
  Column c(Domain::Float64, values.size());
  c.doubles_ = std::move(values);
  c.validity_ = std::move(validity);
  c.validate();
  return c;
}

Column Column::boolean(std::vector<uint8_t> values, std::vector<uint8_t> validity) {
  Column c(Domain::Boolean, values.size());
  c.bytes_ = std::move(values);
  c.validity_ = std::move(validity);
  c.validate();
  return c;
}

Column Column::utf8(std::vector<int64_t> offsets, std::vector<uint8_t> data, std::vector<uint8_t> validity) {
  if (offsets.empty()) throw Error(ErrorCode::CorruptPayload, "utf8 offsets must hold at least one entry");
  Column c(Domain::Utf8, offsets.size() - 1);
  c.ints_ = std::move(offsets);
  c.bytes_ = std::move(data);
  c.validity_ = std::move(validity);
  c.validate();
  return c;
}

void Column::validate() const {
  if (validity_.size() != bits::bytes_for(length_)) {
    throw Error(ErrorCode::CorruptPayload, "validity bitmap does not cover column length");
  }
  switch (domain_) {
    case Domain::Int64:
      if (ints_.size() != length_) throw Error(ErrorCode::CorruptPayload, "int64 data length");
      break;
    case Domain::Float64:
      if (doubles_.size() != length_) throw Error(ErrorCode::CorruptPayload, "float64 data length");
      break;
    case Domain::Boolean:
      if (bytes_.size() != length_) throw Error(ErrorCode::CorruptPayload, "boolean data length");
      break;
    case Domain::Utf8: {
      if (ints_.size() != length_ + 1 || ints_.front() != 0) {
        throw Error(ErrorCode::CorruptPayload, "utf8 offsets");
      }
      for (std::size_t i = 0; i < length_; ++i) {
        if (ints_[i + 1] < ints_[i]) throw Error(ErrorCode::CorruptPayload, "utf8 offsets decrease");
      }
      if (static_cast<std::size_t>(ints_.back()) != bytes_.size()) {
        throw Error(ErrorCode::CorruptPayload, "utf8 final offset does not match data length");
      }
      break;
    }
  }
}

std::size_t Column::null_count() const {
  std::size_t valid = 0;
  for (std::size_t i = 0; i < length_; ++i) valid += is_valid(i);
  return length_ - valid;
}

Value Column::value_at(std::size_t i) const {
  if (i >= length_) throw Error(ErrorCode::OutOfBounds, "row " + std::to_string(i));
  if (!is_valid(i)) return std::monostate{};
  switch (domain_) {
    case Domain::Int64: return ints_[i];
    case Domain::Float64: return doubles_[i];
    case Domain::Boolean: return bool_at(i);
    case Domain::Utf8: return std::string(utf8_at(i));
  }
  return std::monostate{};
}

std::size_t Column::byte_size() const {
  return validity_.size() + ints_.size() * sizeof(int64_t) + doubles_.size() * sizeof(double) + bytes_.size();
}

bool operator==(const Column &a, const Column &b) {
  if (a.domain() != b.domain() || a.length() != b.length()) return false;
  for (std::size_t i = 0; i < a.length(); ++i) {
    bool va = a.is_valid(i);
    if (va != b.is_valid(i)) return false;
    if (!va) continue;
    switch (a.domain()) {
      case Domain::Int64:
        if (a.int64_at(i) != b.int64_at(i)) return false;
        break;
      case Domain::Float64: {
        double x = a.float64_at(i), y = b.float64_at(i);
        if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
        break;
      }
      case Domain::Boolean:
        if (a.bool_at(i) != b.bool_at(i)) return false;
        break;
      case Domain::Utf8:
        if (a.utf8_at(i) != b.utf8_at(i)) return false;
        break;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// ColumnBuilder

ColumnBuilder::ColumnBuilder(Domain domain, std::size_t reserve) : domain_(domain) {
  validity_.reserve(bits::bytes_for(reserve));
  switch (domain_) {
    case Domain::Int64: ints_.reserve(reserve); break;
    case Domain::Float64: doubles_.reserve(reserve); break;
    case Domain::Boolean: bytes_.reserve(reserve); break;
    case Domain::Utf8:
      ints_.reserve(reserve + 1);
      ints_.push_back(0);
      break;
  }
}

void ColumnBuilder::push_validity(bool valid) {
  if ((length_ & 7) == 0) validity_.push_back(0);
  if (valid) validity_.back() = static_cast<uint8_t>(validity_.back() | (1u << (length_ & 7)));
  ++length_;
}

void ColumnBuilder::append_null() {
  switch (domain_) {
    case Domain::Int64: ints_.push_back(0); break;
    case Domain::Float64: doubles_.push_back(0.0); break;
    case Domain::Boolean: bytes_.push_back(0); break;
    case Domain::Utf8: ints_.push_back(ints_.back()); break;
  }
  push_validity(false);
}

void ColumnBuilder::append(int64_t v) {
  if (domain_ != Domain::Int64) throw Error(ErrorCode::DomainMismatch, "int64 value in " + std::string(domain_name(domain_)) + " column");
  ints_.push_back(v);
  push_validity(true);
}

void ColumnBuilder::append(double v) {
  if (domain_ != Domain::Float64) throw Error(ErrorCode::DomainMismatch, "float64 value in " + std::string(domain_name(domain_)) + " column");
  doubles_.push_back(v);
  push_validity(true);
}

void ColumnBuilder::append(bool v) {
  if (domain_ != Domain::Boolean) throw Error(ErrorCode::DomainMismatch, "bool value in " + std::string(domain_name(domain_)) + " column");
  bytes_.push_back(v ? 1 : 0);
  push_validity(true);
}

void ColumnBuilder::append(std::string_view v) {
  if (domain_ != Domain::Utf8) throw Error(ErrorCode::DomainMismatch, "utf8 value in " + std::string(domain_name(domain_)) + " column");
  bytes_.insert(bytes_.end(), v.begin(), v.end());
  ints_.push_back(static_cast<int64_t>(bytes_.size()));
  push_validity(true);
}

void ColumnBuilder::append_value(const Value &v) {
  std::visit(
      [this](const auto &x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          append_null();
        } else if constexpr (std::is_same_v<T, std::string>) {
          append(std::string_view(x));
        } else {
          append(x);
        }
      },
      v);
}

void ColumnBuilder::append_from(const Column &src, std::size_t row) {
  if (src.domain() != domain_) throw Error(ErrorCode::DomainMismatch, "append_from across domains");
  if (!src.is_valid(row)) {
    append_null();
    return;
  }
  switch (domain_) {
    case Domain::Int64: append(src.int64_at(row)); break;
    case Domain::Float64: append(src.float64_at(row)); break;
    case Domain::Boolean: append(src.bool_at(row)); break;
    case Domain::Utf8: append(src.utf8_at(row)); break;
  }
}

Column ColumnBuilder::finish() && {
  Column c(domain_, length_);
  c.validity_ = std::move(validity_);
  c.ints_ = std::move(ints_);
  c.doubles_ = std::move(doubles_);
  c.bytes_ = std::move(bytes_);
  return c;
}

// ---------------------------------------------------------------------------
// Table

namespace {

std::vector<std::shared_ptr<const Column>> share(std::vector<Column> columns) {
  std::vector<std::shared_ptr<const Column>> out;
  out.reserve(columns.size());
  for (auto &c : columns) out.push_back(std::make_shared<const Column>(std::move(c)));
  return out;
}

}  // namespace

Table::Table(Schema schema, std::vector<Column> columns) : Table(std::move(schema), share(std::move(columns))) {}

Table::Table(Schema schema, std::vector<std::shared_ptr<const Column>> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  if (columns_.size() != schema_.num_columns()) {
    throw Error(ErrorCode::SchemaMismatch, "column count does not match schema");
  }
  num_rows_ = columns_.front()->length();
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i]->length() != num_rows_) {
      throw Error(ErrorCode::LengthMismatch, "column '" + schema_.field(i).name + "' has length " +
                                                 std::to_string(columns_[i]->length()) + ", expected " +
                                                 std::to_string(num_rows_));
    }
    if (columns_[i]->domain() != schema_.field(i).domain) {
      throw Error(ErrorCode::DomainMismatch, "column '" + schema_.field(i).name + "' domain differs from schema");
    }
  }
}

Table Table::empty(const Schema &schema) {
  std::vector<Column> cols;
  for (const auto &f : schema.fields()) cols.push_back(ColumnBuilder(f.domain).finish());
  return Table(schema, std::move(cols));
}

std::size_t Table::byte_size() const {
  std::size_t n = 0;
  for (const auto &c : columns_) n += c->byte_size();
  return n;
}

void Table::validate() const {
  if (columns_.size() != schema_.num_columns()) throw Error(ErrorCode::CorruptPayload, "column count");
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    columns_[i]->validate();
    if (columns_[i]->length() != num_rows_) throw Error(ErrorCode::CorruptPayload, "ragged columns");
    if (columns_[i]->domain() != schema_.field(i).domain) throw Error(ErrorCode::CorruptPayload, "domain");
  }
}

bool operator==(const Table &a, const Table &b) {
  if (!(a.schema() == b.schema()) || a.num_rows() != b.num_rows()) return false;
  for (std::size_t c = 0; c < a.num_columns(); ++c) {
    if (!(a.column(c) == b.column(c))) return false;
  }
  return true;
}

RowRef::RowRef(const Table &t, std::size_t r) : table(&t), row(r) {
  if (r >= t.num_rows()) throw Error(ErrorCode::OutOfBounds, "row " + std::to_string(r));
}

Table build_table(const Schema &schema, const std::vector<std::vector<Value>> &columns) {
  if (columns.size() != schema.num_columns()) {
    throw Error(ErrorCode::LengthMismatch, "expected " + std::to_string(schema.num_columns()) + " value lists");
  }
  const std::size_t n = columns.front().size();
  for (const auto &c : columns) {
    if (c.size() != n) throw Error(ErrorCode::LengthMismatch, "value lists differ in length");
  }
  std::vector<Column> out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    ColumnBuilder b(schema.field(i).domain, n);
    for (const auto &v : columns[i]) b.append_value(v);
    out.push_back(std::move(b).finish());
  }
  return Table(schema, std::move(out));
}

namespace {

std::vector<uint8_t> gather_validity(const Column &c, std::span<const std::size_t> idx) {
  std::vector<uint8_t> out(bits::bytes_for(idx.size()), 0);
  auto src = c.validity();
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] != kNullRow && bits::get(src, idx[j])) out[j >> 3] = static_cast<uint8_t>(out[j >> 3] | (1u << (j & 7)));
  }
  return out;
}

}  // namespace

Column take_column(const Column &c, std::span<const std::size_t> idx) {
  auto validity = gather_validity(c, idx);
  switch (c.domain()) {
    case Domain::Int64: {
      std::vector<int64_t> v(idx.size());
      auto src = c.int64_values();
      for (std::size_t j = 0; j < idx.size(); ++j) v[j] = idx[j] == kNullRow ? 0 : src[idx[j]];
      return Column::int64(std::move(v), std::move(validity));
    }
    case Domain::Float64: {
      std::vector<double> v(idx.size());
      auto src = c.float64_values();
      for (std::size_t j = 0; j < idx.size(); ++j) v[j] = idx[j] == kNullRow ? 0 : src[idx[j]];
      return Column::float64(std::move(v), std::move(validity));
    }
    case Domain::Boolean: {
      std::vector<uint8_t> v(idx.size());
      auto src = c.byte_values();
      for (std::size_t j = 0; j < idx.size(); ++j) v[j] = idx[j] == kNullRow ? 0 : src[idx[j]];
      return Column::boolean(std::move(v), std::move(validity));
    }
    case Domain::Utf8: {
      std::vector<int64_t> offsets(idx.size() + 1, 0);
      auto so = c.offsets();
      for (std::size_t j = 0; j < idx.size(); ++j) {
        offsets[j + 1] = offsets[j] + (idx[j] == kNullRow ? 0 : so[idx[j] + 1] - so[idx[j]]);
      }
      std::vector<uint8_t> data(static_cast<std::size_t>(offsets.back()));
      auto sd = c.byte_values();
      for (std::size_t j = 0; j < idx.size(); ++j) {
        auto len = static_cast<std::size_t>(offsets[j + 1] - offsets[j]);
        if (len) std::memcpy(data.data() + offsets[j], sd.data() + so[idx[j]], len);
      }
      return Column::utf8(std::move(offsets), std::move(data), std::move(validity));
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown domain");
}

Table take(const Table &t, std::span<const std::size_t> indices) {
  for (auto i : indices) {
    if (i >= t.num_rows()) {
      throw Error(ErrorCode::OutOfBounds, "index " + std::to_string(i) + " >= " + std::to_string(t.num_rows()));
    }
  }
  std::vector<Column> cols;
  cols.reserve(t.num_columns());
  for (std::size_t c = 0; c < t.num_columns(); ++c) cols.push_back(take_column(t.column(c), indices));
  return Table(t.schema(), std::move(cols));
}

Table slice(const Table &t, std::size_t start, std::size_t length) {
  if (start > t.num_rows() || length > t.num_rows() - start) {
    throw Error(ErrorCode::OutOfBounds, "slice [" + std::to_string(start) + ", +" + std::to_string(length) +
                                            ") of " + std::to_string(t.num_rows()) + " rows");
  }
  if (start == 0 && length == t.num_rows()) return t;
  std::vector<std::size_t> idx(length);
  std::iota(idx.begin(), idx.end(), start);
  return take(t, idx);
}

Table concat(const std::vector<Table> &parts, const std::optional<Schema> &schema) {
  if (parts.empty()) {
    if (!schema) throw Error(ErrorCode::InvalidArgument, "concat of zero tables needs a schema");
    return Table::empty(*schema);
  }
  const Schema &s = schema ? *schema : parts.front().schema();
  for (const auto &p : parts) {
    if (!(p.schema() == s)) throw Error(ErrorCode::SchemaMismatch, "concat of tables with different schemas");
  }
  if (parts.size() == 1) return parts.front();
  std::size_t total = 0;
  for (const auto &p : parts) total += p.num_rows();

  std::vector<Column> cols;
  for (std::size_t c = 0; c < s.num_columns(); ++c) {
    const Domain d = s.field(c).domain;
    std::vector<uint8_t> validity(bits::bytes_for(total), 0);
    std::size_t row = 0;
    for (const auto &p : parts) {
      const auto &src = p.column(c);
      for (std::size_t i = 0; i < src.length(); ++i, ++row) {
        if (src.is_valid(i)) validity[row >> 3] = static_cast<uint8_t>(validity[row >> 3] | (1u << (row & 7)));
      }
    }
    switch (d) {
      case Domain::Int64: {
        std::vector<int64_t> v;
        v.reserve(total);
        for (const auto &p : parts) {
          auto src = p.column(c).int64_values();
          v.insert(v.end(), src.begin(), src.end());
        }
        cols.push_back(Column::int64(std::move(v), std::move(validity)));
        break;
      }
      case Domain::Float64: {
        std::vector<double> v;
        v.reserve(total);
        for (const auto &p : parts) {
          auto src = p.column(c).float64_values();
          v.insert(v.end(), src.begin(), src.end());
        }
        cols.push_back(Column::float64(std::move(v), std::move(validity)));
        break;
      }
      case Domain::Boolean: {
        std::vector<uint8_t> v;
        v.reserve(total);
        for (const auto &p : parts) {
          auto src = p.column(c).byte_values();
          v.insert(v.end(), src.begin(), src.end());
        }
        cols.push_back(Column::boolean(std::move(v), std::move(validity)));
        break;
      }
      case Domain::Utf8: {
        std::vector<int64_t> offsets;
        offsets.reserve(total + 1);
        offsets.push_back(0);
        std::vector<uint8_t> data;
        for (const auto &p : parts) {
          const auto &src = p.column(c);
          const int64_t base = offsets.back();
          auto so = src.offsets();
          for (std::size_t i = 1; i < so.size(); ++i) offsets.push_back(base + so[i]);
          auto sd = src.byte_values();
          data.insert(data.end(), sd.begin(), sd.end());
        }
        cols.push_back(Column::utf8(std::move(offsets), std::move(data), std::move(validity)));
        break;
      }
    }
  }
  return Table(s, std::move(cols));
}

Table select_columns(const Table &t, std::span<const std::size_t> columns) {
  std::vector<Field> fields;
  std::vector<std::shared_ptr<const Column>> cols;
  for (auto c : columns) {
    fields.push_back(t.schema().field(c));
    cols.push_back(t.column_ptr(c));
  }
  return Table(Schema(std::move(fields)), std::move(cols));
}

namespace {

int compare_doubles(double x, double y) {
  const bool nx = std::isnan(x), ny = std::isnan(y);
  if (nx || ny) return nx == ny ? 0 : (nx ? 1 : -1);
  return x < y ? -1 : (y < x ? 1 : 0);
}

}  // namespace

int compare_cells(const Column &a, std::size_t i, const Column &b, std::size_t j) {
  const bool va = a.is_valid(i), vb = b.is_valid(j);
  if (!va || !vb) return va == vb ? 0 : (va ? -1 : 1);
  switch (a.domain()) {
    case Domain::Int64: {
      auto x = a.int64_at(i), y = b.int64_at(j);
      return x < y ? -1 : (y < x ? 1 : 0);
    }
    case Domain::Float64: return compare_doubles(a.float64_at(i), b.float64_at(j));
    case Domain::Boolean: return static_cast<int>(a.bool_at(i)) - static_cast<int>(b.bool_at(j));
    case Domain::Utf8: {
      int r = a.utf8_at(i).compare(b.utf8_at(j));
      return r < 0 ? -1 : (r > 0 ? 1 : 0);
    }
  }
  return 0;
}

Table canonicalize(const Table &t) {
  std::vector<std::size_t> idx(t.num_rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&t](std::size_t x, std::size_t y) {
    for (std::size_t c = 0; c < t.num_columns(); ++c) {
      int r = compare_cells(t.column(c), x, t.column(c), y);
      if (r != 0) return r < 0;
    }
    return false;
  });
  return take(t, idx);
}

std::string format_row(const Table &t, std::size_t row) {
  std::string out = "(";
  for (std::size_t c = 0; c < t.num_columns(); ++c) {
    if (c) out += ", ";
    out += t.schema().field(c).name + "=" + value_to_string(t.value_at(row, c));
  }
  return out + ")";
}

}  // namespace bspf
