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

#include "bspf/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bspf/serialize.hpp"

namespace bspf::csv {

namespace {

struct Cell {
  std::string text;
  bool quoted = false;
};

std::vector<std::vector<Cell>> tokenize(std::string_view text, char delim) {
  std::vector<std::vector<Cell>> rows;
  std::vector<Cell> row;
  Cell cell;
  bool in_quotes = false;
  bool row_started = false;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.text.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        cell.text.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      if (!cell.text.empty() || cell.quoted) {
        throw Error(ErrorCode::MalformedCsv, "unexpected quote on line " + std::to_string(line));
      }
      in_quotes = true;
      cell.quoted = true;
      row_started = true;
    } else if (ch == delim) {
      row.push_back(std::move(cell));
      cell = {};
      row_started = true;
    } else if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      continue;
    } else if (ch == '\n') {
      // a blank line is a record with one null field
      row.push_back(std::move(cell));
      rows.push_back(std::move(row));
      cell = {};
      row = {};
      row_started = false;
      ++line;
    } else {
      if (cell.quoted) throw Error(ErrorCode::MalformedCsv, "text after closing quote on line " + std::to_string(line));
      cell.text.push_back(ch);
      row_started = true;
    }
  }
  if (in_quotes) throw Error(ErrorCode::MalformedCsv, "unterminated quoted field");
  if (row_started || !cell.text.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

bool parse_int(const std::string &s, int64_t &out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_double(const std::string &s, double &out) {
  if (s.empty()) return false;
  char *end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

bool parse_bool(const std::string &s, bool &out) {
  if (s == "true" || s == "True" || s == "TRUE") {
    out = true;
    return true;
  }
  if (s == "false" || s == "False" || s == "FALSE") {
    out = false;
    return true;
  }
  return false;
}

bool is_null(const Cell &c) { return c.text.empty() && !c.quoted; }

Domain infer(const std::vector<std::vector<Cell>> &rows, std::size_t col) {
  bool all_int = true, all_num = true, all_bool = true;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto &c = rows[r][col];
    if (is_null(c)) continue;
    int64_t i;
    double d;
    bool b;
    all_int = all_int && !c.quoted && parse_int(c.text, i);
    all_num = all_num && !c.quoted && parse_double(c.text, d);
    all_bool = all_bool && !c.quoted && parse_bool(c.text, b);
  }
  if (all_int) return Domain::Int64;
  if (all_num) return Domain::Float64;
  if (all_bool) return Domain::Boolean;
  return Domain::Utf8;
}

bool needs_quotes(std::string_view s, char delim) {
  if (s.empty()) return true;
  for (char ch : s) {
    if (ch == delim || ch == '"' || ch == '\n' || ch == '\r') return true;
  }
  return false;
}

void append_quoted(std::string &out, std::string_view s) {
  out.push_back('"');
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
}

}  // namespace

Table parse(std::string_view text, const ReadOptions &options) {
  auto rows = tokenize(text, options.delimiter);
  if (rows.empty()) throw Error(ErrorCode::MalformedCsv, "missing header row");
  const std::size_t m = rows.front().size();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != m) {
      throw Error(ErrorCode::MalformedCsv, "record " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                                               " fields, header has " + std::to_string(m));
    }
  }
  std::vector<Field> fields;
  for (std::size_t c = 0; c < m; ++c) {
    const auto &name = rows.front()[c].text;
    auto it = options.domains.find(name);
    fields.push_back({name, it != options.domains.end() ? it->second : infer(rows, c)});
  }
  Schema schema = [&] {
    try {
      return Schema(fields);
    } catch (const Error &e) {
      throw Error(ErrorCode::MalformedCsv, e.what());
    }
  }();

  std::vector<Column> columns;
  for (std::size_t c = 0; c < m; ++c) {
    ColumnBuilder b(fields[c].domain, rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto &cell = rows[r][c];
      if (is_null(cell)) {
        b.append_null();
        continue;
      }
      bool ok = true;
      switch (fields[c].domain) {
        case Domain::Int64: {
          int64_t v;
          ok = parse_int(cell.text, v);
          if (ok) b.append(v);
          break;
        }
        case Domain::Float64: {
          double v;
          ok = parse_double(cell.text, v);
          if (ok) b.append(v);
          break;
        }
        case Domain::Boolean: {
          bool v;
          ok = parse_bool(cell.text, v);
          if (ok) b.append(v);
          break;
        }
        case Domain::Utf8: b.append(std::string_view(cell.text)); break;
      }
      if (!ok) {
        throw Error(ErrorCode::MalformedCsv, "value '" + cell.text + "' in column '" + fields[c].name + "' is not " +
                                                 std::string(domain_name(fields[c].domain)));
      }
    }
    columns.push_back(std::move(b).finish());
  }
  return Table(std::move(schema), std::move(columns));
}

Table read(const std::filesystem::path &path, const ReadOptions &options) {
  auto bytes = read_file_bytes(path);
  return parse({reinterpret_cast<const char *>(bytes.data()), bytes.size()}, options);
}

std::string format(const Table &t, char delimiter) {
  std::string out;
  for (std::size_t c = 0; c < t.num_columns(); ++c) {
    if (c) out.push_back(delimiter);
    const auto &name = t.schema().field(c).name;
    if (needs_quotes(name, delimiter)) {
      append_quoted(out, name);
    } else {
      out += name;
    }
  }
  out.push_back('\n');
  char buf[64];
  for (std::size_t r = 0; r < t.num_rows(); ++r) {
    for (std::size_t c = 0; c < t.num_columns(); ++c) {
      if (c) out.push_back(delimiter);
      const auto &col = t.column(c);
      if (!col.is_valid(r)) continue;
      switch (col.domain()) {
        case Domain::Int64: {
          auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), col.int64_at(r));
          out.append(buf, p);
          break;
        }
        case Domain::Float64: {
          std::snprintf(buf, sizeof(buf), "%.17g", col.float64_at(r));
          out += buf;
          break;
        }
        case Domain::Boolean: out += col.bool_at(r) ? "true" : "false"; break;
        case Domain::Utf8: {
          auto s = col.utf8_at(r);
          if (needs_quotes(s, delimiter)) {
            append_quoted(out, s);
          } else {
            out += s;
          }
          break;
        }
      }
    }
    out.push_back('\n');
  }
  return out;
}

void write(const std::filesystem::path &path, const Table &t, char delimiter) {
  auto text = format(t, delimiter);
  write_file_bytes(path, {reinterpret_cast<const uint8_t *>(text.data()), text.size()});
}

}  // namespace bspf::csv
