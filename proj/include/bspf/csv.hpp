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

#ifndef BSPF_CSV_HPP
#define BSPF_CSV_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "bspf/table.hpp"

namespace bspf::csv {

struct ReadOptions {
  /// Domain per column name; columns not listed are inferred from their values
  /// (int64, then float64, then bool, else utf8).
  std::map<std::string, Domain> domains;
  char delimiter = ',';
};

/// Header row required. An empty unquoted field is null; a quoted empty field
/// ("") is an empty string.
Table parse(std::string_view text, const ReadOptions &options = {});
Table read(const std::filesystem::path &path, const ReadOptions &options = {});

std::string format(const Table &t, char delimiter = ',');
void write(const std::filesystem::path &path, const Table &t, char delimiter = ',');

}  // namespace bspf::csv

#endif  // BSPF_CSV_HPP
