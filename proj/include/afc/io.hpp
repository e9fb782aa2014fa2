// Copyright 2026 The afcdepth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AFC_IO_HPP
#define AFC_IO_HPP

// Small text-format helpers shared by the file loaders and the command-line
// tool: key-value configs, numeric CSV tables, content hashing and
// deterministic number formatting.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace afc {

std::string read_text_file(const std::string& path);
/// Writes `content`, creating parent directories as needed.
void write_text_file(const std::string& path, const std::string& content);

/// `key = value` (or `key: value`) lines; `#` starts a comment. Duplicate or
/// malformed lines throw ConfigError.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::string& path);

  bool has(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws ConfigError if absent.
  std::size_t column(const std::string& name) const;
};

/// Parses a numeric CSV. Lines starting with `#` are skipped; a first row
/// that does not parse as numbers becomes the header.
CsvTable parse_numeric_csv(std::string_view text);
CsvTable load_numeric_csv(const std::string& path);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

struct Provenance {
  std::string tool;
  std::string version;
  std::string command;
  std::string input_hash;
  std::vector<std::pair<std::string, std::string>> config;
};

/// Comment block (`# key: value` lines) placed at the top of CSV outputs.
std::string provenance_header(const Provenance& p);

}  // namespace afc

#endif  // AFC_IO_HPP
