#pragma once

// Tabular artifacts. Every file starts with a metadata line carrying the
// config hash and a checksum of the remaining bytes:
//
//   csv:   # config_hash=0x...; checksum=0x...
//          header row, then one row per record
//   jsonl: {"checksum":"0x...","columns":[...],"config_hash":"0x..."}
//          one JSON object per record
//
// Doubles are written with 17 significant digits; infinities as "inf".

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "stockdp/grid.hpp"

namespace stockdp {

/// Missing, unreadable or corrupted artifact.
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Format { Csv, Jsonl };
Format parse_format(const std::string& name);
std::string extension(Format f);

std::string format_double(double v);
/// Inverse of format_double; accepts "inf", "-inf", "nan".
double parse_double(const std::string& s);

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  void add(std::vector<Cell> row);
};

std::string render(const Table& table, std::uint64_t config_hash, Format format);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

/// Writes `<dir>/<name>.<ext>` and returns its path. Creates dir if needed.
std::string write_table(const std::string& dir, const std::string& name, const Table& table,
                        std::uint64_t config_hash, Format format);

struct LoadedTable {
  std::uint64_t config_hash = 0;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;  ///< cells as text
  std::size_t column(const std::string& name) const;
};

/// Reads either format (by extension) and verifies the checksum.
LoadedTable read_table(const std::string& path);

/// Reads a policy artifact (columns x, order) laid out on `grid`.
PolicyTable read_policy_table(const std::string& path, const Grid& grid);

}  // namespace stockdp
