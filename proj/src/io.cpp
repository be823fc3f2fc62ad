#include "stockdp/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stockdp/config.hpp"

namespace stockdp {

namespace fs = std::filesystem;
using json = nlohmann::json;

Format parse_format(const std::string& name) {
  if (name == "csv") return Format::Csv;
  if (name == "jsonl") return Format::Jsonl;
  throw std::invalid_argument("unknown output format \"" + name + "\" (expected csv or jsonl)");
}

std::string extension(Format f) { return f == Format::Csv ? "csv" : "jsonl"; }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  if (s == "nan") return std::nan("");
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: \"" + s + "\"");
  }
  if (used != s.size()) throw std::invalid_argument("not a number: \"" + s + "\"");
  return v;
}

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw std::invalid_argument("row width does not match the header");
  rows.push_back(std::move(row));
}

namespace {

std::string cell_text(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

json cell_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    if (std::isfinite(*d)) return json::parse(format_double(*d));
    return format_double(*d);
  }
  if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
  return std::get<std::string>(c);
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::uint64_t parse_hex(const std::string& s) {
  if (s.size() != 18 || s.rfind("0x", 0) != 0) throw ArtifactError("malformed hash \"" + s + "\"");
  return std::stoull(s.substr(2), nullptr, 16);
}

}  // namespace

std::string render(const Table& table, std::uint64_t config_hash, Format format) {
  std::string body;
  if (format == Format::Csv) {
    for (std::size_t k = 0; k < table.columns.size(); ++k) body += (k ? "," : "") + csv_quote(table.columns[k]);
    body += "\n";
    for (const auto& row : table.rows) {
      for (std::size_t k = 0; k < row.size(); ++k) body += (k ? "," : "") + csv_quote(cell_text(row[k]));
      body += "\n";
    }
    return "# config_hash=" + hex64(config_hash) + "; checksum=" + hex64(fnv1a64(body)) + "\n" + body;
  }
  for (const auto& row : table.rows) {
    // Ordered object so fields follow the header order.
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < row.size(); ++k) obj[table.columns[k]] = cell_json(row[k]);
    body += obj.dump() + "\n";
  }
  nlohmann::ordered_json meta = {{"checksum", hex64(fnv1a64(body))},
                                 {"columns", table.columns},
                                 {"config_hash", hex64(config_hash)}};
  return meta.dump() + "\n" + body;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string write_table(const std::string& dir, const std::string& name, const Table& table,
                        std::uint64_t config_hash, Format format) {
  const std::string path = (fs::path(dir) / (name + "." + extension(format))).string();
  write_file_atomic(path, render(table, config_hash, format));
  return path;
}

std::size_t LoadedTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < columns.size(); ++k)
    if (columns[k] == name) return k;
  throw ArtifactError("artifact has no column \"" + name + "\"");
}

LoadedTable read_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError(path + ": artifact not found");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const std::size_t nl = text.find('\n');
  if (nl == std::string::npos) throw ArtifactError(path + ": missing metadata line");
  const std::string meta = text.substr(0, nl);
  const std::string body = text.substr(nl + 1);

  LoadedTable t;
  std::uint64_t checksum = 0;
  const bool jsonl = fs::path(path).extension() == ".jsonl";
  try {
    if (jsonl) {
      const json m = json::parse(meta);
      checksum = parse_hex(m.at("checksum").get<std::string>());
      t.config_hash = parse_hex(m.at("config_hash").get<std::string>());
      t.columns = m.at("columns").get<std::vector<std::string>>();
    } else {
      const std::string a = "# config_hash=";
      const std::string b = "; checksum=";
      const std::size_t at_b = meta.find(b);
      if (meta.rfind(a, 0) != 0 || at_b == std::string::npos) throw ArtifactError("malformed metadata line");
      t.config_hash = parse_hex(meta.substr(a.size(), at_b - a.size()));
      checksum = parse_hex(meta.substr(at_b + b.size()));
    }
  } catch (const ArtifactError& e) {
    throw ArtifactError(path + ": " + e.what());
  } catch (const std::exception& e) {
    throw ArtifactError(path + ": malformed metadata line");
  }
  if (fnv1a64(body) != checksum) throw ArtifactError(path + ": checksum mismatch (artifact corrupted)");

  std::istringstream lines(body);
  std::string line;
  bool header = !jsonl;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    if (header) {
      t.columns = split_csv_line(line);
      header = false;
      continue;
    }
    if (!jsonl) {
      auto cells = split_csv_line(line);
      if (cells.size() != t.columns.size()) throw ArtifactError(path + ": row width does not match header");
      t.rows.push_back(std::move(cells));
      continue;
    }
    const json obj = json::parse(line);
    std::vector<std::string> cells;
    for (const auto& c : t.columns) {
      const json& v = obj.at(c);
      if (v.is_string())
        cells.push_back(v.get<std::string>());
      else if (v.is_number_integer())
        cells.push_back(std::to_string(v.get<std::int64_t>()));
      else
        cells.push_back(format_double(v.get<double>()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

PolicyTable read_policy_table(const std::string& path, const Grid& grid) {
  const LoadedTable t = read_table(path);
  const std::size_t cx = t.column("x");
  const std::size_t ca = t.column("order");
  if (t.rows.size() != grid.size()) throw ArtifactError(path + ": policy does not cover the configured grid");
  std::vector<std::int64_t> steps(grid.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto idx = grid.index_of(parse_double(t.rows[i][cx]));
    const auto k = grid.steps(parse_double(t.rows[i][ca]));
    if (!idx || static_cast<std::size_t>(*idx) != i || !k || *k < 0)
      throw ArtifactError(path + ": row " + std::to_string(i + 1) + " is off the configured grid");
    steps[i] = *k;
  }
  return PolicyTable(grid, std::move(steps));
}

}  // namespace stockdp
