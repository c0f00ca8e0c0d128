#include "ddpb/results.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "ddpb/rng.hpp"

#ifndef DDPB_GIT_DESCRIBE
#define DDPB_GIT_DESCRIBE "unknown"
#endif

namespace ddpb {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Table::Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

std::string Table::render(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), *d);
    return {buf, res.ptr};
  }
  if (const auto* i = std::get_if<long long>(&cell)) return std::to_string(*i);
  const auto& s = std::get<std::string>(cell);
  if (s.find_first_of(",\n\"") != std::string::npos) {
    throw std::invalid_argument("CSV text cells may not contain , \" or newline");
  }
  return s;
}

void Table::add_row(std::initializer_list<Cell> cells) {
  add_row(std::vector<Cell>(cells));
}

void Table::add_row(const std::vector<Cell>& cells) {
  if (cells.size() != columns_.size()) {
    throw std::invalid_argument("row width does not match column count");
  }
  std::vector<std::string> row;
  row.reserve(cells.size());
  for (const auto& c : cells) row.push_back(render(c));
  rows_.push_back(std::move(row));
}

std::size_t Table::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i] == name) return i;
  }
  throw SchemaError("missing column '" + name + "'");
}

double Table::number(std::size_t row, const std::string& column) const {
  const std::string& s = text(row, column);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw SchemaError("column '" + column + "' holds non-numeric value '" + s + "'");
  }
  return v;
}

const std::string& Table::text(std::size_t row, const std::string& column) const {
  return rows_.at(row).at(column_index(column));
}

void write_csv(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < table.columns().size(); ++i) {
    out << (i ? "," : "") << table.columns()[i];
  }
  out << '\n';
  for (const auto& row : table.rows()) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

Table read_csv(const std::filesystem::path& path,
               const std::vector<std::string>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": empty CSV");
  const auto header = split_csv_line(line);
  const std::vector<std::string>& cols = expected.empty() ? header : expected;

  std::vector<std::size_t> source;
  for (const auto& name : cols) {
    std::size_t found = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) found = i;
    }
    if (found == header.size()) {
      throw SchemaError(path.string() + ": missing column '" + name + "'");
    }
    source.push_back(found);
  }

  Table table(cols);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw SchemaError(path.string() + ": ragged row");
    }
    std::vector<std::string> row;
    for (std::size_t s : source) row.push_back(cells[s]);
    table.rows_.push_back(std::move(row));
  }
  return table;
}

std::string fnv1a_hex(const std::string& text) {
  const std::uint64_t h = tag_hash(text);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string code_version() { return DDPB_GIT_DESCRIBE; }

}  // namespace ddpb
