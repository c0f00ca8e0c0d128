#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <variant>
#include <vector>

#include "ddpb/error.hpp"

namespace ddpb {

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

/// A results table with a fixed column order. Cells are stored in their
/// rendered CSV form so a written table reads back identically.
class Table {
 public:
  using Cell = std::variant<double, long long, std::string>;

  Table() = default;
  explicit Table(std::vector<std::string> columns);

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  void add_row(std::initializer_list<Cell> cells);
  void add_row(const std::vector<Cell>& cells);

  std::size_t column_index(const std::string& name) const;
  double number(std::size_t row, const std::string& column) const;
  const std::string& text(std::size_t row, const std::string& column) const;

  bool operator==(const Table&) const = default;

  static std::string render(const Cell& cell);

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
  friend Table read_csv(const std::filesystem::path&,
                        const std::vector<std::string>&);
};

namespace schema {
inline const std::vector<std::string> kToyFig1 = {
    "alpha", "m", "c_of_j", "r_bar", "lower", "upper", "mc_kl", "mc_kl_stderr"};
inline const std::vector<std::string> kL2Sweep = {"alpha", "seed", "d_prefix",
                                                  "d_ghost"};
inline const std::vector<std::string> kBoundSweep = {
    "alpha", "seed", "epsilon", "sigma_p", "t",
    "kl",    "gibbs_risk", "bound", "test_error"};
inline const std::vector<std::string> kDirectOpt = {
    "alpha", "seed", "step", "surrogate_bound", "final_bound", "test_error"};
inline const std::vector<std::string> kOracleVariance = {
    "alpha", "seed", "sigma_p", "isotropic_kl", "oracle_kl",
    "isotropic_bound", "oracle_bound"};
inline const std::vector<std::string> kScatter = {"alpha", "seed", "index",
                                                  "w_base", "w_prefix"};
}  // namespace schema

/// Writes `table` as CSV with a header row.
void write_csv(const std::filesystem::path& path, const Table& table);

/// Reads a CSV and checks that every expected column is present; columns are
/// reordered to `expected`. An empty `expected` accepts the file's header.
Table read_csv(const std::filesystem::path& path,
               const std::vector<std::string>& expected = {});

/// Stable 64-bit FNV-1a hash rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

/// Version string baked in at build time.
std::string code_version();

}  // namespace ddpb
