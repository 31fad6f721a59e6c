#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dslap {

/// A small CSV reader for the files this project writes: optional leading
/// "# key=value ..." lines, one header line, then plain comma-separated rows
/// (no quoting).
struct CsvTable {
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position; throws std::runtime_error naming the missing column.
  std::size_t column(const std::string& name) const;
  double num(std::size_t row, const std::string& name) const;
  const std::string& str(std::size_t row, const std::string& name) const;
  double meta_num(const std::string& key) const;
};

std::vector<std::string> split_csv(const std::string& line);
CsvTable read_csv(std::istream& is);

}  // namespace dslap
