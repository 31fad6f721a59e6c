#include "dslap/csv.hpp"

#include <istream>
#include <sstream>
#include <stdexcept>

namespace dslap {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string kv;
      while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq != std::string::npos) t.meta[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      continue;
    }
    if (t.header.empty()) {
      t.header = split_csv(line);
      continue;
    }
    t.rows.push_back(split_csv(line));
    if (t.rows.back().size() != t.header.size())
      throw std::runtime_error("csv: row " + std::to_string(t.rows.size()) + " has " +
                               std::to_string(t.rows.back().size()) + " cells, header has " +
                               std::to_string(t.header.size()));
  }
  return t;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw std::runtime_error("csv: missing column '" + name + "'");
}

const std::string& CsvTable::str(std::size_t row, const std::string& name) const { return rows.at(row)[column(name)]; }

double CsvTable::num(std::size_t row, const std::string& name) const {
  const std::string& s = str(row, name);
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw std::runtime_error("csv: column '" + name + "' row " + std::to_string(row + 1) + " is not a number: " + s);
  }
}

double CsvTable::meta_num(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw std::runtime_error("csv: missing '# " + key + "=' line");
  return std::stod(it->second);
}

}  // namespace dslap
