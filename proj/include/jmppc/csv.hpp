#pragma once

#include <string>
#include <vector>

namespace jmppc {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // column index by name, -1 when absent
  int col(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

// 17 significant digits, enough to round-trip a double exactly
std::string format_g17(double x);

double parse_double(const std::string& s, const std::string& context);
long parse_long(const std::string& s, const std::string& context);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace jmppc
