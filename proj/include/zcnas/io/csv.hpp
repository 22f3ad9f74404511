#pragma once

#include <string>
#include <vector>

namespace zc {

// RFC 4180 quoting for fields containing commas, quotes or newlines.
std::string csv_escape(const std::string& field);
// Fixed 6-digit precision; "--" for non-finite values.
std::string csv_number(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  // Throws Error when the row width differs from the header.
  void add_row(std::vector<std::string> row);
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Splits one CSV line, honouring quotes.
std::vector<std::string> csv_split(const std::string& line);

}  // namespace zc
