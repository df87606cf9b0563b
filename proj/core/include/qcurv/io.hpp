#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace qcurv {

// Shortest round-trip safe rendering with 17 significant digits.
std::string format_double(double x);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add_row(std::vector<std::string> row);
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Throws ConfigError on unreadable or malformed JSON.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace qcurv
