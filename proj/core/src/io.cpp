#include "qcurv/io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

#include "qcurv/errors.hpp"

namespace qcurv {

std::string format_double(double x) { return fmt::format("{:.17g}", x); }

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<std::string> row) {
  require(row.size() == header_.size(), "CSV row width does not match header");
  rows_.push_back(std::move(row));
}

namespace {
void append_line(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  out += '\n';
}
}  // namespace

std::string CsvTable::str() const {
  std::string out;
  append_line(out, header_);
  for (const auto& row : rows_) append_line(out, row);
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const { write_text_file(path, str()); }

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

}  // namespace qcurv
