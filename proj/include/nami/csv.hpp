#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nami {

/// A CSV file held as text cells. Quoted fields follow RFC 4180.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position by name; -1 when absent.
  int column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);
std::string format_csv(const CsvTable& table);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);
/// Parses a full cell as a double; false if any character is left over.
bool parse_double(std::string_view cell, double& out);

/// Writes through a temporary file in the same directory and renames it over
/// `path`, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
/// Same, gzip-compressed.
void write_gzip_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_gzip(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

}  // namespace nami
