#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace isac {

/// 17 significant digits, '.' decimal; round-trips every finite double.
std::string format_double(double v);
double parse_double_field(const std::string& text, const std::string& field);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  ///< -1 when absent
    std::string to_string() const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);
void write_csv(const CsvTable& table, const std::filesystem::path& path);

}  // namespace isac
