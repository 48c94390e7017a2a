#pragma once

// Minimal CSV reading/writing for the pipeline's interchange files. Fields
// never contain commas or quotes, so no quoting is performed.

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace hyperpredict {

// Shortest decimal form that round-trips exactly.
std::string format_number(double v);
double parse_number(const std::string& s);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] int column(const std::string& name) const;  // -1 when absent
    [[nodiscard]] const std::string& at(std::size_t row, const std::string& name) const;
    [[nodiscard]] double number(std::size_t row, const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

std::string join(const std::vector<std::string>& fields, char sep = ',');
std::vector<std::string> split(const std::string& line, char sep = ',');

}  // namespace hyperpredict
