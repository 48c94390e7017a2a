#include "hyperpredict/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "hyperpredict/errors.hpp"

namespace hyperpredict {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_number(const std::string& s) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw DataError("not a number: '" + s + "'");
    }
    return v;
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

const std::string& CsvTable::at(std::size_t row, const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw DataError("CSV column '" + name + "' missing");
    return rows.at(row).at(static_cast<std::size_t>(c));
}

double CsvTable::number(std::size_t row, const std::string& name) const {
    return parse_number(at(row, name));
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& fields, char sep) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) out += sep;
        out += fields[i];
    }
    return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw DataError(path.string() + ": empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.header = split(line);
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        // Writers terminate every line, so an unterminated final line is a
        // partial write from an interrupted run and is dropped.
        if (is.eof()) break;
        auto fields = split(line);
        if (fields.size() != t.header.size()) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": wrong field count");
        }
        t.rows.push_back(std::move(fields));
    }
    return t;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw DataError("cannot write " + tmp.string());
        os << join(table.header) << '\n';
        for (const auto& row : table.rows) os << join(row) << '\n';
        if (!os) throw DataError("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace hyperpredict
