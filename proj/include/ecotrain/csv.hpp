#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ecotrain {

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF. Rows keep
/// their one-based line number for diagnostics.
struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<CsvRow> rows;

    /// Index of a header column; throws ParseError naming the source.
    std::size_t column(const std::string& name) const;
    const std::string& at(const CsvRow& row, const std::string& name) const;
    double number(const CsvRow& row, const std::string& name) const;
    long long integer(const CsvRow& row, const std::string& name) const;
};

CsvTable parse_csv(const std::string& text, const std::string& source);
CsvTable read_csv(const std::filesystem::path& path);

std::string csv_escape(const std::string& field);
std::string csv_line(const std::vector<std::string>& fields);

}  // namespace ecotrain
