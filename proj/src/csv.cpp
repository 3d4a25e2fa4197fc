#include "ecotrain/csv.hpp"

#include <fstream>
#include <sstream>

#include "ecotrain/error.hpp"
#include "ecotrain/text.hpp"

namespace ecotrain {

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ParseError(source, 1, "missing column '" + name + "'");
}

const std::string& CsvTable::at(const CsvRow& row, const std::string& name) const {
    const auto i = column(name);
    if (i >= row.fields.size()) throw ParseError(source, row.line, "missing field '" + name + "'");
    return row.fields[i];
}

double CsvTable::number(const CsvRow& row, const std::string& name) const {
    auto v = parse_double(trim(at(row, name)));
    if (!v) throw ParseError(source, row.line, "field '" + name + "' is not a number: '" + at(row, name) + "'");
    return *v;
}

long long CsvTable::integer(const CsvRow& row, const std::string& name) const {
    auto v = parse_int(trim(at(row, name)));
    if (!v) throw ParseError(source, row.line, "field '" + name + "' is not an integer: '" + at(row, name) + "'");
    return *v;
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
    CsvTable table;
    table.source = source;
    std::vector<std::string> fields;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;
    std::size_t line = 1;
    std::size_t row_line = 1;

    auto end_row = [&] {
        fields.push_back(std::move(field));
        field.clear();
        if (row_has_content || fields.size() > 1 || !fields.front().empty()) {
            if (table.header.empty()) {
                table.header = std::move(fields);
                if (!table.header.empty() && table.header[0].rfind("\xEF\xBB\xBF", 0) == 0) {
                    table.header[0].erase(0, 3);
                }
            } else {
                if (fields.size() != table.header.size()) {
                    throw ParseError(source, row_line,
                                     "expected " + std::to_string(table.header.size()) + " fields, got " +
                                         std::to_string(fields.size()));
                }
                table.rows.push_back({row_line, std::move(fields)});
            }
        }
        fields.clear();
        row_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                row_has_content = true;
                break;
            case ',':
                fields.push_back(std::move(field));
                field.clear();
                row_has_content = true;
                break;
            case '\r':
                break;
            case '\n':
                end_row();
                ++line;
                row_line = line;
                break;
            default:
                field.push_back(c);
                row_has_content = true;
        }
    }
    if (in_quotes) throw ParseError(source, row_line, "unterminated quoted field");
    if (row_has_content || !field.empty()) end_row();
    if (table.header.empty()) throw ParseError(source, 1, "empty CSV");
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path.string());
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string csv_line(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += csv_escape(fields[i]);
    }
    out.push_back('\n');
    return out;
}

}  // namespace ecotrain
