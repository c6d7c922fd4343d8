// csv.hpp - RFC 4180 CSV reader (header row, quoted fields, CRLF tolerant)
#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "errag/common.hpp"

namespace errag {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Parses CSV text. Fields may be quoted with `"`; embedded quotes are
/// doubled (`""`). Records are separated by LF or CRLF; quoted fields may
/// span lines. Every row must have exactly as many fields as the header.
inline CsvTable parse_csv(std::string_view text) {
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    CsvTable table;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_started = false;

    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        if (table.header.empty()) {
            table.header = std::move(row);
        } else {
            if (row.size() != table.header.size())
                throw Error(Errc::IoError,
                            "CSV row " + std::to_string(table.rows.size() + 2) + " has " +
                                std::to_string(row.size()) + " fields, header has " +
                                std::to_string(table.header.size()));
            table.rows.push_back(std::move(row));
        }
        row.clear();
        row_started = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                row_started = true;
                break;
            case ',':
                end_field();
                row_started = true;
                break;
            case '\r':
                break;
            case '\n':
                if (row_started || !field.empty() || !row.empty()) end_row();
                break;
            default:
                field.push_back(c);
                row_started = true;
        }
    }
    if (in_quotes) throw Error(Errc::IoError, "CSV ends inside a quoted field");
    if (row_started || !field.empty() || !row.empty()) end_row();
    if (table.header.empty()) throw Error(Errc::IoError, "CSV has no header row");
    return table;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(Errc::IoError, "short write to '" + path + "'");
}

}  // namespace errag
