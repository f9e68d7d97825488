#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "prbslice/error.hpp"

namespace prbslice::detail {

/// First line of every CSV the library writes.
inline void write_schema(std::ostream& out, std::string_view name, std::string_view version = "v1") {
    out << "# schema: prbslice." << name << ' ' << version << '\n';
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        out.emplace_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> line_numbers;
};

// Reads a comma-separated file. Blank lines and '#' comment lines are
// skipped; the first remaining line is the header and must match `expected`.
inline CsvTable read_csv(std::istream& in, const std::vector<std::string>& expected, std::string_view what) {
    CsvTable table;
    std::string line;
    int line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        auto view = trim(line);
        if (view.empty() || view.front() == '#') continue;
        auto fields = split_fields(view);
        if (!have_header) {
            if (fields != expected) {
                std::string want;
                for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
                throw ConfigError(std::string(what) + ": expected header '" + want + "' at line " +
                                  std::to_string(line_no));
            }
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != expected.size()) {
            throw ConfigError(std::string(what) + ": wrong field count at line " + std::to_string(line_no));
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_no);
    }
    if (!have_header) throw ConfigError(std::string(what) + ": missing header");
    return table;
}

template <typename T>
T parse_number(std::string_view text, std::string_view what, int line_no) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError(std::string(what) + ": cannot parse '" + std::string(text) + "' at line " +
                          std::to_string(line_no));
    }
    return value;
}

}  // namespace prbslice::detail
