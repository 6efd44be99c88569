#pragma once

#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace bugseg::csv {

// Minimal RFC 4180 reader/writer: comma separated, double-quoted fields with
// "" escapes, embedded newlines allowed inside quotes. Lines starting with '#'
// before the header are treated as comments and returned separately.
struct Table {
    std::vector<std::string> comments;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_lines; // 1-based source line of each row

    // Index of a header column; throws ParseError if absent.
    std::size_t column(std::string_view name) const;
    bool has_column(std::string_view name) const;
};

Table parse(std::string_view text);
Table read_file(const std::filesystem::path& path);

// Requires every column in `required` to be present.
void require_columns(const Table& table, std::initializer_list<std::string_view> required,
                     std::string_view what);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Shortest round-trip decimal form of a double.
std::string format_double(double value);
double parse_double(std::string_view text, std::size_t line, std::string_view what);
long long parse_int(std::string_view text, std::size_t line, std::string_view what);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

} // namespace bugseg::csv
