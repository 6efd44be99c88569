#include "bugseg/csv.hpp"

#include "bugseg/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace bugseg::csv {

std::size_t Table::column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw ParseError("missing column '" + std::string(name) + "'", 1 + comments.size());
    }
    return static_cast<std::size_t>(it - header.begin());
}

bool Table::has_column(std::string_view name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
}

namespace {

// Splits one logical record starting at `pos`. Advances `pos` and `line`.
std::vector<std::string> next_record(std::string_view text, std::size_t& pos, std::size_t& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool field_was_quoted = false;
    const std::size_t start_line = line;
    while (pos < text.size()) {
        char c = text[pos++];
        if (quoted) {
            if (c == '"') {
                if (pos < text.size() && text[pos] == '"') {
                    field.push_back('"');
                    ++pos;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && field.empty() && !field_was_quoted) {
            quoted = true;
            field_was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            field_was_quoted = false;
        } else if (c == '\r') {
            // tolerated before '\n'
        } else if (c == '\n') {
            ++line;
            fields.push_back(std::move(field));
            return fields;
        } else {
            field.push_back(c);
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", start_line);
    fields.push_back(std::move(field));
    return fields;
}

} // namespace

Table parse(std::string_view text) {
    Table table;
    std::size_t pos = 0;
    std::size_t line = 1;
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;

    while (pos < text.size() && text[pos] == '#') {
        auto eol = text.find('\n', pos);
        std::string_view comment = text.substr(pos + 1, eol == std::string_view::npos ? text.npos : eol - pos - 1);
        if (!comment.empty() && comment.back() == '\r') comment.remove_suffix(1);
        table.comments.emplace_back(comment);
        pos = eol == std::string_view::npos ? text.size() : eol + 1;
        ++line;
    }
    if (pos >= text.size()) return table;
    table.header = next_record(text, pos, line);

    while (pos < text.size()) {
        const std::size_t row_line = line;
        auto record = next_record(text, pos, line);
        if (record.size() == 1 && record[0].empty()) continue; // blank line
        if (record.size() != table.header.size()) {
            throw ParseError("expected " + std::to_string(table.header.size()) + " fields, found " +
                                 std::to_string(record.size()),
                             row_line);
        }
        table.rows.push_back(std::move(record));
        table.row_lines.push_back(row_line);
    }
    return table;
}

Table read_file(const std::filesystem::path& path) {
    try {
        return parse(read_text_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
}

void require_columns(const Table& table, std::initializer_list<std::string_view> required,
                     std::string_view what) {
    for (auto name : required) {
        if (!table.has_column(name)) {
            throw ParseError(std::string(what) + ": missing column '" + std::string(name) + "'",
                             1 + table.comments.size());
        }
    }
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << escape(fields[i]);
    }
    out << '\n';
}

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::size_t line, std::string_view what) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
    double value = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(value)) {
        throw ParseError("invalid " + std::string(what) + " '" + std::string(text) + "'", line);
    }
    return value;
}

long long parse_int(std::string_view text, std::size_t line, std::string_view what) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    long long value = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ParseError("invalid " + std::string(what) + " '" + std::string(text) + "'", line);
    }
    return value;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << contents;
    if (!out) throw DataError("write failed for " + path.string());
}

} // namespace bugseg::csv
