#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nrp::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column, or nullopt.
    std::optional<std::size_t> column(std::string_view name) const;
};

/// Parses RFC 4180 style text: comma separated, double-quote escaping, LF or CRLF.
Table parse(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

Table read(const std::filesystem::path& path);

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

void append_row(std::string& out, const std::vector<std::string>& fields);

/// Shortest round-trip text for a double; empty for nullopt.
std::string format_number(double value);
std::string format_optional(const std::optional<double>& value);

} // namespace nrp::csv
