#ifndef PANELGUARD_CSV_HPP
#define PANELGUARD_CSV_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace panelguard::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    /// 1-based line number of each row in the source, for error messages.
    std::vector<std::size_t> line_numbers;

    /// Index of a header column, or nullopt when absent.
    std::optional<std::size_t> column(std::string_view name) const;
    std::size_t require_column(std::string_view name) const;
};

/// Reads comma-separated text with a mandatory header row. Double-quoted
/// fields may contain commas, quotes ("") and newlines. A UTF-8 BOM is skipped.
Table read(std::istream& in);
Table read_string(std::string_view text);

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Strict decimal parse of a whole field (surrounding blanks allowed).
std::optional<double> parse_number(std::string_view field);

/// Shortest representation that round-trips to the same double.
std::string format_number(double value);

}  // namespace panelguard::csv

#endif
