#ifndef LCS_CSV_HPP
#define LCS_CSV_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lcs::csv {

/// Splits one comma-separated line. Double-quoted fields may contain commas;
/// a doubled quote inside quotes is a literal quote.
std::vector<std::string> split_line(std::string_view line);

/// In-memory table. Lines starting with '#' (provenance blocks) and blank lines are skipped.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    /// 1-based source line number of each row, for error messages.
    std::vector<std::size_t> line_numbers;

    std::optional<std::size_t> column(std::string_view name) const;
};

Table read(std::istream& in);
Table read_file(const std::string& path);

/// Quotes a field if it contains a comma, quote or newline.
std::string escape(std::string_view field);
/// Shortest representation that parses back to the same double.
std::string format_double(double v);

std::optional<double> parse_double(std::string_view text);

} // namespace lcs::csv

#endif // LCS_CSV_HPP
