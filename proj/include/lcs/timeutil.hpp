#ifndef LCS_TIMEUTIL_HPP
#define LCS_TIMEUTIL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace lcs {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

enum class Window { sec5, min1, hour1 };

/// Window length in seconds.
constexpr std::int64_t window_seconds(Window w)
{
    switch (w) {
    case Window::sec5: return 5;
    case Window::min1: return 60;
    case Window::hour1: return 3600;
    }
    return 0;
}

std::string to_string(Window w);
/// Accepts "5s", "1min", "1h".
std::optional<Window> parse_window(std::string_view text);

/// Start of the epoch-aligned half-open window containing t.
constexpr Timestamp window_start(Timestamp t, Window w)
{
    const auto len = window_seconds(w);
    auto q = t / len;
    if (t % len < 0)
        --q;
    return q * len;
}

/// Parses "YYYY-MM-DDTHH:MM:SS" with optional trailing "Z" or "+00:00"; a space may replace 'T'.
std::optional<Timestamp> parse_iso8601(std::string_view text);
/// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_iso8601(Timestamp t);
/// "YYYY-MM-DD" of the UTC date.
std::string format_date(Timestamp t);
/// UTC clock hour 0-23.
int utc_hour(Timestamp t);

} // namespace lcs

#endif // LCS_TIMEUTIL_HPP
