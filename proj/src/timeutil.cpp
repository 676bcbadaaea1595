#include "lcs/timeutil.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace lcs {

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out)
{
    if (pos + len > s.size())
        return false;
    for (std::size_t i = pos; i < pos + len; ++i)
        if (s[i] < '0' || s[i] > '9')
            return false;
    std::from_chars(s.data() + pos, s.data() + pos + len, out);
    return true;
}

constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b)
{
    auto q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0)))
        --q;
    return q;
}

} // namespace

std::string to_string(Window w)
{
    switch (w) {
    case Window::sec5: return "5s";
    case Window::min1: return "1min";
    case Window::hour1: return "1h";
    }
    return "?";
}

std::optional<Window> parse_window(std::string_view text)
{
    if (text == "5s")
        return Window::sec5;
    if (text == "1min")
        return Window::min1;
    if (text == "1h")
        return Window::hour1;
    return std::nullopt;
}

std::optional<Timestamp> parse_iso8601(std::string_view s)
{
    int y, mo, d, h, mi, sec;
    if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
        s[16] != ':')
        return std::nullopt;
    if (!read_int(s, 0, 4, y) || !read_int(s, 5, 2, mo) || !read_int(s, 8, 2, d) || !read_int(s, 11, 2, h) ||
        !read_int(s, 14, 2, mi) || !read_int(s, 17, 2, sec))
        return std::nullopt;
    auto rest = s.substr(19);
    if (!(rest.empty() || rest == "Z" || rest == "+00:00"))
        return std::nullopt;
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 59)
        return std::nullopt;
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<Timestamp>(days) * 86400 + h * 3600 + mi * 60 + sec;
}

std::string format_iso8601(Timestamp t)
{
    using namespace std::chrono;
    const auto days = floor_div(t, 86400);
    const auto secs = t - days * 86400;
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(secs / 3600), static_cast<int>(secs % 3600 / 60), static_cast<int>(secs % 60));
    return buf;
}

std::string format_date(Timestamp t)
{
    return format_iso8601(t).substr(0, 10);
}

int utc_hour(Timestamp t)
{
    const auto secs = t - floor_div(t, 86400) * 86400;
    return static_cast<int>(secs / 3600);
}

} // namespace lcs
