#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace qalloc
{
    using Date = std::chrono::year_month_day;

    /// Parses an ISO-8601 calendar date (YYYY-MM-DD). Surrounding whitespace is ignored.
    inline std::optional<Date> parse_date(std::string_view text)
    {
        while (!text.empty() && (text.front() == ' ' || text.front() == '\t'))
            text.remove_prefix(1);
        while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
            text.remove_suffix(1);
        if (text.size() != 10 || text[4] != '-' || text[7] != '-')
            return std::nullopt;

        auto field = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
            int value = 0;
            const char *first = text.data() + pos;
            const char *last = first + len;
            auto [ptr, ec] = std::from_chars(first, last, value);
            if (ec != std::errc{} || ptr != last)
                return std::nullopt;
            return value;
        };
        auto y = field(0, 4);
        auto m = field(5, 2);
        auto d = field(8, 2);
        if (!y || !m || !d)
            return std::nullopt;
        Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                  std::chrono::day{static_cast<unsigned>(*d)}};
        if (!date.ok())
            return std::nullopt;
        return date;
    }

    inline std::string format_date(const Date &date)
    {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                      static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
        return buf;
    }

    /// Closed calendar interval [start, end].
    struct DateRange
    {
        Date start;
        Date end;

        bool contains(const Date &d) const { return start <= d && d <= end; }
    };

} // namespace qalloc
