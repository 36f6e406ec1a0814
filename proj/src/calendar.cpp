#include "volnet/calendar.hpp"

#include <cctype>
#include <cstdio>

#include "volnet/errors.hpp"

namespace volnet {

std::int64_t serial_day(const Date& d) {
    // days_from_civil, shifted so that 1970-01-01 == 0.
    std::int64_t y = d.year;
    y -= d.month <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (d.month + (d.month > 2 ? -3 : 9)) + 2) / 5 + d.day - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

Date date_from_serial(std::int64_t days) {
    days += 719468;
    const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(days - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

int weekday(const Date& d) {
    std::int64_t s = serial_day(d);
    return static_cast<int>(((s % 7) + 11) % 7);  // 1970-01-01 was a Thursday
}

bool is_weekend(const Date& d) {
    int w = weekday(d);
    return w == 0 || w == 6;
}

std::string to_iso(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

Date parse_iso(const std::string& s) {
    auto fail = [&] { throw DataError("malformed date '" + s + "' (expected YYYY-MM-DD)"); };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') fail();
    for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) fail();
    Date d;
    d.year = std::stoi(s.substr(0, 4));
    d.month = std::stoi(s.substr(5, 2));
    d.day = std::stoi(s.substr(8, 2));
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) fail();
    // Round-trip through the serial number rejects impossible dates (e.g. Feb 30).
    if (date_from_serial(serial_day(d)) != d) fail();
    return d;
}

std::vector<Date> weekday_calendar(const Date& start, int n) {
    std::vector<Date> out;
    out.reserve(static_cast<std::size_t>(n));
    std::int64_t s = serial_day(start);
    while (static_cast<int>(out.size()) < n) {
        Date d = date_from_serial(s);
        if (!is_weekend(d)) out.push_back(d);
        ++s;
    }
    return out;
}

}  // namespace volnet
