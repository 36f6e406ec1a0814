#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace volnet {

// Plain calendar date. Ordering and arithmetic go through the serial day
// number (proleptic Gregorian, days since 1970-01-01).
struct Date {
    int year = 1970;
    int month = 1;  // 1..12
    int day = 1;    // 1..31

    auto operator<=>(const Date&) const = default;
};

// Serial day number <-> civil date (Howard Hinnant's algorithms).
std::int64_t serial_day(const Date& d);
Date date_from_serial(std::int64_t days);

int weekday(const Date& d);  // 0 = Sunday .. 6 = Saturday
bool is_weekend(const Date& d);

std::string to_iso(const Date& d);
// Strict YYYY-MM-DD; throws DataError on malformed input.
Date parse_iso(const std::string& s);

// Months since year 0; used for grouping rows into calendar months.
inline int month_index(const Date& d) { return d.year * 12 + (d.month - 1); }

// n consecutive weekdays starting at `start` (skipping Saturdays/Sundays).
// The stand-in for a trading calendar in synthetic experiments.
std::vector<Date> weekday_calendar(const Date& start, int n);

}  // namespace volnet
