#pragma once
#include <charconv>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>

#include "tftmtl/errors.hpp"

namespace tftmtl {

/// Proleptic-Gregorian calendar day. Stored as days since 1970-01-01 so date
/// arithmetic and ordering are plain integer operations.
struct CivilDay {
    std::int64_t days = 0;  // since 1970-01-01

    auto operator<=>(const CivilDay&) const = default;
    CivilDay operator+(std::int64_t n) const { return {days + n}; }
    CivilDay operator-(std::int64_t n) const { return {days - n}; }
    std::int64_t operator-(CivilDay o) const { return days - o.days; }

    /// ISO day of week, 1 = Monday .. 7 = Sunday.
    int day_of_week() const {
        // 1970-01-01 was a Thursday (ISO 4)
        std::int64_t d = (days + 3) % 7;
        if (d < 0) d += 7;
        return static_cast<int>(d) + 1;
    }
};

namespace detail {

// days_from_civil / civil_from_days (Hinnant's algorithms)
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

inline int days_in_month(int y, int m) {
    static constexpr int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2) {
        const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        return leap ? 29 : 28;
    }
    return lengths[m - 1];
}

}  // namespace detail

inline CivilDay make_day(int y, int m, int d) { return {detail::days_from_civil(y, m, d)}; }

inline void civil_parts(CivilDay day, int& y, int& m, int& d) { detail::civil_from_days(day.days, y, m, d); }

/// "YYYY-MM-DD"
inline std::string format_date(CivilDay day) {
    int y, m, d;
    civil_parts(day, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return buf;
}

inline CivilDay parse_date(const std::string& s) {
    int y = 0, m = 0, d = 0;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' ||
        std::from_chars(s.data(), s.data() + 4, y).ec != std::errc{} ||
        std::from_chars(s.data() + 5, s.data() + 7, m).ec != std::errc{} ||
        std::from_chars(s.data() + 8, s.data() + 10, d).ec != std::errc{}) {
        throw ValidationError("invalid ISO date: '" + s + "'");
    }
    if (m < 1 || m > 12 || d < 1 || d > detail::days_in_month(y, m)) {
        throw ValidationError("invalid ISO date: '" + s + "'");
    }
    return make_day(y, m, d);
}

/// Shift by whole months, clamping the day to the target month's length
/// (2023-03-31 minus one month -> 2023-02-28).
inline CivilDay add_months(CivilDay day, int months) {
    int y, m, d;
    civil_parts(day, y, m, d);
    int idx = y * 12 + (m - 1) + months;
    int ny = idx / 12;
    int nm = idx % 12;
    if (nm < 0) {
        nm += 12;
        ny -= 1;
    }
    nm += 1;
    const int nd = std::min(d, detail::days_in_month(ny, nm));
    return make_day(ny, nm, nd);
}

}  // namespace tftmtl
