#include "pvdb/time.hpp"

#include <cstdio>

#include "pvdb/error.hpp"

namespace pvdb {

namespace {

int digits(std::string_view s, std::size_t pos, std::size_t n) {
    if (pos + n > s.size()) throw Error("data-core", "truncated timestamp '" + std::string(s) + "'");
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (s[i] < '0' || s[i] > '9')
            throw Error("data-core", "bad digit in timestamp '" + std::string(s) + "'");
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

void expect(std::string_view s, std::size_t pos, char c) {
    if (pos >= s.size() || (s[pos] != c && !(c == 'T' && (s[pos] == 't' || s[pos] == ' '))))
        throw Error("data-core", "malformed timestamp '" + std::string(s) + "'");
}

}  // namespace

Timestamp parse_rfc3339(std::string_view s) {
    using namespace std::chrono;
    const int y = digits(s, 0, 4);
    expect(s, 4, '-');
    const int mo = digits(s, 5, 2);
    expect(s, 7, '-');
    const int d = digits(s, 8, 2);
    expect(s, 10, 'T');
    const int hh = digits(s, 11, 2);
    expect(s, 13, ':');
    const int mm = digits(s, 14, 2);
    expect(s, 16, ':');
    const int ss = digits(s, 17, 2);
    std::size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    }
    int offset_min = 0;
    if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
        ++pos;
    } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
        const int sign = s[pos] == '-' ? -1 : 1;
        const int oh = digits(s, pos + 1, 2);
        expect(s, pos + 3, ':');
        const int om = digits(s, pos + 4, 2);
        offset_min = sign * (oh * 60 + om);
        pos += 6;
    } else {
        throw Error("data-core", "timestamp '" + std::string(s) + "' lacks a UTC offset");
    }
    if (pos != s.size()) throw Error("data-core", "trailing characters in timestamp '" + std::string(s) + "'");

    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || hh > 23 || mm > 59 || ss > 60)
        throw Error("data-core", "invalid date/time in '" + std::string(s) + "'");
    return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} - minutes{offset_min};
}

std::string format_rfc3339(Timestamp t) {
    using namespace std::chrono;
    const auto day_point = floor<days>(t);
    const year_month_day ymd{day_point};
    const hh_mm_ss hms{t - day_point};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

long week_index(Timestamp origin, Timestamp t) noexcept {
    const auto delta = (t - origin).count();
    const auto w = kWeek.count();
    long q = static_cast<long>(delta / w);
    if (delta % w != 0 && delta < 0) --q;
    return q;
}

}  // namespace pvdb
