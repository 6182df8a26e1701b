#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace pvdb {

using Timestamp = std::chrono::sys_seconds;

inline constexpr std::chrono::seconds kWeek{7 * 24 * 3600};
inline constexpr std::chrono::seconds kDay{24 * 3600};

/// Parses an RFC 3339 instant ("2021-06-16T08:30:00Z", "...+02:00", optional
/// fractional seconds which are truncated). Throws pvdb::Error on bad input.
Timestamp parse_rfc3339(std::string_view text);

/// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_rfc3339(Timestamp t);

/// Half-open period [begin, end).
struct Interval {
    Timestamp begin;
    Timestamp end;

    bool contains(Timestamp t) const noexcept { return begin <= t && t < end; }
    bool overlaps(const Interval& o) const noexcept { return begin < o.end && o.begin < end; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Index of the 7-day bucket holding `t`, counting from `origin`.
long week_index(Timestamp origin, Timestamp t) noexcept;

inline Timestamp week_start(Timestamp origin, long week) noexcept { return origin + week * kWeek; }

}  // namespace pvdb
