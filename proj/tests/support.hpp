#pragma once

#include <string>
#include <vector>

#include "pvdb/data_core.hpp"

namespace testing {

inline pvdb::Timestamp ts(const std::string& s) { return pvdb::parse_rfc3339(s); }

inline const pvdb::Timestamp kOrigin = ts("2021-01-04T00:00:00Z");

inline pvdb::Transaction txn(pvdb::Timestamp t, std::string customer, double price, std::int64_t units,
                             double cost = 1.0, std::string product = "P") {
    return {t, std::move(product), std::move(customer), price, units, cost};
}

inline pvdb::Timestamp day(long d, long hours = 12) {
    return kOrigin + d * pvdb::kDay + std::chrono::hours(hours);
}

}  // namespace testing
