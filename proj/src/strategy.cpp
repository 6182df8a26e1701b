#include "pvdb/strategy.hpp"

#include <algorithm>

namespace pvdb {

std::size_t PricingStrategy::interval_of(std::int64_t units) const noexcept {
    const auto it = std::upper_bound(thresholds.begin(), thresholds.end(), units);
    if (it == thresholds.begin()) return 0;
    return static_cast<std::size_t>(it - thresholds.begin()) - 1;
}

bool PricingStrategy::valid() const noexcept {
    if (thresholds.empty() || thresholds.size() != prices.size() || thresholds.front() != 1) return false;
    for (std::size_t k = 1; k < thresholds.size(); ++k) {
        if (thresholds[k] <= thresholds[k - 1]) return false;
        if (prices[k] >= prices[k - 1]) return false;
    }
    return prices.back() > 0.0;
}

}  // namespace pvdb
