#pragma once

#include <cstdint>
#include <vector>

namespace pvdb {

/// Volume thresholds omega and per-unit prices p. A basket of z units pays
/// prices[k] per unit where k is the last threshold with omega_k <= z.
struct PricingStrategy {
    std::vector<std::int64_t> thresholds{1};
    std::vector<double> prices;

    static PricingStrategy single(double price) { return {{1}, {price}}; }

    std::size_t eta() const noexcept { return thresholds.size(); }
    std::size_t interval_of(std::int64_t units) const noexcept;
    double unit_price(std::int64_t units) const noexcept { return prices[interval_of(units)]; }
    double basket_cost(std::int64_t units) const noexcept {
        return unit_price(units) * static_cast<double>(units);
    }

    /// omega_1 = 1, strictly increasing thresholds, strictly decreasing
    /// positive prices, matching sizes.
    bool valid() const noexcept;
    friend bool operator==(const PricingStrategy&, const PricingStrategy&) = default;
};

}  // namespace pvdb
