#pragma once

// Thompson selection of the average price: draw one demand function, pick
// the grid price maximizing (p - c) * v(p, t).

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pvdb/demand_model.hpp"

namespace pvdb {

class PriceGrid {
public:
    /// Strictly increasing, positive prices.
    explicit PriceGrid(std::vector<double> prices);

    /// c * (1 + m) for m from margin_min to margin_max in steps of step_fraction.
    static PriceGrid from_margins(double unit_cost, double margin_min = 0.05,
                                  double margin_max = 1.5, double step_fraction = 0.01);

    const std::vector<double>& prices() const noexcept { return prices_; }
    std::size_t size() const noexcept { return prices_.size(); }
    double front() const { return prices_.front(); }
    double back() const { return prices_.back(); }
    /// Smallest positive gap between neighbours (0 for a single price).
    double resolution() const noexcept;
    bool contains(double p) const noexcept;

private:
    std::vector<double> prices_;
};

struct PricingDecision {
    long week_index = 0;
    double price = 0.0;
    double sampled_volume = 0.0;
    double sampled_profit = 0.0;
};

/// Sampled demand, clipped at zero, over every grid price.
std::vector<double> sampled_volumes(const DemandSample& sample, const PriceGrid& grid, double week);

/// Exhaustive argmax over the grid; ties go to the lowest price. Throws
/// NoPositiveMarginError when no grid price exceeds c.
PricingDecision optimal_price(const DemandSample& sample, const PriceGrid& grid, double unit_cost,
                              long week);

/// Fit, sample, optimize. Deterministic in (history, rng state).
PricingDecision run_round(std::span<const WeeklyAggregate> history, const BasisSpec& spec,
                          const PriceGrid& grid, double unit_cost, long week, Rng& rng,
                          const FitOptions& opts = {});

inline constexpr const char* kDecisionHeader = "week_index,product_id,price,sampled_volume,sampled_profit";
void write_decision_row(std::ostream& out, const std::string& product_id, const PricingDecision& d);

}  // namespace pvdb
