#pragma once

// Both phases composed into a policy: Thompson-sampled average price each
// week, then the volume-discount schedule around it.

#include <optional>
#include <span>

#include "pvdb/demand_model.hpp"
#include "pvdb/discount_engine.hpp"
#include "pvdb/market_sim.hpp"
#include "pvdb/price_optimizer.hpp"

namespace pvdb {

struct GridConfig {
    double margin_min = 0.05;
    double margin_max = 1.5;
    double step_fraction = 0.01;

    PriceGrid build(double unit_cost) const {
        return PriceGrid::from_margins(unit_cost, margin_min, margin_max, step_fraction);
    }
};

struct DiscountConfig {
    std::size_t eta = 3;
    double gamma_default = 0.5;
    std::int64_t need_override = 0;  // 0: estimate
    /// Length of each of the measure and control periods; by default they
    /// tile the year before the campaign (measure first).
    std::chrono::seconds period_length{182 * 24 * 3600};
    std::optional<Interval> measure;
    std::optional<Interval> control;
};

struct PvdbSettings {
    GridConfig grid;
    BasisConfig basis;
    FitOptions fit;
    DiscountConfig discounts;
};

/// Measure/control periods for a campaign starting at `campaign_start`.
std::pair<Interval, Interval> default_periods(const DiscountConfig& cfg, Timestamp campaign_start);

/// Phase-2 inputs from the history before `campaign_start`: baskets and N over
/// measure ∪ control, gamma from the customer index.
DiscountInputs estimate_discount_inputs(std::span<const Transaction> history,
                                        const DiscountConfig& cfg, Timestamp campaign_start,
                                        std::vector<std::string>* warnings = nullptr);

/// Phase 1 for one week: aggregate, lay out bases, fit, sample, optimize.
/// `history` must hold only transactions before the priced week.
struct PhaseOneResult {
    PricingDecision decision;
    PosteriorState posterior;
    BasisSpec spec;
};
PhaseOneResult price_week(std::span<const Transaction> history, const PvdbSettings& settings,
                          Timestamp origin, long week, double unit_cost, Rng& rng);

class PvdbPolicy final : public PricingPolicy {
public:
    PvdbPolicy(PvdbSettings settings, std::uint64_t seed)
        : settings_(std::move(settings)), rng_(seed) {}
    std::string name() const override { return "pvdb"; }
    PolicyAction decide(std::span<const Transaction> log, const PolicyContext& ctx) override;

    /// Phase-2 inputs frozen at the first priced week.
    const std::optional<DiscountInputs>& discount_inputs() const noexcept { return inputs_; }
    /// Full phase-2 result of every decision, in call order.
    const std::vector<StrategyResult>& results() const noexcept { return results_; }

private:
    PvdbSettings settings_;
    Rng rng_;
    std::optional<DiscountInputs> inputs_;
    std::vector<StrategyResult> results_;
};

}  // namespace pvdb
