#pragma once

// Volume discounts on top of the phase-1 price: buyback probability from
// repeat purchases, thresholds from the unit-weighted basket quantiles, and
// per-interval discounts that keep the expected margin of a repeat customer
// at least that of a single-unit buyer.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pvdb/data_core.hpp"
#include "pvdb/price_optimizer.hpp"
#include "pvdb/strategy.hpp"

namespace pvdb {

struct BuybackEstimate {
    double gamma = 0.0;
    std::int64_t returns = 0;      // R
    std::int64_t non_returns = 0;  // A
    Interval measure;
    Interval control;
    bool defaulted = false;        // R + A == 0, gamma is the configured default
};

/// R = sum_g H(g, T_M) - |h(T_M)| + |h(T_M) ∩ h(T_C)|,
/// A = |h(T_M)| - |h(T_M) ∩ h(T_C)|, gamma = R / (R + A).
BuybackEstimate estimate_gamma(const CustomerIndex& index, const Interval& measure,
                               const Interval& control, double default_gamma = 0.5);

struct ThresholdScheme {
    std::vector<std::int64_t> thresholds{1};
    std::size_t requested_eta = 1;

    std::size_t eta() const noexcept { return thresholds.size(); }
    bool reduced() const noexcept { return eta() < requested_eta; }
};

/// omega_1 = 1; omega_{k+1} is the ceil(|Q| k / eta)-th element of the sorted
/// multiset Q in which each volume z appears q(z) * z times, k = 1..eta-1,
/// deduplicated to strict increase.
ThresholdScheme select_thresholds(const BasketDistribution& dist, std::size_t eta);

struct IntervalStats {
    std::vector<std::int64_t> thresholds;
    std::vector<double> share;        // beta_bar_k
    std::vector<double> mean_volume;  // V_bar_k
    double overall_mean_volume = 0.0; // V_bar
    std::vector<std::string> warnings;

    std::size_t eta() const noexcept { return thresholds.size(); }
};

/// Empty intervals get the interval midpoint as V_bar_k (with a warning);
/// the last interval is open-ended and falls back to omega_eta.
IntervalStats interval_stats(const BasketDistribution& dist, const ThresholdScheme& scheme);

/// Largest discount with mu_k >= mu_1:
/// 1 - (1 - gamma^N) / (V (1 - gamma^ceil(N / V))), and the continuous
/// extension 1 - N / (V ceil(N / V)) at gamma = 1.
double discount_bound(double gamma, std::int64_t need, double mean_volume);

/// delta_1 = 0, delta_k at the bound, clamped to [0, 1) and made
/// non-decreasing by a running maximum.
std::vector<double> compute_discounts(const IntervalStats& stats, double gamma, std::int64_t need);

/// Expected margin of a customer needing N units who buys batches of mean
/// size V at margin (1 - delta) m; gamma = 1 uses the limit.
double expected_margin(double base_margin, double gamma, std::int64_t need, double mean_volume,
                       double discount);

struct DiscountSchedule {
    std::vector<double> discounts;  // delta_k
    double base_margin = 0.0;       // m_bar
    std::vector<double> margins;    // m_bar_k
    std::vector<double> prices;     // c + m_bar_k
    double unit_cost = 0.0;
};

/// m_bar = m* V_bar / sum_k (1 - delta_k) V_bar_k, so that
/// sum_k V_bar_k m_bar_k = m* V_bar.
DiscountSchedule compute_margins(const IntervalStats& stats, const std::vector<double>& discounts,
                                 double optimal_margin, double unit_cost);

/// Everything phase 2 derives from history; fixed for a pricing campaign.
struct DiscountInputs {
    BasketDistribution baskets;
    double gamma = 0.0;
    std::int64_t need = 1;
    std::size_t eta = 3;
};

struct StrategyResult {
    PricingStrategy strategy;
    ThresholdScheme scheme;
    IntervalStats stats;
    DiscountSchedule schedule;
    double gamma = 0.0;
    std::int64_t need = 1;
    std::vector<std::string> warnings;
};

/// Thresholds -> interval stats -> discounts -> margins around p* - c.
/// Adjacent intervals whose discounts coincide are merged so prices stay
/// strictly decreasing.
StrategyResult assemble_strategy(const PricingDecision& decision, const DiscountInputs& inputs,
                                 double unit_cost);

/// N = round(mean units per customer), at least max(omega_eta, 1); the
/// override wins when given.
std::int64_t estimate_need(double mean_units_per_customer, std::int64_t last_threshold,
                           std::int64_t override_need = 0);

/// product_id,week_index,omega_1..omega_eta,price_1..price_eta,gamma,N,delta_1..delta_eta
std::string strategy_header(std::size_t eta);
/// Rows with fewer intervals than `columns` leave the missing fields empty.
void write_strategy_row(std::ostream& out, const std::string& product_id, long week,
                        const StrategyResult& r, std::size_t columns);

}  // namespace pvdb
