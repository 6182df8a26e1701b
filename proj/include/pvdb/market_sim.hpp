#pragma once

// Synthetic single-product market with known ground truth.
//
// Potential customers arrive as a Poisson stream modulated by an annual and
// an intra-week profile. Each draws a class (business or private) and a
// basket size from the class distribution, faces the per-unit price of the
// interval holding that size, and buys with probability shape(price), the
// ground-truth demand normalized to (0, 1]. A buyer returns one week later
// with the same basket with probability gamma_true, and keeps doing so
// geometrically; returns are not thinned by price.

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pvdb/data_core.hpp"
#include "pvdb/price_optimizer.hpp"
#include "pvdb/random.hpp"
#include "pvdb/strategy.hpp"

namespace pvdb {

enum class DemandForm { exponential, logistic };

struct MarketConfig {
    std::string product_id = "P0";
    DemandForm form = DemandForm::exponential;
    /// Expected units per week from new customers at an (unreachable) price
    /// of zero under the exponential form; the logistic form saturates at it.
    double base_rate = 1000.0;
    double elasticity = 0.1;
    double logistic_midpoint = 20.0;  // logistic only

    std::array<double, 7> weekly_profile{1, 1, 1, 1, 1, 1, 1};
    std::vector<double> annual_profile = std::vector<double>(52, 1.0);

    double business_fraction = 0.3;
    std::map<std::int64_t, double> private_baskets{{1, 1.0}};
    std::map<std::int64_t, double> business_baskets{{1, 1.0}};

    double gamma_true = 0.0;
    double unit_cost = 10.0;
    /// Weeks priced by the policy under test.
    int horizon = 52;
    /// Weeks before the campaign, priced at `warmup_price`, visible to the policy.
    int warmup_weeks = 0;
    double warmup_price = 0.0;
    Timestamp origin{std::chrono::sys_days{std::chrono::year{2021} / 1 / 4}};
    std::uint64_t seed = 1;

    void validate() const;
    double mean_basket() const;
    /// Purchase probability of a new customer facing `price`.
    double shape(double price) const;
    double season(long week) const;
};

/// True expected units at a single posted price: seasonal new-customer
/// demand scaled by the steady-state repeat factor 1 / (1 - gamma_true).
double true_expected_volume(const MarketConfig& cfg, double price, long week);

/// Clairvoyant argmax over the grid of (p - c) * true_expected_volume.
double oracle_price(const MarketConfig& cfg, const PriceGrid& grid, long week);

/// Stateful market: holds pending returns between weeks.
class Market {
public:
    explicit Market(MarketConfig cfg);

    const MarketConfig& config() const noexcept { return cfg_; }

    /// Transactions of global week `week` (0-based from origin), sorted by
    /// timestamp. Weeks must be simulated in increasing order.
    std::vector<Transaction> simulate_round(const PricingStrategy& strategy, long week);

    std::uint64_t customers_created() const noexcept { return next_customer_; }

private:
    struct Return {
        std::uint64_t customer;
        std::int64_t units;
    };

    Transaction make_txn(Timestamp ts, std::uint64_t customer, std::int64_t units,
                         const PricingStrategy& s) const;
    std::int64_t draw_basket(bool business, double u) const;
    Timestamp draw_time(long week, double u) const;

    MarketConfig cfg_;
    Rng arrivals_;  // drawn unconditionally per arrival: common random numbers across policies
    Rng returns_;
    std::vector<double> private_cdf_, business_cdf_;
    std::vector<std::int64_t> private_z_, business_z_;
    std::array<double, 7> day_cdf_{};
    std::vector<Return> pending_;
    std::uint64_t next_customer_ = 0;
    long last_week_ = -1;
};

/// Realized profit of a week: sum over transactions of (p - c) * units.
double realized_profit(std::span<const Transaction> week_txns);

struct PolicyContext {
    std::string product_id;
    long week = 0;               // global week being priced
    long first_policy_week = 0;  // campaign start
    Timestamp origin;
    double unit_cost = 0.0;
};

struct PolicyAction {
    PricingStrategy strategy;
    PricingDecision decision;    // the phase-1 average price
};

class PricingPolicy {
public:
    virtual ~PricingPolicy() = default;
    virtual std::string name() const = 0;
    /// `log` holds every transaction strictly before the priced week.
    virtual PolicyAction decide(std::span<const Transaction> log, const PolicyContext& ctx) = 0;
};

class FixedPricePolicy final : public PricingPolicy {
public:
    explicit FixedPricePolicy(double price, std::string name = "fixed")
        : price_(price), name_(std::move(name)) {}
    std::string name() const override { return name_; }
    PolicyAction decide(std::span<const Transaction>, const PolicyContext& ctx) override;

private:
    double price_;
    std::string name_;
};

/// Uniform grid price each week.
class RandomPricePolicy final : public PricingPolicy {
public:
    RandomPricePolicy(PriceGrid grid, std::uint64_t seed) : grid_(std::move(grid)), rng_(seed) {}
    std::string name() const override { return "random"; }
    PolicyAction decide(std::span<const Transaction>, const PolicyContext& ctx) override;

private:
    PriceGrid grid_;
    Rng rng_;
};

struct WeekRecord {
    long week = 0;
    PricingStrategy strategy;
    PricingDecision decision;
    double profit = 0.0;
    std::vector<std::int64_t> interval_units;  // v_i for each interval of the strategy
    std::int64_t n_transactions = 0;
};

struct SimOutcome {
    MarketConfig config;
    std::vector<Transaction> log;          // warmup and campaign
    std::vector<WeekRecord> warmup;
    std::vector<WeekRecord> weeks;         // campaign weeks
    double total_profit = 0.0;             // campaign only, accumulated weekly

    double warmup_profit() const;
    /// Transactions of the campaign weeks.
    std::vector<Transaction> campaign_log() const;
    std::vector<Transaction> warmup_log() const;
};

/// Closed loop: warmup at the fixed warmup price, then `horizon` weeks in
/// which the policy sees only the accumulated log.
SimOutcome simulate_horizon(const MarketConfig& cfg, PricingPolicy& policy);

}  // namespace pvdb
