#include "pvdb/market_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pvdb/error.hpp"
#include "pvdb/kernels.hpp"

namespace pvdb {

namespace {

void check_distribution(const std::map<std::int64_t, double>& d, const char* name) {
    if (d.empty()) throw Error("market-sim", std::string(name) + " basket distribution is empty");
    double total = 0.0;
    for (const auto& [z, p] : d) {
        if (z < 1 || p < 0.0) throw Error("market-sim", std::string(name) + " basket distribution is invalid");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error("market-sim", std::string(name) + " basket distribution must sum to 1");
}

void build_cdf(const std::map<std::int64_t, double>& d, std::vector<std::int64_t>& z, std::vector<double>& cdf) {
    double acc = 0.0;
    for (const auto& [size, p] : d) {
        acc += p;
        z.push_back(size);
        cdf.push_back(acc);
    }
    cdf.back() = 1.0;
}

double mean_of(const std::map<std::int64_t, double>& d) {
    double m = 0.0;
    for (const auto& [z, p] : d) m += static_cast<double>(z) * p;
    return m;
}

}  // namespace

void MarketConfig::validate() const {
    if (!(base_rate > 0.0)) throw Error("market-sim", "base rate must be > 0");
    if (!(elasticity > 0.0)) throw Error("market-sim", "elasticity must be > 0");
    for (double w : weekly_profile)
        if (!(w > 0.0)) throw Error("market-sim", "weekly profile values must be > 0");
    if (annual_profile.size() != 52) throw Error("market-sim", "annual profile needs 52 values");
    for (double w : annual_profile)
        if (!(w > 0.0)) throw Error("market-sim", "annual profile values must be > 0");
    if (!(business_fraction >= 0.0 && business_fraction <= 1.0))
        throw Error("market-sim", "business fraction must lie in [0, 1]");
    check_distribution(private_baskets, "private");
    check_distribution(business_baskets, "business");
    if (!(gamma_true >= 0.0 && gamma_true < 1.0)) throw Error("market-sim", "gamma_true must lie in [0, 1)");
    if (!(unit_cost >= 0.0)) throw Error("market-sim", "unit cost must be >= 0");
    if (horizon < 1) throw Error("market-sim", "horizon must be >= 1");
    if (warmup_weeks < 0) throw Error("market-sim", "warmup weeks must be >= 0");
    if (warmup_weeks > 0 && !(warmup_price > unit_cost))
        throw Error("market-sim", "warmup price must exceed the unit cost");
}

double MarketConfig::mean_basket() const {
    return (1.0 - business_fraction) * mean_of(private_baskets) + business_fraction * mean_of(business_baskets);
}

double MarketConfig::shape(double price) const {
    if (form == DemandForm::exponential) return std::exp(-elasticity * price);
    return 1.0 / (1.0 + std::exp(elasticity * (price - logistic_midpoint)));
}

double MarketConfig::season(long week) const {
    const long n = static_cast<long>(annual_profile.size());
    return annual_profile[static_cast<std::size_t>(((week % n) + n) % n)];
}

double true_expected_volume(const MarketConfig& cfg, double price, long week) {
    return cfg.base_rate * cfg.shape(price) * cfg.season(week) / (1.0 - cfg.gamma_true);
}

double oracle_price(const MarketConfig& cfg, const PriceGrid& grid, long week) {
    std::vector<double> volumes;
    volumes.reserve(grid.size());
    for (double p : grid.prices()) volumes.push_back(true_expected_volume(cfg, p, week));
    const auto best = kernels::profit_argmax(grid.prices(), volumes, cfg.unit_cost);
    return best.found ? grid.prices()[best.index] : grid.front();
}

Market::Market(MarketConfig cfg)
    : cfg_(std::move(cfg)), arrivals_(derive_seed(cfg_.seed, 1)), returns_(derive_seed(cfg_.seed, 2)) {
    cfg_.validate();
    build_cdf(cfg_.private_baskets, private_z_, private_cdf_);
    build_cdf(cfg_.business_baskets, business_z_, business_cdf_);
    const double total = std::accumulate(cfg_.weekly_profile.begin(), cfg_.weekly_profile.end(), 0.0);
    double acc = 0.0;
    for (std::size_t d = 0; d < 7; ++d) {
        acc += cfg_.weekly_profile[d] / total;
        day_cdf_[d] = acc;
    }
    day_cdf_[6] = 1.0;
}

std::int64_t Market::draw_basket(bool business, double u) const {
    const auto& cdf = business ? business_cdf_ : private_cdf_;
    const auto& z = business ? business_z_ : private_z_;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), z.size() - 1);
    return z[i];
}

Timestamp Market::draw_time(long week, double u) const {
    // Day by the intra-week profile, then uniform within the day.
    const auto it = std::upper_bound(day_cdf_.begin(), day_cdf_.end(), u);
    const auto day = std::min<long>(static_cast<long>(it - day_cdf_.begin()), 6);
    const double lo = day == 0 ? 0.0 : day_cdf_[static_cast<std::size_t>(day - 1)];
    const double frac = std::clamp((u - lo) / (day_cdf_[static_cast<std::size_t>(day)] - lo), 0.0, 1.0);
    const auto secs = std::min<long>(static_cast<long>(frac * static_cast<double>(kDay.count())), kDay.count() - 1);
    return week_start(cfg_.origin, week) + day * kDay + std::chrono::seconds{secs};
}

Transaction Market::make_txn(Timestamp ts, std::uint64_t customer, std::int64_t units, const PricingStrategy& s) const {
    return {ts, cfg_.product_id, "g" + std::to_string(customer), s.unit_price(units), units, cfg_.unit_cost};
}

std::vector<Transaction> Market::simulate_round(const PricingStrategy& strategy, long week) {
    if (!strategy.valid()) throw Error("market-sim", "invalid pricing strategy");
    if (last_week_ >= 0 && week != last_week_ + 1) throw Error("market-sim", "weeks must be simulated consecutively");
    last_week_ = week;

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Transaction> txns;
    std::vector<Return> next;

    for (const auto& r : pending_) {
        txns.push_back(make_txn(draw_time(week, unif(returns_)), r.customer, r.units, strategy));
        if (unif(returns_) < cfg_.gamma_true) next.push_back(r);
    }

    const double weekly_rate = cfg_.base_rate / cfg_.mean_basket() * cfg_.season(week);
    for (std::size_t d = 0; d < 7; ++d) {
        const double share = day_cdf_[d] - (d == 0 ? 0.0 : day_cdf_[d - 1]);
        std::poisson_distribution<long> arrivals(weekly_rate * share);
        const long n = arrivals(arrivals_);
        for (long i = 0; i < n; ++i) {
            const bool business = unif(arrivals_) < cfg_.business_fraction;
            const std::int64_t units = draw_basket(business, unif(arrivals_));
            const double u_accept = unif(arrivals_);
            const double u_return = unif(arrivals_);
            const double u_time = unif(arrivals_);
            if (u_accept >= cfg_.shape(strategy.unit_price(units))) continue;
            const auto customer = next_customer_++;
            const double lo = d == 0 ? 0.0 : day_cdf_[d - 1];
            txns.push_back(make_txn(draw_time(week, lo + u_time * share), customer, units, strategy));
            if (u_return < cfg_.gamma_true) next.push_back({customer, units});
        }
    }
    pending_ = std::move(next);
    std::stable_sort(txns.begin(), txns.end(),
                     [](const Transaction& a, const Transaction& b) { return a.timestamp < b.timestamp; });
    return txns;
}

double realized_profit(std::span<const Transaction> week_txns) {
    double profit = 0.0;
    for (const auto& t : week_txns) profit += (t.unit_price - t.unit_cost) * static_cast<double>(t.units);
    return profit;
}

PolicyAction FixedPricePolicy::decide(std::span<const Transaction>, const PolicyContext& ctx) {
    return {PricingStrategy::single(price_), {ctx.week, price_, 0.0, 0.0}};
}

PolicyAction RandomPricePolicy::decide(std::span<const Transaction>, const PolicyContext& ctx) {
    std::vector<double> feasible;
    for (double p : grid_.prices())
        if (p > ctx.unit_cost) feasible.push_back(p);
    if (feasible.empty()) throw NoPositiveMarginError("random policy: no grid price exceeds the unit cost");
    std::uniform_int_distribution<std::size_t> pick(0, feasible.size() - 1);
    const double p = feasible[pick(rng_)];
    return {PricingStrategy::single(p), {ctx.week, p, 0.0, 0.0}};
}

double SimOutcome::warmup_profit() const {
    double total = 0.0;
    for (const auto& w : warmup) total += w.profit;
    return total;
}

std::vector<Transaction> SimOutcome::campaign_log() const {
    const auto start = week_start(config.origin, config.warmup_weeks);
    std::vector<Transaction> out;
    for (const auto& t : log)
        if (t.timestamp >= start) out.push_back(t);
    return out;
}

std::vector<Transaction> SimOutcome::warmup_log() const {
    const auto start = week_start(config.origin, config.warmup_weeks);
    std::vector<Transaction> out;
    for (const auto& t : log)
        if (t.timestamp < start) out.push_back(t);
    return out;
}

namespace {

WeekRecord record_week(long week, const PricingStrategy& s, const PricingDecision& d,
                       std::span<const Transaction> txns) {
    WeekRecord rec{week, s, d, realized_profit(txns), std::vector<std::int64_t>(s.eta(), 0),
                   static_cast<std::int64_t>(txns.size())};
    for (const auto& t : txns) rec.interval_units[s.interval_of(t.units)] += t.units;
    return rec;
}

}  // namespace

SimOutcome simulate_horizon(const MarketConfig& cfg, PricingPolicy& policy) {
    Market market(cfg);
    SimOutcome out;
    out.config = cfg;

    for (long w = 0; w < cfg.warmup_weeks; ++w) {
        const auto s = PricingStrategy::single(cfg.warmup_price);
        auto txns = market.simulate_round(s, w);
        out.warmup.push_back(record_week(w, s, {w, cfg.warmup_price, 0.0, 0.0}, txns));
        out.log.insert(out.log.end(), txns.begin(), txns.end());
    }

    const long first = cfg.warmup_weeks;
    for (long w = first; w < first + cfg.horizon; ++w) {
        const PolicyContext ctx{cfg.product_id, w, first, cfg.origin, cfg.unit_cost};
        const auto action = policy.decide(out.log, ctx);
        auto txns = market.simulate_round(action.strategy, w);
        out.weeks.push_back(record_week(w, action.strategy, action.decision, txns));
        out.total_profit += out.weeks.back().profit;
        out.log.insert(out.log.end(), txns.begin(), txns.end());
    }
    return out;
}

}  // namespace pvdb
