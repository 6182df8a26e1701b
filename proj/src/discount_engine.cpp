#include "pvdb/discount_engine.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "pvdb/error.hpp"

namespace pvdb {

BuybackEstimate estimate_gamma(const CustomerIndex& index, const Interval& measure, const Interval& control,
                               double default_gamma) {
    if (measure.overlaps(control)) throw Error("discount-engine", "measure and control periods overlap");
    const std::size_t m = index.period_index(measure);
    const std::size_t c = index.period_index(control);
    const auto total = index.total_purchases(m);
    const auto unique = static_cast<std::int64_t>(index.unique_customers(m));
    const auto both = static_cast<std::int64_t>(index.overlap(m, c));

    BuybackEstimate est;
    est.measure = measure;
    est.control = control;
    est.returns = total - unique + both;
    est.non_returns = unique - both;
    const auto denom = est.returns + est.non_returns;
    if (denom == 0) {
        est.gamma = default_gamma;
        est.defaulted = true;
    } else {
        est.gamma = static_cast<double>(est.returns) / static_cast<double>(denom);
    }
    return est;
}

ThresholdScheme select_thresholds(const BasketDistribution& dist, std::size_t eta) {
    if (eta < 1) throw Error("discount-engine", "eta must be >= 1");
    if (dist.empty()) throw Error("discount-engine", "empty basket distribution");

    std::int64_t q_size = 0;  // |Q|
    for (const auto& [z, q] : dist.counts()) q_size += z * q;
    const auto n = static_cast<std::int64_t>(eta);

    ThresholdScheme scheme;
    scheme.requested_eta = eta;
    for (std::int64_t k = 1; k < n; ++k) {
        const std::int64_t position = (q_size * k + n - 1) / n;  // ceil(|Q| k / eta), 1-based
        std::int64_t cumulative = 0;
        std::int64_t pick = dist.max_volume();
        for (const auto& [z, q] : dist.counts()) {
            cumulative += z * q;
            if (cumulative >= position) {
                pick = z;
                break;
            }
        }
        if (pick > scheme.thresholds.back()) scheme.thresholds.push_back(pick);
    }
    return scheme;
}

IntervalStats interval_stats(const BasketDistribution& dist, const ThresholdScheme& scheme) {
    const auto& w = scheme.thresholds;
    if (w.empty() || w.front() != 1) throw Error("discount-engine", "thresholds must start at 1");
    for (std::size_t k = 1; k < w.size(); ++k)
        if (w[k] <= w[k - 1]) throw Error("discount-engine", "thresholds must be strictly increasing");

    IntervalStats s;
    s.thresholds = w;
    s.overall_mean_volume = dist.mean_volume();
    const double b = static_cast<double>(dist.n_baskets());
    for (std::size_t k = 0; k < w.size(); ++k) {
        const bool last = k + 1 == w.size();
        std::int64_t baskets = 0, units = 0;
        for (const auto& [z, q] : dist.counts()) {
            if (z < w[k] || (!last && z >= w[k + 1])) continue;
            baskets += q;
            units += z * q;
        }
        s.share.push_back(b > 0.0 ? static_cast<double>(baskets) / b : 0.0);
        if (baskets > 0) {
            s.mean_volume.push_back(static_cast<double>(units) / static_cast<double>(baskets));
        } else {
            const double mid = last ? static_cast<double>(w[k]) : 0.5 * static_cast<double>(w[k] + w[k + 1] - 1);
            s.mean_volume.push_back(mid);
            s.warnings.push_back("interval " + std::to_string(k + 1) + " has no baskets; using mean volume " +
                                 format_double(mid));
        }
    }
    return s;
}

namespace {

// ceil(N / V) without tipping over on quotients that are integers in exact
// arithmetic but land a few ulps above after division.
std::int64_t batches(std::int64_t need, double mean_volume) {
    const double x = static_cast<double>(need) / mean_volume;
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(x * (1.0 - 1e-12))));
}

void check_args(double gamma, std::int64_t need, double mean_volume) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error("discount-engine", "gamma must lie in [0, 1]");
    if (need < 1) throw Error("discount-engine", "need N must be >= 1");
    if (!(mean_volume > 0.0)) throw Error("discount-engine", "mean volume must be > 0");
}

}  // namespace

double discount_bound(double gamma, std::int64_t need, double mean_volume) {
    check_args(gamma, need, mean_volume);
    const auto m = batches(need, mean_volume);
    if (gamma == 1.0) return 1.0 - static_cast<double>(need) / (mean_volume * static_cast<double>(m));
    const double num = 1.0 - std::pow(gamma, static_cast<double>(need));
    const double den = mean_volume * (1.0 - std::pow(gamma, static_cast<double>(m)));
    return 1.0 - num / den;
}

std::vector<double> compute_discounts(const IntervalStats& stats, double gamma, std::int64_t need) {
    std::vector<double> delta(stats.eta(), 0.0);
    const double below_one = std::nextafter(1.0, 0.0);
    for (std::size_t k = 1; k < delta.size(); ++k) {
        const double bound = discount_bound(gamma, need, stats.mean_volume[k]);
        delta[k] = std::max(delta[k - 1], std::clamp(bound, 0.0, below_one));
    }
    return delta;
}

double expected_margin(double base_margin, double gamma, std::int64_t need, double mean_volume, double discount) {
    check_args(gamma, need, mean_volume);
    const auto m = static_cast<double>(batches(need, mean_volume));
    const double per_batch = (1.0 - discount) * base_margin * mean_volume;
    if (gamma == 1.0) return m * per_batch;
    return (1.0 - std::pow(gamma, m)) / (1.0 - gamma) * per_batch;
}

DiscountSchedule compute_margins(const IntervalStats& stats, const std::vector<double>& discounts,
                                 double optimal_margin, double unit_cost) {
    if (!(optimal_margin > 0.0)) throw Error("discount-engine", "optimal margin must be > 0");
    if (discounts.size() != stats.eta()) throw Error("discount-engine", "one discount per interval is required");
    double denom = 0.0;
    for (std::size_t k = 0; k < discounts.size(); ++k) {
        if (!(discounts[k] >= 0.0 && discounts[k] < 1.0)) throw Error("discount-engine", "discounts must lie in [0, 1)");
        denom += (1.0 - discounts[k]) * stats.mean_volume[k];
    }
    if (!(denom > 0.0)) throw Error("discount-engine", "non-positive margin denominator");

    DiscountSchedule s;
    s.discounts = discounts;
    s.unit_cost = unit_cost;
    s.base_margin = optimal_margin * stats.overall_mean_volume / denom;
    for (double d : discounts) {
        s.margins.push_back(s.base_margin * (1.0 - d));
        s.prices.push_back(unit_cost + s.margins.back());
    }
    return s;
}

std::int64_t estimate_need(double mean_units_per_customer, std::int64_t last_threshold, std::int64_t override_need) {
    if (override_need > 0) return override_need;
    const auto rounded = static_cast<std::int64_t>(std::llround(mean_units_per_customer));
    return std::max<std::int64_t>({rounded, last_threshold, 1});
}

StrategyResult assemble_strategy(const PricingDecision& decision, const DiscountInputs& inputs, double unit_cost) {
    const double optimal_margin = decision.price - unit_cost;
    if (!(optimal_margin > 0.0)) throw Error("discount-engine", "phase-1 price does not exceed the unit cost");

    StrategyResult r;
    r.gamma = inputs.gamma;
    r.need = std::max<std::int64_t>(inputs.need, 1);
    if (inputs.eta <= 1 || inputs.baskets.empty()) {
        r.scheme.requested_eta = std::max<std::size_t>(inputs.eta, 1);
        r.stats.thresholds = {1};
        r.stats.share = {1.0};
        r.stats.overall_mean_volume = inputs.baskets.empty() ? 1.0 : inputs.baskets.mean_volume();
        r.stats.mean_volume = {r.stats.overall_mean_volume};
        r.schedule = compute_margins(r.stats, {0.0}, optimal_margin, unit_cost);
        r.schedule.prices = {decision.price};
        r.strategy = PricingStrategy::single(decision.price);
        if (inputs.eta > 1) r.warnings.push_back("no basket history; single price");
        return r;
    }

    r.scheme = select_thresholds(inputs.baskets, inputs.eta);
    if (r.scheme.reduced())
        r.warnings.push_back("effective eta reduced to " + std::to_string(r.scheme.eta()) + " (requested " +
                             std::to_string(inputs.eta) + ")");
    std::vector<double> delta;
    for (;;) {
        r.stats = interval_stats(inputs.baskets, r.scheme);
        delta = compute_discounts(r.stats, r.gamma, r.need);
        std::size_t flat = 0;
        for (std::size_t k = 1; k < delta.size() && flat == 0; ++k)
            if (delta[k] - delta[k - 1] <= 1e-12) flat = k;
        if (flat == 0) break;
        r.scheme.thresholds.erase(r.scheme.thresholds.begin() + static_cast<std::ptrdiff_t>(flat));
        r.warnings.push_back("merged an interval with no additional discount");
    }
    r.warnings.insert(r.warnings.end(), r.stats.warnings.begin(), r.stats.warnings.end());
    r.schedule = compute_margins(r.stats, delta, optimal_margin, unit_cost);
    if (r.scheme.eta() == 1) r.schedule.prices = {decision.price};
    r.strategy = {r.scheme.thresholds, r.schedule.prices};
    return r;
}

std::string strategy_header(std::size_t eta) {
    std::string h = "product_id,week_index";
    for (std::size_t k = 1; k <= eta; ++k) h += ",omega_" + std::to_string(k);
    for (std::size_t k = 1; k <= eta; ++k) h += ",price_" + std::to_string(k);
    h += ",gamma,N";
    for (std::size_t k = 1; k <= eta; ++k) h += ",delta_" + std::to_string(k);
    return h;
}

void write_strategy_row(std::ostream& out, const std::string& product_id, long week, const StrategyResult& r,
                        std::size_t columns) {
    const std::size_t eta = r.strategy.eta();
    columns = std::max(columns, eta);
    out << product_id << ',' << week;
    for (std::size_t k = 0; k < columns; ++k) out << ',' << (k < eta ? std::to_string(r.strategy.thresholds[k]) : "");
    for (std::size_t k = 0; k < columns; ++k) out << ',' << (k < eta ? format_double(r.strategy.prices[k]) : "");
    out << ',' << format_double(r.gamma) << ',' << r.need;
    for (std::size_t k = 0; k < columns; ++k) {
        const bool has = k < r.schedule.discounts.size();
        out << ',' << (has ? format_double(r.schedule.discounts[k]) : "");
    }
    out << '\n';
}

}  // namespace pvdb
