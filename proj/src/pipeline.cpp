#include "pvdb/pipeline.hpp"

#include "pvdb/error.hpp"

namespace pvdb {

std::pair<Interval, Interval> default_periods(const DiscountConfig& cfg, Timestamp campaign_start) {
    if (cfg.measure && cfg.control) return {*cfg.measure, *cfg.control};
    if (cfg.measure || cfg.control) throw Error("discount-engine", "measure and control periods must be given together");
    const auto len = std::chrono::duration_cast<std::chrono::seconds>(cfg.period_length);
    const Interval control{campaign_start - len, campaign_start};
    const Interval measure{campaign_start - 2 * len, campaign_start - len};
    return {measure, control};
}

DiscountInputs estimate_discount_inputs(std::span<const Transaction> history, const DiscountConfig& cfg,
                                        Timestamp campaign_start, std::vector<std::string>* warnings) {
    const auto [measure, control] = default_periods(cfg, campaign_start);
    if (measure.overlaps(control)) throw Error("discount-engine", "measure and control periods overlap");

    std::vector<Transaction> window;
    for (const auto& t : history)
        if (measure.contains(t.timestamp) || control.contains(t.timestamp)) window.push_back(t);
    if (window.empty()) {
        for (const auto& t : history)
            if (t.timestamp < campaign_start) window.push_back(t);
        if (warnings && !window.empty())
            warnings->push_back("no transactions in the estimation periods; using all prior history");
    }

    DiscountInputs in;
    in.eta = cfg.eta;
    if (window.empty()) {
        in.gamma = cfg.gamma_default;
        in.need = std::max<std::int64_t>(cfg.need_override, 1);
        if (warnings) warnings->push_back("no history for volume discounts");
        return in;
    }
    in.baskets = basket_distribution(window);

    const auto index = build_customer_index(history, {measure, control});
    const auto est = estimate_gamma(index, measure, control, cfg.gamma_default);
    in.gamma = est.gamma;
    if (est.defaulted && warnings)
        warnings->push_back("no customers in the measure period; gamma defaults to " + format_double(est.gamma));

    const auto scheme = select_thresholds(in.baskets, cfg.eta);
    in.need = estimate_need(mean_units_per_customer(window), scheme.thresholds.back(), cfg.need_override);
    return in;
}

PhaseOneResult price_week(std::span<const Transaction> history, const PvdbSettings& settings, Timestamp origin,
                          long week, double unit_cost, Rng& rng) {
    const auto aggregates = aggregate_weekly(history, origin);
    const auto grid = settings.grid.build(unit_cost);
    auto spec = make_basis_spec(settings.basis, aggregates, grid.front(), grid.back());
    auto post = fit_posterior(spec, aggregates, settings.fit);
    const auto sample = sample_demand(post, spec, rng);
    auto decision = optimal_price(sample, grid, unit_cost, week);
    return {decision, std::move(post), std::move(spec)};
}

PolicyAction PvdbPolicy::decide(std::span<const Transaction> log, const PolicyContext& ctx) {
    const auto phase_one = price_week(log, settings_, ctx.origin, ctx.week, ctx.unit_cost, rng_);
    if (!inputs_) {
        if (settings_.discounts.eta <= 1) {
            inputs_.emplace();
            inputs_->eta = 1;
        } else {
            inputs_ = estimate_discount_inputs(log, settings_.discounts, week_start(ctx.origin, ctx.first_policy_week));
        }
    }
    results_.push_back(assemble_strategy(phase_one.decision, *inputs_, ctx.unit_cost));
    return {results_.back().strategy, phase_one.decision};
}

}  // namespace pvdb
