#include "pvdb/price_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "pvdb/error.hpp"
#include "pvdb/kernels.hpp"

namespace pvdb {

PriceGrid::PriceGrid(std::vector<double> prices) : prices_(std::move(prices)) {
    if (prices_.empty()) throw Error("price-optimizer", "empty price grid");
    if (!(prices_.front() > 0.0)) throw Error("price-optimizer", "grid prices must be > 0");
    for (std::size_t i = 1; i < prices_.size(); ++i)
        if (!(prices_[i] > prices_[i - 1])) throw Error("price-optimizer", "grid prices must be strictly increasing");
}

PriceGrid PriceGrid::from_margins(double unit_cost, double margin_min, double margin_max, double step_fraction) {
    if (!(unit_cost > 0.0)) throw Error("price-optimizer", "margin grid needs a positive unit cost");
    if (!(step_fraction > 0.0) || margin_max < margin_min)
        throw Error("price-optimizer", "invalid grid margins");
    const auto steps = static_cast<long>(std::floor((margin_max - margin_min) / step_fraction + 1e-9));
    std::vector<double> prices;
    prices.reserve(static_cast<std::size_t>(steps) + 1);
    for (long i = 0; i <= steps; ++i)
        prices.push_back(unit_cost * (1.0 + margin_min + step_fraction * static_cast<double>(i)));
    return PriceGrid(std::move(prices));
}

double PriceGrid::resolution() const noexcept {
    double r = 0.0;
    for (std::size_t i = 1; i < prices_.size(); ++i) {
        const double gap = prices_[i] - prices_[i - 1];
        if (r == 0.0 || gap < r) r = gap;
    }
    return r;
}

bool PriceGrid::contains(double p) const noexcept {
    return std::binary_search(prices_.begin(), prices_.end(), p);
}

std::vector<double> sampled_volumes(const DemandSample& sample, const PriceGrid& grid, double week) {
    const auto& spec = sample.spec();
    const std::size_t n = grid.size();
    const std::size_t u = spec.n_price();
    std::vector<double> basis(u * n);
    for (std::size_t k = 0; k < u; ++k)
        for (std::size_t g = 0; g < n; ++g) basis[k * n + g] = spec.price_bases[k](grid.prices()[g]);
    const auto& c = sample.coefficients();
    std::vector<double> out(n);
    kernels::grid_combine(basis, std::span<const double>(c.data(), u), sample.time_component(week), out);
    return out;
}

PricingDecision optimal_price(const DemandSample& sample, const PriceGrid& grid, double unit_cost, long week) {
    if (unit_cost < 0.0) throw Error("price-optimizer", "unit cost must be >= 0");
    const auto volumes = sampled_volumes(sample, grid, static_cast<double>(week));
    const auto best = kernels::profit_argmax(grid.prices(), volumes, unit_cost);
    if (!best.found)
        throw NoPositiveMarginError("no grid price exceeds the unit cost " + std::to_string(unit_cost));
    return {week, grid.prices()[best.index], std::max(volumes[best.index], 0.0), best.profit};
}

PricingDecision run_round(std::span<const WeeklyAggregate> history, const BasisSpec& spec, const PriceGrid& grid,
                          double unit_cost, long week, Rng& rng, const FitOptions& opts) {
    const auto post = fit_posterior(spec, history, opts);
    const auto sample = sample_demand(post, spec, rng);
    return optimal_price(sample, grid, unit_cost, week);
}

void write_decision_row(std::ostream& out, const std::string& product_id, const PricingDecision& d) {
    out << d.week_index << ',' << product_id << ',' << format_double(d.price) << ','
        << format_double(d.sampled_volume) << ',' << format_double(d.sampled_profit) << '\n';
}

}  // namespace pvdb
