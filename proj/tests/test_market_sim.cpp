#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "pvdb/error.hpp"
#include "pvdb/evaluation.hpp"
#include "pvdb/market_sim.hpp"

using namespace pvdb;

namespace {

MarketConfig mixed_market(std::uint64_t seed) {
    MarketConfig m;
    m.base_rate = 400.0;
    m.gamma_true = 0.4;
    m.private_baskets = {{1, 0.6}, {2, 0.3}, {3, 0.1}};
    m.business_baskets = {{4, 0.5}, {8, 0.5}};
    m.horizon = 6;
    m.seed = seed;
    return m;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_SUITE("market_sim") {

TEST_CASE("config validation") {
    MarketConfig m;
    CHECK_NOTHROW(m.validate());
    m.private_baskets = {{1, 0.5}};
    CHECK_THROWS_AS(m.validate(), Error);
    m = MarketConfig{};
    m.gamma_true = 1.0;
    CHECK_THROWS_AS(m.validate(), Error);
    m = MarketConfig{};
    m.annual_profile.pop_back();
    CHECK_THROWS_AS(m.validate(), Error);
    m = MarketConfig{};
    m.weekly_profile[3] = 0.0;
    CHECK_THROWS_AS(m.validate(), Error);
}

TEST_CASE("same seed, same log") {
    const auto s = PricingStrategy{{1, 3}, {18.0, 16.0}};
    Market a(mixed_market(5)), b(mixed_market(5)), c(mixed_market(6));
    for (long w = 0; w < 4; ++w) {
        const auto ta = a.simulate_round(s, w);
        CHECK(ta == b.simulate_round(s, w));
        CHECK(ta != c.simulate_round(s, w));
    }
}

TEST_CASE("weeks must advance one at a time") {
    Market m(mixed_market(1));
    m.simulate_round(PricingStrategy::single(15), 0);
    CHECK_THROWS_AS(m.simulate_round(PricingStrategy::single(15), 2), Error);
}

TEST_CASE("prohibitive prices sell nothing") {
    auto cfg = mixed_market(2);
    cfg.gamma_true = 0.0;
    Market m(cfg);
    std::size_t n = 0;
    for (long w = 0; w < 5; ++w) n += m.simulate_round(PricingStrategy::single(1000.0), w).size();
    CHECK(n == 0);
}

TEST_CASE("without buyback every customer buys once") {
    auto cfg = mixed_market(3);
    cfg.gamma_true = 0.0;
    Market m(cfg);
    std::set<std::string> seen;
    std::size_t n = 0;
    for (long w = 0; w < 8; ++w)
        for (const auto& t : m.simulate_round(PricingStrategy::single(15.0), w)) {
            seen.insert(t.customer_id);
            ++n;
        }
    CHECK(n > 100);
    CHECK(seen.size() == n);
}

TEST_CASE("returns repeat the basket one week later") {
    auto cfg = mixed_market(4);
    cfg.gamma_true = 0.6;
    Market m(cfg);
    std::map<std::string, std::vector<Transaction>> by;
    for (long w = 0; w < 10; ++w)
        for (const auto& t : m.simulate_round(PricingStrategy::single(15.0), w)) by[t.customer_id].push_back(t);
    std::size_t repeaters = 0;
    for (const auto& [g, v] : by) {
        if (v.size() < 2) continue;
        ++repeaters;
        for (std::size_t i = 1; i < v.size(); ++i) {
            CHECK(v[i].units == v[0].units);
            CHECK(week_index(cfg.origin, v[i].timestamp) == week_index(cfg.origin, v[i - 1].timestamp) + 1);
        }
    }
    CHECK(repeaters > 50);
}

TEST_CASE("threshold rule fidelity and profit conservation") {
    auto cfg = mixed_market(8);
    cfg.horizon = 10;
    cfg.warmup_weeks = 2;
    cfg.warmup_price = 16.0;
    struct Alternating final : PricingPolicy {
        std::string name() const override { return "alt"; }
        PolicyAction decide(std::span<const Transaction>, const PolicyContext& ctx) override {
            const PricingStrategy s = ctx.week % 2 ? PricingStrategy{{1, 3, 5}, {19.0, 17.5, 15.25}}
                                                   : PricingStrategy{{1, 2}, {17.0, 14.0}};
            return {s, {ctx.week, s.prices[0], 0, 0}};
        }
    } policy;
    const auto out = simulate_horizon(cfg, policy);
    std::vector<StrategyRecord> hist;
    for (const auto& w : out.warmup) hist.push_back({cfg.product_id, w.week, w.strategy});
    for (const auto& w : out.weeks) hist.push_back({cfg.product_id, w.week, w.strategy});
    for (const auto& t : out.log) {
        const auto& rec = hist.at(static_cast<std::size_t>(week_index(cfg.origin, t.timestamp)));
        CHECK(t.unit_price == rec.strategy.unit_price(t.units));
        CHECK(t.unit_cost == cfg.unit_cost);
    }
    const auto margins = weekly_net_margins(out.log, hist, cfg.origin).at(cfg.product_id);
    double total = 0.0;
    for (const auto& w : out.weeks) {
        CHECK(margins.at(w.week) == w.profit);
        total += w.profit;
        std::int64_t units = 0;
        for (auto u : w.interval_units) units += u;
        CHECK(units > 0);
    }
    CHECK(total == out.total_profit);
    CHECK(out.warmup.size() == 2);
    CHECK(out.campaign_log().size() + out.warmup_log().size() == out.log.size());
}

TEST_CASE("realized volume tracks the expected volume") {
    MarketConfig cfg;
    cfg.base_rate = 2000.0;
    cfg.gamma_true = 0.5;
    cfg.seed = 12;
    Market m(cfg);
    double units = 0.0, expect = 0.0;
    for (long w = 0; w < 60; ++w) {
        const auto txns = m.simulate_round(PricingStrategy::single(15.0), w);
        if (w < 20) continue;  // returns reach steady state
        for (const auto& t : txns) units += static_cast<double>(t.units);
        expect += true_expected_volume(cfg, 15.0, w);
    }
    CHECK(units == doctest::Approx(expect).epsilon(0.03));
}

TEST_CASE("oracle price") {
    MarketConfig cfg;
    cfg.unit_cost = 10.0;
    cfg.elasticity = 0.1;
    const auto grid = PriceGrid::from_margins(10.0);
    const double p = oracle_price(cfg, grid, 0);
    double best = -1, arg = 0;
    for (double q : grid.prices()) {
        const double v = (q - 10.0) * true_expected_volume(cfg, q, 0);
        if (v > best) best = v, arg = q;
    }
    CHECK(p == arg);
    CHECK(p == doctest::Approx(20.0).epsilon(1e-9));

    cfg.elasticity = 1e-6;
    CHECK(oracle_price(cfg, grid, 0) == grid.back());
    CHECK(oracle_price(cfg, PriceGrid({13.0}), 0) == 13.0);
}

TEST_CASE("random prices earn less than the clairvoyant price") {
    double random_total = 0.0, oracle_total = 0.0;
    MarketConfig cfg;
    cfg.horizon = 30;
    const auto grid = PriceGrid::from_margins(cfg.unit_cost);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        cfg.seed = seed;
        RandomPricePolicy r(grid, seed);
        FixedPricePolicy o(oracle_price(cfg, grid, 0), "oracle");
        random_total += simulate_horizon(cfg, r).total_profit;
        oracle_total += simulate_horizon(cfg, o).total_profit;
    }
    CHECK(random_total < oracle_total);
}

TEST_CASE("seasonality shows in weekly volumes") {
    MarketConfig cfg;
    cfg.base_rate = 3000.0;
    cfg.horizon = 52;
    for (int w = 0; w < 52; ++w) cfg.annual_profile[static_cast<std::size_t>(w)] = 1.0 + 0.5 * std::sin(2 * M_PI * w / 52.0);
    cfg.weekly_profile = {1.0, 1.1, 1.2, 1.0, 0.9, 0.6, 0.4};
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        cfg.seed = seed;
        FixedPricePolicy fixed(15.0);
        const auto out = simulate_horizon(cfg, fixed);
        std::vector<double> vol;
        for (const auto& w : out.weeks) vol.push_back(static_cast<double>(std::accumulate(
                                             w.interval_units.begin(), w.interval_units.end(), std::int64_t{0})));
        CHECK(pearson(vol, cfg.annual_profile) >= 0.8);
    }
}

}
