#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pvdb/commands.hpp"
#include "pvdb/error.hpp"
#include "support.hpp"

using namespace pvdb;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("pvdb_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// A year of simulated history for two products, written as a transaction log.
fs::path make_history(const fs::path& dir) {
    std::vector<Transaction> all;
    for (const char* id : {"P1", "P2"}) {
        MarketConfig m;
        m.product_id = id;
        m.base_rate = 300;
        m.gamma_true = 0.5;
        m.private_baskets = {{1, 0.6}, {2, 0.25}, {6, 0.15}};
        m.warmup_weeks = 60;
        m.warmup_price = 16;
        m.horizon = 1;
        m.seed = stable_hash(id);
        FixedPricePolicy fixed(16);
        const auto out = simulate_horizon(m, fixed);
        all.insert(all.end(), out.log.begin(), out.log.end());
    }
    std::stable_sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.timestamp < b.timestamp; });
    const auto path = dir / "txns.csv";
    write_csv(path.string(), all);
    return path;
}

EngineConfig base_config(const fs::path& dir, const std::string& extra = "") {
    std::ofstream(dir / "config.json") << R"({"seed": 42, "paths": {"transactions": "txns.csv", "output_dir": "out"},
        "data_core": {"origin": "2021-01-04T00:00:00Z"})" << extra << "}";
    return load_config((dir / "config.json").string());
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config parsing") {
    const auto cfg = config_from_text(R"({"seed": 3, "paths": {"output_dir": "o"},
        "demand_model": {"price_bases": 5, "price_prior": {"location": 0.5, "spread": 2}},
        "price_optimizer": {"margin_min": 0.1, "margin_max": 1.0, "step_fraction": 0.05},
        "discount_engine": {"eta": 4, "gamma_default": 0.2, "need_override": 9, "period_days": 90},
        "market_sim": {"form": "logistic", "private_baskets": {"1": 0.5, "3": 0.5}, "horizon": 7},
        "evaluation": {"products_a": 2, "baseline": "oracle", "permutations": 50}})",
                                     "/base");
    CHECK(cfg.seed == 3);
    CHECK(cfg.output_dir == "/base/o");
    CHECK(cfg.pricing.basis.price_bases == 5);
    CHECK(cfg.pricing.basis.price_prior.spread == 2.0);
    CHECK(cfg.pricing.grid.step_fraction == 0.05);
    CHECK(cfg.pricing.discounts.eta == 4);
    CHECK(cfg.pricing.discounts.need_override == 9);
    CHECK(cfg.pricing.discounts.period_length == std::chrono::seconds(90 * 86400));
    CHECK(cfg.market.form == DemandForm::logistic);
    CHECK(cfg.market.private_baskets.at(3) == 0.5);
    CHECK(cfg.abtest.baseline == "oracle");
    CHECK_NOTHROW(validate(cfg));

    CHECK_THROWS_WITH_AS(config_from_text(R"({"seed": 1, "demand_model": {"price_base": 3}})"),
                         doctest::Contains("unknown key"), Error);
    CHECK_THROWS_AS(config_from_text("{not json"), Error);
    CHECK_THROWS_AS(config_from_text(R"({"seed": -4})"), Error);
    CHECK_THROWS_WITH_AS(validate(config_from_text("{}")), doctest::Contains("seed"), Error);
    CHECK_THROWS_AS(validate(config_from_text(R"({"seed": 1, "discount_engine": {"eta": 0}})")), Error);
    CHECK_THROWS_AS(validate(config_from_text(R"({"seed": 1, "paths": {"transactions": "/no/such.csv"}})")), Error);
}

TEST_CASE("price runs are reproducible and complete") {
    const auto dir = scratch("price");
    make_history(dir);
    auto cfg = base_config(dir);
    std::ostringstream log;
    REQUIRE(cmd_price(cfg, {{}, 60}, log) == 0);
    const auto d1 = slurp(dir / "out/decisions.csv"), s1 = slurp(dir / "out/strategies.csv");
    const auto p1 = slurp(dir / "out/posterior_P1.json");
    REQUIRE(cmd_price(cfg, {{}, 60}, log) == 0);
    CHECK(slurp(dir / "out/decisions.csv") == d1);
    CHECK(slurp(dir / "out/strategies.csv") == s1);
    CHECK(slurp(dir / "out/posterior_P1.json") == p1);
    CHECK(d1.rfind("week_index,product_id,price,sampled_volume,sampled_profit\n", 0) == 0);
    CHECK(std::count(d1.begin(), d1.end(), '\n') == 3);
    CHECK(fs::exists(dir / "out/posterior_P2.json"));

    cfg.seed = 43;
    REQUIRE(cmd_price(cfg, {{}, 60}, log) == 0);
    CHECK(slurp(dir / "out/posterior_P1.json") == p1);  // the fit does not depend on the seed
}

TEST_CASE("missing product fails with a non-zero status") {
    const auto dir = scratch("missing");
    make_history(dir);
    std::ostringstream log;
    CHECK(cmd_price(base_config(dir), {{"P1", "NOPE"}, 60}, log) != 0);
    CHECK(log.str().find("no transactions") != std::string::npos);
    // the good product is still written
    CHECK(slurp(dir / "out/decisions.csv").find("P1") != std::string::npos);
}

TEST_CASE("eta 1 posts the phase-1 price") {
    const auto dir = scratch("eta1");
    make_history(dir);
    const auto cfg = base_config(dir, R"(, "discount_engine": {"eta": 1})");
    std::ostringstream log;
    REQUIRE(cmd_price(cfg, {{"P1"}, 60}, log) == 0);
    std::istringstream d(slurp(dir / "out/decisions.csv")), s(slurp(dir / "out/strategies.csv"));
    std::string dl, sl;
    std::getline(d, dl);
    std::getline(d, dl);
    std::getline(s, sl);
    std::getline(s, sl);
    const auto field = [](const std::string& line, int k) {
        std::stringstream ss(line);
        std::string f;
        for (int i = 0; i <= k; ++i) std::getline(ss, f, ',');
        return f;
    };
    CHECK(field(sl, 2) == "1");
    CHECK(field(sl, 3) == field(dl, 2));
}

TEST_CASE("discounts around a given price") {
    const auto dir = scratch("disc");
    make_history(dir);
    std::ostringstream log;
    REQUIRE(cmd_discounts(base_config(dir), {{"P2"}, 60, 18.0}, log) == 0);
    const auto s = slurp(dir / "out/strategies.csv");
    CHECK(s.find("P2,60,1,") != std::string::npos);
    CHECK(cmd_discounts(base_config(dir), {{"P2"}, 60, 5.0}, log) != 0);
}

TEST_CASE("simulate, abtest and report smoke run") {
    const auto dir = scratch("sim");
    std::ofstream(dir / "config.json") << R"({"seed": 1, "paths": {"output_dir": "out"},
        "market_sim": {"horizon": 2, "warmup_weeks": 2, "warmup_price": 15, "base_rate": 50},
        "evaluation": {"products_a": 2, "products_b": 2, "permutations": 100}})";
    const auto cfg = load_config((dir / "config.json").string());
    std::ostringstream log;
    REQUIRE(cmd_simulate(cfg, log) == 0);
    for (const char* f : {"transactions.csv", "decisions.csv", "strategies.csv", "weekly.csv", "summary.txt"})
        CHECK(fs::exists(dir / "out" / f));
    REQUIRE(cmd_abtest(cfg, log) == 0);
    for (const char* f : {"product_margins.csv", "ab_report.csv", "ab_tests.csv", "ab_summary.txt",
                          "histogram_test_median.csv", "histogram_reference_mean.csv"})
        CHECK(fs::exists(dir / "out" / f));
    const auto report = slurp(dir / "out/ab_tests.csv");
    REQUIRE(cmd_report(cfg, log) == 0);
    CHECK(slurp(dir / "out/ab_tests.csv") == report);
}

TEST_CASE("executable exit status") {
    const auto dir = scratch("exe");
    make_history(dir);
    base_config(dir);
    const std::string exe = PVDB_CLI_PATH;
    const std::string cfg = (dir / "config.json").string();
    CHECK(std::system((exe + " --config " + cfg + " price --week 60 > /dev/null 2>&1").c_str()) == 0);
    CHECK(std::system((exe + " --config " + cfg + " price --week 60 --product NOPE > /dev/null 2>&1").c_str()) != 0);
    CHECK(std::system((exe + " --config /no/such.json simulate > /dev/null 2>&1").c_str()) != 0);
    CHECK(std::system((exe + " bogus > /dev/null 2>&1").c_str()) != 0);
    CHECK(std::system((exe + " --seed 2 --out " + (dir / "o2").string() + " simulate > /dev/null 2>&1").c_str()) == 0);
    CHECK(fs::exists(dir / "o2/summary.txt"));
}

}
