// pvdb: weekly pricing, volume discounts, simulated campaigns and A/B reports.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pvdb/commands.hpp"
#include "pvdb/error.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Thompson-sampled pricing with volume discounts"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    app.add_option("--config", config_path, "engine configuration (JSON)");
    app.add_option("--seed", seed, "master seed, overrides the config");
    app.add_option("--out", out_dir, "output directory, overrides the config");

    std::vector<std::string> products;
    long week = 0;
    double price = 0.0;
    std::optional<std::string> transactions;

    auto* price_cmd = app.add_subcommand("price", "both phases for one week: decisions.csv, strategies.csv, posteriors");
    price_cmd->add_option("--product", products, "product id (repeatable; default: all)");
    price_cmd->add_option("--week", week, "week index from the data origin")->required();
    price_cmd->add_option("--transactions", transactions, "transaction CSV, overrides the config");

    auto* disc_cmd = app.add_subcommand("discounts", "volume discounts around a given average price");
    disc_cmd->add_option("--product", products, "product id (repeatable; default: all)");
    disc_cmd->add_option("--week", week, "week index from the data origin")->required();
    disc_cmd->add_option("--price", price, "average price p*")->required();
    disc_cmd->add_option("--transactions", transactions, "transaction CSV, overrides the config");

    auto* sim_cmd = app.add_subcommand("simulate", "closed-loop run on the configured market");
    auto* ab_cmd = app.add_subcommand("abtest", "simulated A/B campaign");
    auto* report_cmd = app.add_subcommand("report", "rebuild the A/B report from product_margins.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        pvdb::EngineConfig cfg = config_path.empty() ? pvdb::config_from_text("{}") : pvdb::load_config(config_path);
        if (seed) {
            cfg.seed = *seed;
            cfg.has_seed = true;
        }
        if (out_dir) cfg.output_dir = *out_dir;
        if (transactions) cfg.transactions = *transactions;

        if (*price_cmd) return pvdb::cmd_price(cfg, {products, week}, std::cerr);
        if (*disc_cmd) return pvdb::cmd_discounts(cfg, {products, week, price}, std::cerr);
        if (*sim_cmd) return pvdb::cmd_simulate(cfg, std::cout);
        if (*ab_cmd) return pvdb::cmd_abtest(cfg, std::cout);
        if (*report_cmd) return pvdb::cmd_report(cfg, std::cout);
    } catch (const pvdb::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
