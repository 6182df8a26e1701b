#include "pvdb/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "pvdb/error.hpp"
#include "pvdb/evaluation.hpp"

namespace pvdb {

namespace {

namespace fs = std::filesystem;

// Buffers a whole artifact and writes it in one go, so a failed command never
// leaves a half-written file behind.
void write_file(const fs::path& path, const std::string& content) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cli", "cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error("cli", "short write on " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw Error("cli", "cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string file_safe(const std::string& id) {
    std::string s;
    for (char c : id) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return s;
}

std::uint64_t stream_seed(std::uint64_t master, const std::string& tag) {
    return derive_seed(master, stable_hash(tag));
}

Timestamp data_origin(const EngineConfig& cfg, std::span<const Transaction> txns) {
    if (cfg.origin) return *cfg.origin;
    return std::chrono::floor<std::chrono::days>(txns.front().timestamp);
}

std::vector<Transaction> load_transactions(const EngineConfig& cfg) {
    if (!cfg.transactions) throw Error("cli", "no transactions file configured (paths.transactions)");
    auto txns = ingest_csv_all(*cfg.transactions);
    if (txns.empty()) throw Error("data-core", "no transactions in " + *cfg.transactions);
    return txns;
}

std::vector<Transaction> product_history(std::span<const Transaction> all, const std::string& product,
                                         Timestamp before) {
    std::vector<Transaction> out;
    bool any = false;
    for (const auto& t : all) {
        if (t.product_id != product) continue;
        any = true;
        if (t.timestamp < before) out.push_back(t);
    }
    if (!any) throw Error("data-core", "no transactions for product " + product);
    if (out.empty()) throw Error("data-core", "no transactions for product " + product + " before the priced week");
    return out;
}

struct ProductFailure {
    std::string product;
    std::string what;
};

int report_failures(const std::vector<ProductFailure>& failures, std::ostream& log) {
    for (const auto& f : failures) log << "error: product " << f.product << ": " << f.what << '\n';
    return failures.empty() ? 0 : 1;
}

void write_warnings(std::ostream& log, const std::string& product, const std::vector<std::string>& w) {
    for (const auto& s : w) log << "warning: product " << product << ": " << s << '\n';
}

}  // namespace

int cmd_price(const EngineConfig& cfg, const PriceRequest& req, std::ostream& log) {
    validate(cfg);
    const auto all = load_transactions(cfg);
    const Timestamp origin = data_origin(cfg, all);
    if (req.week < 1) throw Error("cli", "week must be >= 1 so that some history precedes it");
    const Timestamp start = week_start(origin, req.week);
    const auto products = req.products.empty() ? product_ids(all) : req.products;

    std::ostringstream decisions, strategies;
    decisions << kDecisionHeader << '\n';
    const std::size_t columns = std::max<std::size_t>(cfg.pricing.discounts.eta, 1);
    strategies << strategy_header(columns) << '\n';
    std::vector<std::pair<std::string, std::string>> posteriors;
    std::vector<ProductFailure> failures;

    for (const auto& product : products) {
        try {
            const auto history = product_history(all, product, start);
            const double cost = latest_unit_cost(history);
            Rng rng(derive_seed(stream_seed(cfg.seed, "price:" + product), static_cast<std::uint64_t>(req.week)));
            const auto one = price_week(history, cfg.pricing, origin, req.week, cost, rng);

            std::vector<std::string> warnings;
            DiscountInputs inputs;
            inputs.eta = 1;
            if (cfg.pricing.discounts.eta > 1)
                inputs = estimate_discount_inputs(history, cfg.pricing.discounts, start, &warnings);
            const auto result = assemble_strategy(one.decision, inputs, cost);
            warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());
            write_warnings(log, product, warnings);

            write_decision_row(decisions, product, one.decision);
            write_strategy_row(strategies, product, req.week, result, columns);
            posteriors.emplace_back("posterior_" + file_safe(product) + ".json",
                                    posterior_to_json(one.posterior, one.spec));
            log << "priced " << product << " week " << req.week << ": p* = " << format_double(one.decision.price)
                << ", " << result.strategy.eta() << " interval(s)\n";
        } catch (const Error& e) {
            failures.push_back({product, e.what()});
        }
    }

    const fs::path out(cfg.output_dir);
    write_file(out / "decisions.csv", decisions.str());
    write_file(out / "strategies.csv", strategies.str());
    for (const auto& [name, text] : posteriors) write_file(fs::path(cfg.posterior_directory()) / name, text);
    return report_failures(failures, log);
}

int cmd_discounts(const EngineConfig& cfg, const DiscountRequest& req, std::ostream& log) {
    validate(cfg);
    const auto all = load_transactions(cfg);
    const Timestamp origin = data_origin(cfg, all);
    const Timestamp start = week_start(origin, req.week);
    const auto products = req.products.empty() ? product_ids(all) : req.products;

    std::ostringstream strategies;
    const std::size_t columns = std::max<std::size_t>(cfg.pricing.discounts.eta, 1);
    strategies << strategy_header(columns) << '\n';
    std::vector<ProductFailure> failures;
    for (const auto& product : products) {
        try {
            const auto history = product_history(all, product, start);
            const double cost = latest_unit_cost(history);
            if (!(req.price > cost))
                throw Error("discount-engine", "price " + format_double(req.price) + " does not exceed unit cost " +
                                                   format_double(cost));
            std::vector<std::string> warnings;
            DiscountInputs inputs;
            inputs.eta = 1;
            if (cfg.pricing.discounts.eta > 1)
                inputs = estimate_discount_inputs(history, cfg.pricing.discounts, start, &warnings);
            const auto result = assemble_strategy({req.week, req.price, 0.0, 0.0}, inputs, cost);
            warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());
            write_warnings(log, product, warnings);
            write_strategy_row(strategies, product, req.week, result, columns);
        } catch (const Error& e) {
            failures.push_back({product, e.what()});
        }
    }
    write_file(fs::path(cfg.output_dir) / "strategies.csv", strategies.str());
    return report_failures(failures, log);
}

namespace {

StrategyResult plain_result(const PricingStrategy& s) {
    StrategyResult r;
    r.strategy = s;
    r.scheme.thresholds = s.thresholds;
    r.schedule.prices = s.prices;
    r.schedule.discounts.assign(s.eta(), 0.0);
    r.gamma = 0.0;
    r.need = 1;
    return r;
}

void write_weekly(std::ostream& out, const std::string& set, const SimOutcome& o) {
    const auto row = [&](const char* phase, const WeekRecord& w) {
        out << set << ',' << o.config.product_id << ',' << w.week << ',' << phase << ','
            << format_double(w.decision.price) << ',' << w.strategy.eta() << ',' << format_double(w.profit) << ','
            << w.n_transactions << '\n';
    };
    for (const auto& w : o.warmup) row("warmup", w);
    for (const auto& w : o.weeks) row("campaign", w);
}

constexpr const char* kWeeklyHeader = "set,product_id,week_index,phase,average_price,intervals,profit,n_transactions";

}  // namespace

int cmd_simulate(const EngineConfig& cfg, std::ostream& log) {
    validate(cfg);
    MarketConfig market = cfg.market;
    market.seed = stream_seed(cfg.seed, "market:" + market.product_id);
    PvdbPolicy policy(cfg.pricing, stream_seed(cfg.seed, "policy:" + market.product_id));
    const auto outcome = simulate_horizon(market, policy);

    std::ostringstream txns, decisions, strategies, weekly, summary;
    write_csv(txns, outcome.log);
    decisions << kDecisionHeader << '\n';
    const std::size_t columns = std::max<std::size_t>(cfg.pricing.discounts.eta, 1);
    strategies << strategy_header(columns) << '\n';
    for (std::size_t i = 0; i < outcome.weeks.size(); ++i) {
        write_decision_row(decisions, market.product_id, outcome.weeks[i].decision);
        write_strategy_row(strategies, market.product_id, outcome.weeks[i].week, policy.results()[i], columns);
    }
    weekly << kWeeklyHeader << '\n';
    write_weekly(weekly, "sim", outcome);

    const auto grid = cfg.pricing.grid.build(market.unit_cost);
    double oracle_profit = 0.0;
    for (const auto& w : outcome.weeks) {
        const double p = oracle_price(market, grid, w.week);
        oracle_profit += (p - market.unit_cost) * true_expected_volume(market, p, w.week);
    }
    summary << "simulated campaign for " << market.product_id << '\n'
            << "  weeks: warmup " << market.warmup_weeks << ", campaign " << market.horizon << '\n'
            << "  realized campaign profit: " << format_double(outcome.total_profit) << '\n'
            << "  clairvoyant expected profit: " << format_double(oracle_profit) << '\n'
            << "  ratio: " << format_double(oracle_profit > 0 ? outcome.total_profit / oracle_profit : 0.0) << '\n'
            << "  transactions: " << outcome.log.size() << '\n';

    const fs::path out(cfg.output_dir);
    write_file(out / "transactions.csv", txns.str());
    write_file(out / "decisions.csv", decisions.str());
    write_file(out / "strategies.csv", strategies.str());
    write_file(out / "weekly.csv", weekly.str());
    write_file(out / "summary.txt", summary.str());
    log << summary.str();
    return 0;
}

namespace {

struct ArmRun {
    std::string set;
    SimOutcome outcome;
    std::vector<StrategyResult> results;
    ProductMargins margins;
};

double mean_weekly(const std::map<long, double>& series, long first, long last) {
    double s = 0.0;
    long n = 0;
    for (long w = first; w < last; ++w) {
        const auto it = series.find(w);
        s += it == series.end() ? 0.0 : it->second;
        ++n;
    }
    return n > 0 ? s / static_cast<double>(n) : 0.0;
}

ArmRun run_arm(const EngineConfig& cfg, const std::string& set, int index) {
    const std::string id = set + std::to_string(index);
    MarketConfig m = cfg.market;
    m.product_id = id;
    m.seed = stream_seed(cfg.seed, "market:" + id);
    Rng jitter(stream_seed(cfg.seed, "jitter:" + id));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double r1 = u(jitter), r2 = u(jitter);
    m.base_rate *= std::exp(cfg.abtest.base_rate_spread * r1);
    m.elasticity *= std::exp(cfg.abtest.elasticity_spread * r2);

    const auto grid = cfg.pricing.grid.build(m.unit_cost);
    std::unique_ptr<PricingPolicy> policy;
    PvdbPolicy* pvdb = nullptr;
    if (set == "A") {
        auto p = std::make_unique<PvdbPolicy>(cfg.pricing, stream_seed(cfg.seed, "policy:" + id));
        pvdb = p.get();
        policy = std::move(p);
    } else if (cfg.abtest.baseline == "oracle") {
        policy = std::make_unique<FixedPricePolicy>(oracle_price(m, grid, m.warmup_weeks), "oracle");
    } else if (cfg.abtest.baseline == "random") {
        policy = std::make_unique<RandomPricePolicy>(grid, stream_seed(cfg.seed, "policy:" + id));
    } else {
        if (!(m.warmup_price > m.unit_cost))
            throw Error("cli", "fixed baseline needs market_sim.warmup_price above the unit cost");
        policy = std::make_unique<FixedPricePolicy>(m.warmup_price, "fixed");
    }

    ArmRun run{set, simulate_horizon(m, *policy), {}, {}};
    const auto& o = run.outcome;
    std::vector<StrategyRecord> history;
    for (const auto& w : o.warmup) history.push_back({id, w.week, w.strategy});
    for (std::size_t i = 0; i < o.weeks.size(); ++i) {
        history.push_back({id, o.weeks[i].week, o.weeks[i].strategy});
        run.results.push_back(pvdb ? pvdb->results()[i] : plain_result(o.weeks[i].strategy));
    }
    const auto margins = weekly_net_margins(o.log, history, m.origin);
    const auto& series = margins.at(id);
    const long first = m.warmup_weeks;
    run.margins = {set, id, mean_weekly(series, 0, first), mean_weekly(series, first, first + m.horizon)};
    return run;
}

std::string test_tag(const PermutationTestResult& t) { return to_string(t.statistic); }

void write_report_files(const fs::path& out, const ABReport& report) {
    std::ostringstream csv, tests, summary;
    write_ab_report_csv(csv, report);
    write_ab_tests_csv(tests, report);
    write_ab_summary(summary, report);
    write_file(out / "ab_report.csv", csv.str());
    write_file(out / "ab_tests.csv", tests.str());
    write_file(out / "ab_summary.txt", summary.str());
    for (const auto& [phase, list] : {std::pair{"reference", &report.pre_tests}, std::pair{"test", &report.post_tests}})
        for (const auto& t : *list) {
            std::ostringstream h;
            write_histogram_csv(h, t);
            write_file(out / ("histogram_" + std::string(phase) + "_" + test_tag(t) + ".csv"), h.str());
        }
}

PermutationOptions permutation_options(const EngineConfig& cfg) {
    PermutationOptions o;
    o.permutations = cfg.abtest.permutations;
    o.seed = stream_seed(cfg.seed, "permutation");
    o.workers = cfg.abtest.workers;
    o.keep_permuted = true;
    return o;
}

}  // namespace

int cmd_abtest(const EngineConfig& cfg, std::ostream& log) {
    validate(cfg);
    std::vector<std::pair<std::string, int>> arms;
    for (int i = 0; i < cfg.abtest.products_a; ++i) arms.emplace_back("A", i);
    for (int i = 0; i < cfg.abtest.products_b; ++i) arms.emplace_back("B", i);

    // Products are independent; results land in fixed slots so the output
    // does not depend on the worker count.
    std::vector<std::optional<ArmRun>> runs(arms.size());
    std::vector<std::string> errors(arms.size());
    const auto work = [&](std::size_t i) {
        try {
            runs[i] = run_arm(cfg, arms[i].first, arms[i].second);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(cfg.abtest.workers, static_cast<unsigned>(arms.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < arms.size(); ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < arms.size(); i += workers) work(i);
            });
        for (auto& t : pool) t.join();
    }
    std::vector<ProductFailure> failures;
    for (std::size_t i = 0; i < arms.size(); ++i)
        if (!runs[i]) failures.push_back({arms[i].first + std::to_string(arms[i].second), errors[i]});
    if (!failures.empty()) return report_failures(failures, log);

    std::ostringstream txns, decisions, strategies, weekly, margins;
    std::vector<Transaction> all_log;
    decisions << kDecisionHeader << '\n';
    const std::size_t columns = std::max<std::size_t>(cfg.pricing.discounts.eta, 1);
    strategies << strategy_header(columns) << '\n';
    weekly << kWeeklyHeader << '\n';
    std::vector<ProductMargins> products;
    for (const auto& r : runs) {
        const auto& o = r->outcome;
        all_log.insert(all_log.end(), o.log.begin(), o.log.end());
        for (std::size_t i = 0; i < o.weeks.size(); ++i) {
            write_decision_row(decisions, o.config.product_id, o.weeks[i].decision);
            write_strategy_row(strategies, o.config.product_id, o.weeks[i].week, r->results[i], columns);
        }
        write_weekly(weekly, r->set, o);
        products.push_back(r->margins);
    }
    write_csv(txns, all_log);
    write_product_margins_csv(margins, products);

    const auto report = build_ab_report(products, permutation_options(cfg));
    const fs::path out(cfg.output_dir);
    write_file(out / "transactions.csv", txns.str());
    write_file(out / "decisions.csv", decisions.str());
    write_file(out / "strategies.csv", strategies.str());
    write_file(out / "weekly.csv", weekly.str());
    write_file(out / "product_margins.csv", margins.str());
    write_report_files(out, report);
    write_ab_summary(log, report);
    return 0;
}

int cmd_report(const EngineConfig& cfg, std::ostream& log) {
    validate(cfg);
    const fs::path out(cfg.output_dir);
    std::ifstream in(out / "product_margins.csv");
    if (!in) throw Error("evaluation", "cannot read " + (out / "product_margins.csv").string());
    const auto report = build_ab_report(read_product_margins_csv(in), permutation_options(cfg));
    write_report_files(out, report);
    write_ab_summary(log, report);
    return 0;
}

}  // namespace pvdb
