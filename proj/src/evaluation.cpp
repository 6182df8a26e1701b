#include "pvdb/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <thread>

#include "pvdb/error.hpp"
#include "pvdb/kernels.hpp"
#include "pvdb/random.hpp"

namespace pvdb {

std::string to_string(Statistic s) { return s == Statistic::median_difference ? "median" : "mean"; }
std::string to_string(Alternative a) { return a == Alternative::greater ? "greater" : "two-sided"; }

double median(std::vector<double> v) {
    if (v.empty()) throw Error("evaluation", "median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(std::span<const double> v) {
    if (v.empty()) throw Error("evaluation", "mean of an empty sample");
    return kernels::lane_sum(v) / static_cast<double>(v.size());
}

double group_statistic(Statistic s, std::span<const double> a, std::span<const double> b) {
    if (s == Statistic::mean_difference) return mean(a) - mean(b);
    return median({a.begin(), a.end()}) - median({b.begin(), b.end()});
}

namespace {

struct BlockResult {
    std::size_t exceedances = 0;
    std::vector<double> permuted;
};

double permuted_statistic(Statistic s, std::span<const double> pooled, std::span<std::size_t> idx, std::size_t n_a,
                          std::vector<double>& scratch) {
    const auto ia = idx.subspan(0, n_a);
    const auto ib = idx.subspan(n_a);
    if (s == Statistic::mean_difference) {
        // Sorting makes the sums depend on group membership only.
        std::sort(ia.begin(), ia.end());
        std::sort(ib.begin(), ib.end());
        return kernels::gather_sum(pooled, ia) / static_cast<double>(ia.size()) -
               kernels::gather_sum(pooled, ib) / static_cast<double>(ib.size());
    }
    scratch.clear();
    for (auto i : ia) scratch.push_back(pooled[i]);
    const double ma = median(scratch);
    scratch.clear();
    for (auto i : ib) scratch.push_back(pooled[i]);
    return ma - median(scratch);
}

}  // namespace

PermutationTestResult permutation_test(std::span<const double> group_a, std::span<const double> group_b,
                                       const PermutationOptions& opts) {
    if (group_a.empty() || group_b.empty()) throw Error("evaluation", "permutation test needs two non-empty groups");
    if (opts.permutations < 1) throw Error("evaluation", "permutation count must be >= 1");

    PermutationTestResult res;
    res.statistic = opts.statistic;
    res.alternative = opts.alternative;
    res.permutations = opts.permutations;
    res.seed = opts.seed;
    res.observed = group_statistic(opts.statistic, group_a, group_b);

    std::vector<double> pooled(group_a.begin(), group_a.end());
    pooled.insert(pooled.end(), group_b.begin(), group_b.end());
    if (std::all_of(pooled.begin(), pooled.end(), [&](double x) { return x == pooled.front(); })) {
        res.degenerate = true;
        res.exceedances = opts.permutations;
        res.p_value = 1.0;
        return res;
    }

    const std::size_t n_blocks = (opts.permutations + kPermutationBlock - 1) / kPermutationBlock;
    std::vector<BlockResult> blocks(n_blocks);
    const auto run_block = [&](std::size_t b) {
        Rng rng(derive_seed(opts.seed, b));
        std::vector<std::size_t> idx(pooled.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::vector<double> scratch;
        const std::size_t begin = b * kPermutationBlock;
        const std::size_t end = std::min(opts.permutations, begin + kPermutationBlock);
        auto& out = blocks[b];
        for (std::size_t r = begin; r < end; ++r) {
            std::shuffle(idx.begin(), idx.end(), rng);
            const double stat = permuted_statistic(opts.statistic, pooled, idx, group_a.size(), scratch);
            const bool hit = opts.alternative == Alternative::greater ? stat >= res.observed
                                                                      : std::abs(stat) >= std::abs(res.observed);
            out.exceedances += hit ? 1 : 0;
            if (opts.keep_permuted) out.permuted.push_back(stat);
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(opts.workers, static_cast<unsigned>(n_blocks)));
    if (workers == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) run_block(b);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t b = w; b < n_blocks; b += workers) run_block(b);
            });
        for (auto& t : pool) t.join();
    }

    for (auto& b : blocks) {
        res.exceedances += b.exceedances;
        res.permuted.insert(res.permuted.end(), b.permuted.begin(), b.permuted.end());
    }
    res.p_value = static_cast<double>(1 + res.exceedances) / static_cast<double>(opts.permutations + 1);
    return res;
}

std::map<std::string, std::map<long, double>> weekly_net_margins(std::span<const Transaction> log,
                                                                 std::span<const StrategyRecord> history,
                                                                 Timestamp origin) {
    std::map<std::pair<std::string, long>, const PricingStrategy*> lookup;
    std::map<std::string, std::map<long, double>> out;
    for (const auto& rec : history) {
        lookup[{rec.product_id, rec.week}] = &rec.strategy;
        out[rec.product_id][rec.week];
    }
    for (const auto& t : log) {
        const long week = week_index(origin, t.timestamp);
        const auto it = lookup.find({t.product_id, week});
        if (it == lookup.end())
            throw Error("evaluation", "no strategy for product " + t.product_id + " in week " + std::to_string(week));
        const double expected = it->second->unit_price(t.units);
        if (t.unit_price != expected)
            throw Error("evaluation", "data inconsistency: " + t.product_id + " sold " + std::to_string(t.units) +
                                          " units at " + format_double(t.unit_price) + " in week " +
                                          std::to_string(week) + ", strategy price is " + format_double(expected));
        out[t.product_id][week] += (t.unit_price - t.unit_cost) * static_cast<double>(t.units);
    }
    return out;
}

BetaShift beta_shift_report(const BasketDistribution& before, const BasketDistribution& after,
                            const ThresholdScheme& scheme) {
    const auto sb = interval_stats(before, scheme);
    const auto sa = interval_stats(after, scheme);
    BetaShift r;
    r.thresholds = scheme.thresholds;
    r.before = sb.share;
    r.after = sa.share;
    for (std::size_t k = 0; k < r.before.size(); ++k) r.delta.push_back(r.after[k] - r.before[k]);
    r.units_before = before.mean_volume();
    r.units_after = after.mean_volume();
    r.delta_units = r.units_after - r.units_before;
    r.relative_units = r.units_before > 0.0 ? r.delta_units / r.units_before : 0.0;
    return r;
}

ABReport build_ab_report(std::vector<ProductMargins> products, const PermutationOptions& base) {
    ABReport r;
    r.products = std::move(products);
    std::vector<double> ref_a, ref_b, test_a, test_b;
    std::size_t improved_a = 0, improved_b = 0;
    for (const auto& p : r.products) {
        const bool a = p.set == "A";
        if (!a && p.set != "B") throw Error("evaluation", "product set must be A or B, got '" + p.set + "'");
        (a ? ref_a : ref_b).push_back(p.reference);
        (a ? test_a : test_b).push_back(p.test);
        if (p.test > p.reference) ++(a ? improved_a : improved_b);
    }
    if (test_a.empty() || test_b.empty()) throw Error("evaluation", "both product sets must be non-empty");
    r.mean_a = mean(test_a);
    r.mean_b = mean(test_b);
    r.ratio = r.mean_a / r.mean_b;
    r.improved_share_a = static_cast<double>(improved_a) / static_cast<double>(test_a.size());
    r.improved_share_b = static_cast<double>(improved_b) / static_cast<double>(test_b.size());

    for (Statistic s : {Statistic::median_difference, Statistic::mean_difference}) {
        auto o = base;
        o.statistic = s;
        r.pre_tests.push_back(permutation_test(ref_a, ref_b, o));
        r.post_tests.push_back(permutation_test(test_a, test_b, o));
    }
    return r;
}

void write_ab_report_csv(std::ostream& out, const ABReport& r) {
    std::size_t na = 0;
    for (const auto& p : r.products) na += p.set == "A" ? 1 : 0;
    out << "key,value\n";
    out << "products_a," << na << '\n';
    out << "products_b," << r.products.size() - na << '\n';
    out << "mean_weekly_margin_a," << format_double(r.mean_a) << '\n';
    out << "mean_weekly_margin_b," << format_double(r.mean_b) << '\n';
    out << "ratio_a_over_b," << format_double(r.ratio) << '\n';
    out << "improved_share_a," << format_double(r.improved_share_a) << '\n';
    out << "improved_share_b," << format_double(r.improved_share_b) << '\n';
}

void write_ab_tests_csv(std::ostream& out, const ABReport& r) {
    out << "phase,statistic,alternative,observed,permutations,exceedances,p_value,seed,degenerate\n";
    const auto row = [&](const char* phase, const PermutationTestResult& t) {
        out << phase << ',' << to_string(t.statistic) << ',' << to_string(t.alternative) << ','
            << format_double(t.observed) << ',' << t.permutations << ',' << t.exceedances << ','
            << format_double(t.p_value) << ',' << t.seed << ',' << (t.degenerate ? 1 : 0) << '\n';
    };
    for (const auto& t : r.pre_tests) row("reference", t);
    for (const auto& t : r.post_tests) row("test", t);
}

void write_product_margins_csv(std::ostream& out, std::span<const ProductMargins> products) {
    out << "set,product_id,reference_margin,test_margin\n";
    for (const auto& p : products)
        out << p.set << ',' << p.product_id << ',' << format_double(p.reference) << ',' << format_double(p.test) << '\n';
}

std::vector<ProductMargins> read_product_margins_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("set,product_id,reference_margin,test_margin", 0) != 0)
        throw Error("evaluation", "product margins file lacks its header");
    std::vector<ProductMargins> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        for (;;) {
            const auto c = line.find(',', start);
            f.push_back(line.substr(start, c - start));
            if (c == std::string::npos) break;
            start = c + 1;
        }
        if (f.size() != 4) throw Error("evaluation", "line " + std::to_string(line_no) + ": expected 4 fields");
        ProductMargins p{f[0], f[1], 0.0, 0.0};
        for (int k = 0; k < 2; ++k) {
            const auto& s = f[static_cast<std::size_t>(2 + k)];
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || ptr != s.data() + s.size())
                throw Error("evaluation", "line " + std::to_string(line_no) + ": bad number '" + s + "'");
            (k == 0 ? p.reference : p.test) = v;
        }
        out.push_back(std::move(p));
    }
    return out;
}

void write_ab_summary(std::ostream& out, const ABReport& r) {
    std::size_t na = 0;
    for (const auto& p : r.products) na += p.set == "A" ? 1 : 0;
    out << "A/B campaign summary\n";
    out << "  products: A = " << na << ", B = " << r.products.size() - na << '\n';
    out << "  mean weekly net margin: A = " << format_double(r.mean_a) << ", B = " << format_double(r.mean_b) << '\n';
    out << "  ratio A/B = " << format_double(r.ratio) << '\n';
    out << "  improved vs. reference period: A = " << format_double(r.improved_share_a)
        << ", B = " << format_double(r.improved_share_b) << '\n';
    const auto line = [&](const char* phase, const PermutationTestResult& t) {
        out << "  " << phase << ' ' << to_string(t.statistic) << " (" << to_string(t.alternative)
            << ", R = " << t.permutations << "): observed " << format_double(t.observed) << ", p = "
            << format_double(t.p_value) << (t.degenerate ? " [degenerate]" : "") << '\n';
    };
    for (const auto& t : r.pre_tests) line("before campaign", t);
    for (const auto& t : r.post_tests) line("during campaign", t);
}

void write_histogram_csv(std::ostream& out, const PermutationTestResult& r, std::size_t bins) {
    out << "bin_lo,bin_hi,count\n";
    if (r.permuted.empty() || bins == 0) return;
    double lo = std::min(r.observed, *std::min_element(r.permuted.begin(), r.permuted.end()));
    double hi = std::max(r.observed, *std::max_element(r.permuted.begin(), r.permuted.end()));
    if (hi == lo) hi = lo + 1.0;
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<std::size_t> counts(bins, 0);
    for (double x : r.permuted) {
        auto b = static_cast<std::size_t>((x - lo) / width);
        ++counts[std::min(b, bins - 1)];
    }
    for (std::size_t b = 0; b < bins; ++b)
        out << format_double(lo + width * static_cast<double>(b)) << ','
            << format_double(lo + width * static_cast<double>(b + 1)) << ',' << counts[b] << '\n';
}

}  // namespace pvdb
