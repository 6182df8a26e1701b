#pragma once

// A/B statistics: permutation tests on per-product margins, realized
// weekly profits from a log, basket-share shifts.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pvdb/data_core.hpp"
#include "pvdb/discount_engine.hpp"
#include "pvdb/strategy.hpp"

namespace pvdb {

enum class Statistic { median_difference, mean_difference };
enum class Alternative { greater, two_sided };

std::string to_string(Statistic s);
std::string to_string(Alternative a);

struct PermutationTestResult {
    Statistic statistic = Statistic::median_difference;
    Alternative alternative = Alternative::greater;
    double observed = 0.0;
    std::size_t permutations = 0;
    std::size_t exceedances = 0;
    double p_value = 1.0;
    std::uint64_t seed = 0;
    bool degenerate = false;  // every value identical
    /// Permuted statistics in draw order, kept when requested.
    std::vector<double> permuted;
};

struct PermutationOptions {
    Statistic statistic = Statistic::median_difference;
    Alternative alternative = Alternative::greater;
    std::size_t permutations = 10000;
    std::uint64_t seed = 0;
    /// Worker threads; the result does not depend on it.
    unsigned workers = 1;
    bool keep_permuted = false;
};

/// Permutations are drawn in fixed blocks of kPermutationBlock, each with a
/// sub-seed derived from the master seed and the block index.
inline constexpr std::size_t kPermutationBlock = 1024;

/// stat(A) - stat(B); p = (1 + #{perm >= obs}) / (R + 1) one-sided,
/// |perm| >= |obs| two-sided.
PermutationTestResult permutation_test(std::span<const double> group_a,
                                       std::span<const double> group_b,
                                       const PermutationOptions& opts);

double median(std::vector<double> values);
double mean(std::span<const double> values);
double group_statistic(Statistic s, std::span<const double> a, std::span<const double> b);

struct StrategyRecord {
    std::string product_id;
    long week = 0;
    PricingStrategy strategy;
};

/// Weekly profit per product from realized transactions, sum of
/// (p - c) * units. Weeks listed in the strategy history but without sales
/// get 0. Throws pvdb::Error when a price matches no strategy price for the
/// basket's interval.
std::map<std::string, std::map<long, double>> weekly_net_margins(
    std::span<const Transaction> log, std::span<const StrategyRecord> history, Timestamp origin);

struct BetaShift {
    std::vector<std::int64_t> thresholds;
    std::vector<double> before;
    std::vector<double> after;
    std::vector<double> delta;      // after - before
    double units_before = 0.0;
    double units_after = 0.0;
    double delta_units = 0.0;
    double relative_units = 0.0;    // delta / before
};

BetaShift beta_shift_report(const BasketDistribution& before, const BasketDistribution& after,
                            const ThresholdScheme& scheme);

struct ProductMargins {
    std::string set;  // "A" or "B"
    std::string product_id;
    double reference = 0.0;  // average weekly margin before the campaign
    double test = 0.0;       // average weekly margin during the campaign
};

struct ABReport {
    std::vector<ProductMargins> products;
    double mean_a = 0.0;
    double mean_b = 0.0;
    double ratio = 0.0;  // mean_a / mean_b
    double improved_share_a = 0.0;
    double improved_share_b = 0.0;
    std::vector<PermutationTestResult> pre_tests;   // median, mean on reference margins
    std::vector<PermutationTestResult> post_tests;  // median, mean on test margins
};

ABReport build_ab_report(std::vector<ProductMargins> products, const PermutationOptions& base);

/// key,value rows: set sizes, mean margins, ratio, improvement shares.
void write_ab_report_csv(std::ostream& out, const ABReport& r);
/// One row per permutation test.
void write_ab_tests_csv(std::ostream& out, const ABReport& r);
/// set,product_id,reference_margin,test_margin
void write_product_margins_csv(std::ostream& out, std::span<const ProductMargins> products);
std::vector<ProductMargins> read_product_margins_csv(std::istream& in);
void write_ab_summary(std::ostream& out, const ABReport& r);
/// bin_lo,bin_hi,count over the permuted statistics, plus the observed value.
void write_histogram_csv(std::ostream& out, const PermutationTestResult& r, std::size_t bins = 50);

}  // namespace pvdb
