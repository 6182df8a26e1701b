#pragma once

// Transaction model, CSV ingestion and the aggregates consumed by both
// pricing phases.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pvdb/time.hpp"

namespace pvdb {

struct Transaction {
    Timestamp timestamp;
    std::string product_id;
    std::string customer_id;
    double unit_price = 0.0;
    std::int64_t units = 1;
    double unit_cost = 0.0;

    double revenue() const noexcept { return unit_price * static_cast<double>(units); }
    friend bool operator==(const Transaction&, const Transaction&) = default;
};

/// One 7-day round: volume-weighted average price and total volume.
struct WeeklyAggregate {
    long week_index = 0;
    double avg_price = 0.0;
    double total_volume = 0.0;
    std::int64_t n_transactions = 0;
};

inline constexpr const char* kTransactionHeader =
    "timestamp,product_id,customer_id,unit_price,units,unit_cost";

/// Reads a transaction log and keeps the rows of `product_id`, stably sorted
/// by timestamp. Throws IngestError naming the offending line.
std::vector<Transaction> ingest_csv(const std::string& path, const std::string& product_id);

/// All rows regardless of product, stably sorted by timestamp.
std::vector<Transaction> ingest_csv_all(const std::string& path);
std::vector<Transaction> parse_csv(std::istream& in);

/// Writes the log in ingest format; prices use shortest round-trip decimals
/// so a re-read reproduces every double exactly.
void write_csv(std::ostream& out, std::span<const Transaction> txns);
void write_csv(const std::string& path, std::span<const Transaction> txns);

/// Distinct product ids in first-seen order.
std::vector<std::string> product_ids(std::span<const Transaction> txns);

/// Buckets time-sorted transactions into 7-day rounds starting at `origin`.
/// Empty rounds produce no aggregate.
std::vector<WeeklyAggregate> aggregate_weekly(std::span<const Transaction> txns, Timestamp origin);

/// Unit cost to price against: the cost on the latest transaction.
double latest_unit_cost(std::span<const Transaction> txns);

/// Empirical distribution of units per basket. Counts are kept exactly so
/// q(z) = B * beta_z is recoverable without rounding.
class BasketDistribution {
public:
    BasketDistribution() = default;
    explicit BasketDistribution(std::map<std::int64_t, std::int64_t> counts);

    std::int64_t n_baskets() const noexcept { return n_baskets_; }
    std::int64_t count(std::int64_t z) const noexcept;
    double beta(std::int64_t z) const noexcept;
    /// Mean units per basket, sum_z beta_z * z.
    double mean_volume() const noexcept;
    std::int64_t max_volume() const noexcept;
    bool empty() const noexcept { return n_baskets_ == 0; }

    const std::map<std::int64_t, std::int64_t>& counts() const noexcept { return counts_; }
    std::map<std::int64_t, double> proportions() const;

private:
    std::map<std::int64_t, std::int64_t> counts_;
    std::int64_t n_baskets_ = 0;
};

/// Every transaction is one basket. Throws on empty input.
BasketDistribution basket_distribution(std::span<const Transaction> txns);

/// Purchase counts per customer for a fixed set of disjoint periods.
class CustomerIndex {
public:
    CustomerIndex(std::span<const Transaction> txns, std::vector<Interval> periods);

    const std::vector<Interval>& periods() const noexcept { return periods_; }
    /// Position of `period` in periods(); throws if absent.
    std::size_t period_index(const Interval& period) const;

    /// H(g, T): purchases by `customer` in period `p`.
    std::int64_t purchases(const std::string& customer, std::size_t p) const;
    /// sum_g H(g, T).
    std::int64_t total_purchases(std::size_t p) const;
    /// h(T): customers with at least one purchase in period `p`.
    std::set<std::string> customers(std::size_t p) const;
    std::size_t unique_customers(std::size_t p) const { return counts_.at(p).size(); }
    /// |h(a) ∩ h(b)|
    std::size_t overlap(std::size_t a, std::size_t b) const;

private:
    std::vector<Interval> periods_;
    std::vector<std::map<std::string, std::int64_t>> counts_;
};

CustomerIndex build_customer_index(std::span<const Transaction> txns, std::vector<Interval> periods);

/// Mean total units bought per distinct customer.
double mean_units_per_customer(std::span<const Transaction> txns);

/// Transactions in [period.begin, period.end).
std::vector<Transaction> slice(std::span<const Transaction> txns, const Interval& period);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace pvdb
