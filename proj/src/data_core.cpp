#include "pvdb/data_core.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "pvdb/error.hpp"

namespace pvdb {

namespace {

constexpr std::array<std::string_view, 6> kColumns{"timestamp", "product_id", "customer_id",
                                                   "unit_price", "units",      "unit_cost"};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double parse_number(std::string_view s, std::size_t line, std::string_view column) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        throw IngestError(line, "bad " + std::string(column) + " '" + std::string(s) + "'");
    return v;
}

std::int64_t parse_integer(std::string_view s, std::size_t line, std::string_view column) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw IngestError(line, "bad " + std::string(column) + " '" + std::string(s) + "'");
    return v;
}

std::vector<Transaction> parse_filtered(std::istream& in, const std::string* product) {
    std::string line;
    std::size_t line_no = 0;
    std::array<std::size_t, kColumns.size()> column_of{};
    std::size_t n_columns = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw IngestError(line_no, "missing header row");
    {
        const auto header = split(line);
        n_columns = header.size();
        column_of.fill(n_columns);
        for (std::size_t i = 0; i < header.size(); ++i) {
            const auto it = std::find(kColumns.begin(), kColumns.end(), header[i]);
            if (it == kColumns.end())
                throw IngestError(line_no, "unknown column '" + std::string(header[i]) + "'");
            const auto c = static_cast<std::size_t>(it - kColumns.begin());
            if (column_of[c] != n_columns)
                throw IngestError(line_no, "duplicate column '" + std::string(header[i]) + "'");
            column_of[c] = i;
        }
        for (std::size_t c = 0; c < kColumns.size(); ++c)
            if (column_of[c] == n_columns)
                throw IngestError(line_no, "missing column '" + std::string(kColumns[c]) + "'");
    }

    std::vector<Transaction> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split(line);
        if (f.size() != n_columns)
            throw IngestError(line_no, "expected " + std::to_string(n_columns) + " fields, got " +
                                           std::to_string(f.size()));
        const auto product_field = f[column_of[1]];
        if (product && product_field != *product) continue;

        Transaction t;
        try {
            t.timestamp = parse_rfc3339(f[column_of[0]]);
        } catch (const Error& e) {
            throw IngestError(line_no, e.what());
        }
        t.product_id = std::string(product_field);
        t.customer_id = std::string(f[column_of[2]]);
        t.unit_price = parse_number(f[column_of[3]], line_no, kColumns[3]);
        t.units = parse_integer(f[column_of[4]], line_no, kColumns[4]);
        t.unit_cost = parse_number(f[column_of[5]], line_no, kColumns[5]);
        if (t.units < 1) throw IngestError(line_no, "units must be >= 1");
        if (t.unit_price <= 0.0) throw IngestError(line_no, "unit_price must be > 0");
        if (t.unit_cost < 0.0) throw IngestError(line_no, "unit_cost must be >= 0");
        out.push_back(std::move(t));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Transaction& a, const Transaction& b) { return a.timestamp < b.timestamp; });
    return out;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("data-core", "cannot open '" + path + "'");
    return in;
}

}  // namespace

std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::vector<Transaction> ingest_csv(const std::string& path, const std::string& product_id) {
    auto in = open_input(path);
    return parse_filtered(in, &product_id);
}

std::vector<Transaction> ingest_csv_all(const std::string& path) {
    auto in = open_input(path);
    return parse_filtered(in, nullptr);
}

std::vector<Transaction> parse_csv(std::istream& in) { return parse_filtered(in, nullptr); }

void write_csv(std::ostream& out, std::span<const Transaction> txns) {
    out << kTransactionHeader << '\n';
    for (const auto& t : txns) {
        out << format_rfc3339(t.timestamp) << ',' << t.product_id << ',' << t.customer_id << ','
            << format_double(t.unit_price) << ',' << t.units << ',' << format_double(t.unit_cost) << '\n';
    }
}

void write_csv(const std::string& path, std::span<const Transaction> txns) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("data-core", "cannot write '" + path + "'");
    write_csv(out, txns);
}

std::vector<std::string> product_ids(std::span<const Transaction> txns) {
    std::vector<std::string> ids;
    for (const auto& t : txns)
        if (std::find(ids.begin(), ids.end(), t.product_id) == ids.end()) ids.push_back(t.product_id);
    return ids;
}

std::vector<WeeklyAggregate> aggregate_weekly(std::span<const Transaction> txns, Timestamp origin) {
    std::vector<WeeklyAggregate> out;
    if (txns.empty()) return out;
    if (txns.front().timestamp < origin)
        throw Error("data-core", "aggregation origin is after the first transaction");

    double revenue = 0.0, lo = 0.0, hi = 0.0;
    // Rounding can push the weighted mean just outside the observed prices.
    const auto close = [&] { out.back().avg_price = std::clamp(revenue / out.back().total_volume, lo, hi); };
    for (const auto& t : txns) {
        const long w = week_index(origin, t.timestamp);
        if (!out.empty() && w < out.back().week_index)
            throw Error("data-core", "transactions are not time-sorted");
        if (out.empty() || w != out.back().week_index) {
            if (!out.empty()) close();
            out.push_back({w, 0.0, 0.0, 0});
            revenue = 0.0;
            lo = hi = t.unit_price;
        }
        auto& agg = out.back();
        agg.total_volume += static_cast<double>(t.units);
        revenue += t.revenue();
        lo = std::min(lo, t.unit_price);
        hi = std::max(hi, t.unit_price);
        ++agg.n_transactions;
    }
    close();
    return out;
}

double latest_unit_cost(std::span<const Transaction> txns) {
    if (txns.empty()) throw Error("data-core", "no transactions");
    return txns.back().unit_cost;
}

BasketDistribution::BasketDistribution(std::map<std::int64_t, std::int64_t> counts)
    : counts_(std::move(counts)) {
    for (auto it = counts_.begin(); it != counts_.end();) {
        if (it->first < 1 || it->second < 0)
            throw Error("data-core", "basket sizes must be >= 1 with non-negative counts");
        if (it->second == 0) {
            it = counts_.erase(it);
        } else {
            n_baskets_ += it->second;
            ++it;
        }
    }
}

std::int64_t BasketDistribution::count(std::int64_t z) const noexcept {
    const auto it = counts_.find(z);
    return it == counts_.end() ? 0 : it->second;
}

double BasketDistribution::beta(std::int64_t z) const noexcept {
    if (n_baskets_ == 0) return 0.0;
    return static_cast<double>(count(z)) / static_cast<double>(n_baskets_);
}

double BasketDistribution::mean_volume() const noexcept {
    if (n_baskets_ == 0) return 0.0;
    std::int64_t units = 0;
    for (const auto& [z, q] : counts_) units += z * q;
    return static_cast<double>(units) / static_cast<double>(n_baskets_);
}

std::int64_t BasketDistribution::max_volume() const noexcept {
    return counts_.empty() ? 0 : counts_.rbegin()->first;
}

std::map<std::int64_t, double> BasketDistribution::proportions() const {
    std::map<std::int64_t, double> out;
    for (const auto& [z, q] : counts_) out[z] = beta(z);
    return out;
}

BasketDistribution basket_distribution(std::span<const Transaction> txns) {
    if (txns.empty()) throw Error("data-core", "basket distribution of an empty log");
    std::map<std::int64_t, std::int64_t> counts;
    for (const auto& t : txns) ++counts[t.units];
    return BasketDistribution(std::move(counts));
}

CustomerIndex::CustomerIndex(std::span<const Transaction> txns, std::vector<Interval> periods)
    : periods_(std::move(periods)), counts_(periods_.size()) {
    for (std::size_t i = 0; i < periods_.size(); ++i) {
        if (periods_[i].end < periods_[i].begin) throw Error("data-core", "period ends before it begins");
        for (std::size_t j = 0; j < i; ++j)
            if (periods_[i].overlaps(periods_[j])) throw Error("data-core", "overlapping periods");
    }
    for (const auto& t : txns)
        for (std::size_t p = 0; p < periods_.size(); ++p)
            if (periods_[p].contains(t.timestamp)) {
                ++counts_[p][t.customer_id];
                break;
            }
}

std::size_t CustomerIndex::period_index(const Interval& period) const {
    const auto it = std::find(periods_.begin(), periods_.end(), period);
    if (it == periods_.end()) throw Error("data-core", "period not covered by the customer index");
    return static_cast<std::size_t>(it - periods_.begin());
}

std::int64_t CustomerIndex::purchases(const std::string& customer, std::size_t p) const {
    const auto& m = counts_.at(p);
    const auto it = m.find(customer);
    return it == m.end() ? 0 : it->second;
}

std::int64_t CustomerIndex::total_purchases(std::size_t p) const {
    std::int64_t n = 0;
    for (const auto& [g, k] : counts_.at(p)) n += k;
    return n;
}

std::set<std::string> CustomerIndex::customers(std::size_t p) const {
    std::set<std::string> out;
    for (const auto& [g, k] : counts_.at(p)) out.insert(g);
    return out;
}

std::size_t CustomerIndex::overlap(std::size_t a, std::size_t b) const {
    const auto& ma = counts_.at(a);
    const auto& mb = counts_.at(b);
    std::size_t n = 0;
    auto ia = ma.begin();
    auto ib = mb.begin();
    while (ia != ma.end() && ib != mb.end()) {
        if (ia->first < ib->first) {
            ++ia;
        } else if (ib->first < ia->first) {
            ++ib;
        } else {
            ++n;
            ++ia;
            ++ib;
        }
    }
    return n;
}

CustomerIndex build_customer_index(std::span<const Transaction> txns, std::vector<Interval> periods) {
    return CustomerIndex(txns, std::move(periods));
}

double mean_units_per_customer(std::span<const Transaction> txns) {
    if (txns.empty()) return 0.0;
    std::unordered_map<std::string, std::int64_t> units;
    std::int64_t total = 0;
    for (const auto& t : txns) {
        units[t.customer_id] += t.units;
        total += t.units;
    }
    return static_cast<double>(total) / static_cast<double>(units.size());
}

std::vector<Transaction> slice(std::span<const Transaction> txns, const Interval& period) {
    std::vector<Transaction> out;
    for (const auto& t : txns)
        if (period.contains(t.timestamp)) out.push_back(t);
    return out;
}

}  // namespace pvdb
