#include <random>
#include <sstream>

#include "doctest.h"
#include "pvdb/error.hpp"
#include "support.hpp"

using namespace pvdb;
using namespace testing;

TEST_SUITE("data_core") {

TEST_CASE("rfc3339 parsing and formatting") {
    CHECK(format_rfc3339(ts("2021-01-04T10:30:00Z")) == "2021-01-04T10:30:00Z");
    CHECK(ts("2021-01-04T12:30:00+02:00") == ts("2021-01-04T10:30:00Z"));
    CHECK(ts("2021-01-04T10:30:00.75Z") == ts("2021-01-04T10:30:00Z"));
    CHECK_THROWS_AS(ts("2021-01-04 10:30"), Error);
    CHECK_THROWS_AS(ts("2021-02-30T00:00:00Z"), Error);
}

TEST_CASE("week bucketing is floor division from the origin") {
    CHECK(week_index(kOrigin, kOrigin) == 0);
    CHECK(week_index(kOrigin, kOrigin + kWeek - std::chrono::seconds(1)) == 0);
    CHECK(week_index(kOrigin, kOrigin + kWeek) == 1);
    CHECK(week_index(kOrigin, kOrigin - std::chrono::seconds(1)) == -1);
}

TEST_CASE("ingest filters by product and sorts by time") {
    std::istringstream in(
        "timestamp,product_id,customer_id,unit_price,units,unit_cost\n"
        "2021-01-06T00:00:00Z,P,g1,5,1,3\n"
        "2021-01-04T00:00:00Z,Q,g1,5,1,3\n"
        "2021-01-05T00:00:00Z,P,g2,5,2,3\n"
        "2021-01-07T00:00:00Z,Q,g3,5,1,3\n"
        "2021-01-04T00:00:00Z,P,g3,5,3,3\n");
    const auto all = parse_csv(in);
    REQUIRE(all.size() == 5);
    std::vector<Transaction> p;
    for (const auto& t : all)
        if (t.product_id == "P") p.push_back(t);
    REQUIRE(p.size() == 3);
    CHECK(p[0].units == 3);
    CHECK(p[1].units == 2);
    CHECK(p[2].units == 1);
    CHECK(product_ids(all) == std::vector<std::string>{"Q", "P"});
}

TEST_CASE("columns may be reordered") {
    std::istringstream in("units,unit_cost,unit_price,customer_id,product_id,timestamp\n"
                          "4,1.5,2.25,g,P,2021-01-04T00:00:00Z\n");
    const auto t = parse_csv(in);
    REQUIRE(t.size() == 1);
    CHECK(t[0].units == 4);
    CHECK(t[0].unit_price == 2.25);
    CHECK(t[0].unit_cost == 1.5);
}

TEST_CASE("header only yields an empty sequence") {
    std::istringstream in(std::string(kTransactionHeader) + "\n");
    CHECK(parse_csv(in).empty());
}

TEST_CASE("invalid rows name their line") {
    const auto line_of = [](const std::string& body) -> std::size_t {
        std::istringstream in(std::string(kTransactionHeader) + "\n" + body);
        try {
            parse_csv(in);
        } catch (const IngestError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("2021-01-04T00:00:00Z,P,g,5,1,3\n2021-01-04T00:00:00Z,P,g,5,0,3\n") == 3);
    CHECK(line_of("2021-01-04T00:00:00Z,P,g,0,1,3\n") == 2);
    CHECK(line_of("2021-01-04T00:00:00Z,P,g,-2,1,3\n") == 2);
    CHECK(line_of("2021-01-04T00:00:00Z,P,g,5,1,-1\n") == 2);
    CHECK(line_of("2021-01-04T00:00:00Z,P,g,5,1\n") == 2);
    CHECK(line_of("2021-01-04T00:00:00Z,P,g,abc,1,3\n") == 2);
    CHECK(line_of("2021-01-04T00:00:00Z,P,g,5,1.5,3\n") == 2);

    std::istringstream unknown("timestamp,product_id,customer_id,unit_price,units,unit_cost,colour\n");
    CHECK_THROWS_AS(parse_csv(unknown), IngestError);
    std::istringstream missing("timestamp,product_id,customer_id,unit_price,units\n");
    CHECK_THROWS_AS(parse_csv(missing), IngestError);
}

TEST_CASE("csv round trip is exact") {
    std::vector<Transaction> v{txn(day(0), "g1", 0.1 + 0.2, 3, 1.0 / 3.0), txn(day(3), "g2", 1e-7, 1, 0.0)};
    std::ostringstream out;
    write_csv(out, v);
    std::istringstream in(out.str());
    CHECK(parse_csv(in) == v);
}

TEST_CASE("weekly aggregation") {
    SUBCASE("volume-weighted price") {
        std::vector<Transaction> v{txn(day(0), "a", 6, 1), txn(day(1), "b", 4, 3)};
        const auto ag = aggregate_weekly(v, kOrigin);
        REQUIRE(ag.size() == 1);
        CHECK(ag[0].avg_price == doctest::Approx(4.5).epsilon(1e-15));
        CHECK(ag[0].total_volume == 4);
        CHECK(ag[0].n_transactions == 2);
    }
    SUBCASE("singleton") {
        std::vector<Transaction> v{txn(day(2), "a", 5, 2)};
        const auto ag = aggregate_weekly(v, kOrigin);
        REQUIRE(ag.size() == 1);
        CHECK(ag[0].avg_price == 5);
        CHECK(ag[0].total_volume == 2);
    }
    SUBCASE("empty week emits nothing") {
        std::vector<Transaction> v{txn(day(0), "a", 5, 2), txn(day(15), "a", 5, 2)};
        const auto ag = aggregate_weekly(v, kOrigin);
        REQUIRE(ag.size() == 2);
        CHECK(ag[0].week_index == 0);
        CHECK(ag[1].week_index == 2);
    }
    SUBCASE("origin after the first transaction is rejected") {
        std::vector<Transaction> v{txn(day(0), "a", 5, 2)};
        CHECK_THROWS_AS(aggregate_weekly(v, kOrigin + kWeek), Error);
    }
}

TEST_CASE("aggregation properties on random logs") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> d(0, 80), u(1, 9);
    std::uniform_real_distribution<double> p(0.5, 30.0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<Transaction> v;
        for (int i = 0; i < 60; ++i) v.push_back(txn(day(d(rng), d(rng) % 24), "g", p(rng), u(rng)));
        std::stable_sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.timestamp < b.timestamp; });
        const auto ag = aggregate_weekly(v, kOrigin);
        double units = 0;
        for (const auto& t : v) units += static_cast<double>(t.units);
        double agg_units = 0;
        for (const auto& a : ag) {
            double lo = 1e300, hi = -1e300;
            for (const auto& t : v)
                if (week_index(kOrigin, t.timestamp) == a.week_index) {
                    lo = std::min(lo, t.unit_price);
                    hi = std::max(hi, t.unit_price);
                }
            CHECK(a.avg_price >= lo);
            CHECK(a.avg_price <= hi);
            agg_units += a.total_volume;
        }
        CHECK(agg_units == units);
    }
}

TEST_CASE("basket distribution") {
    std::vector<Transaction> v{txn(day(0), "a", 5, 1), txn(day(0), "b", 5, 1), txn(day(0), "c", 5, 3)};
    const auto d = basket_distribution(v);
    CHECK(d.n_baskets() == 3);
    CHECK(d.beta(1) == doctest::Approx(2.0 / 3.0));
    CHECK(d.beta(3) == doctest::Approx(1.0 / 3.0));
    CHECK(d.beta(2) == 0.0);
    CHECK(d.count(1) == 2);

    std::vector<Transaction> w{txn(day(0), "a", 5, 1), txn(day(0), "a", 5, 2), txn(day(0), "a", 5, 2),
                               txn(day(0), "a", 5, 5)};
    CHECK(basket_distribution(w).mean_volume() == doctest::Approx(2.5).epsilon(1e-15));

    std::vector<Transaction> ones{txn(day(0), "a", 5, 1), txn(day(1), "b", 5, 1)};
    CHECK(basket_distribution(ones).beta(1) == 1.0);
    CHECK(basket_distribution(ones).mean_volume() == 1.0);
    CHECK_THROWS(basket_distribution(std::vector<Transaction>{}));

    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> u(1, 12);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<Transaction> r;
        std::map<std::int64_t, std::int64_t> counts;
        const int n = 1 + rep * 7;
        for (int i = 0; i < n; ++i) {
            const int z = u(rng);
            ++counts[z];
            r.push_back(txn(day(0), "a", 5, z));
        }
        const auto dist = basket_distribution(r);
        double total = 0.0;
        for (const auto& [z, b] : dist.proportions()) {
            total += b;
            CHECK(std::llround(b * static_cast<double>(dist.n_baskets())) == counts[z]);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("customer index") {
    const Interval m{kOrigin, kOrigin + 10 * kDay};
    const Interval c{kOrigin + 10 * kDay, kOrigin + 20 * kDay};
    std::vector<Transaction> v{txn(day(1), "g1", 5, 1), txn(day(2), "g1", 5, 1), txn(day(3), "g1", 5, 1),
                               txn(day(4), "g2", 5, 1), txn(day(12), "g2", 5, 1), txn(day(5), "g3", 5, 1)};
    const auto idx = build_customer_index(v, {m, c});
    CHECK(idx.purchases("g1", 0) == 3);
    CHECK(idx.unique_customers(0) == 3);
    CHECK(idx.total_purchases(0) == 5);
    CHECK(idx.overlap(0, 1) == 1);

    std::vector<Transaction> only_m{txn(day(1), "g1", 5, 1), txn(day(2), "g1", 5, 1)};
    const auto idx2 = build_customer_index(only_m, {m, c});
    CHECK(idx2.customers(1).empty());
    CHECK(idx2.unique_customers(0) == 1);
    CHECK(idx2.purchases("g1", 0) == 2);

    CHECK_THROWS_AS(build_customer_index(v, {m, Interval{kOrigin + 5 * kDay, kOrigin + 15 * kDay}}), Error);
}

TEST_CASE("customer index consistency by enumeration") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> d(0, 29), g(0, 5);
    const std::vector<Interval> periods{{kOrigin, kOrigin + 10 * kDay}, {kOrigin + 10 * kDay, kOrigin + 20 * kDay},
                                        {kOrigin + 25 * kDay, kOrigin + 30 * kDay}};
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<Transaction> v;
        for (int i = 0; i < 25; ++i) v.push_back(txn(day(d(rng)), "g" + std::to_string(g(rng)), 5, 1));
        const auto idx = build_customer_index(v, periods);
        for (std::size_t p = 0; p < periods.size(); ++p) {
            std::int64_t sum = 0;
            for (int k = 0; k < 6; ++k) {
                const std::string id = "g" + std::to_string(k);
                std::int64_t n = 0;
                for (const auto& t : v)
                    if (t.customer_id == id && periods[p].contains(t.timestamp)) ++n;
                CHECK(idx.purchases(id, p) == n);
                CHECK((idx.customers(p).count(id) == 1) == (n >= 1));
                sum += n;
            }
            CHECK(idx.total_purchases(p) == sum);
            CHECK(static_cast<std::int64_t>(idx.unique_customers(p)) <= sum);
        }
    }
}

TEST_CASE("latest cost and per-customer units") {
    std::vector<Transaction> v{txn(day(0), "a", 5, 2, 1.0), txn(day(1), "b", 5, 1, 2.0), txn(day(2), "a", 5, 3, 1.5)};
    CHECK(latest_unit_cost(v) == 1.5);
    CHECK(mean_units_per_customer(v) == doctest::Approx(3.0));
    CHECK(slice(v, {day(1, 0), day(2, 0)}).size() == 1);
}

}
