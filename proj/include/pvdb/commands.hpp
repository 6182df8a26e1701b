#pragma once

// Subcommands behind the `pvdb` executable. Each writes its artifacts into
// the configured output directory and returns a process exit status.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pvdb/config.hpp"

namespace pvdb {

struct PriceRequest {
    std::vector<std::string> products;  // empty: every product in the log
    long week = 0;                      // week index from the data origin
};

/// Both phases for each product: decisions.csv, strategies.csv and
/// posterior_<product>.json.
int cmd_price(const EngineConfig& cfg, const PriceRequest& req, std::ostream& log);

struct DiscountRequest {
    std::vector<std::string> products;
    long week = 0;
    double price = 0.0;  // p*; must exceed the unit cost
};

/// Phase 2 only around a given average price: strategies.csv.
int cmd_discounts(const EngineConfig& cfg, const DiscountRequest& req, std::ostream& log);

/// One closed-loop run of both pricing phases on the configured market.
int cmd_simulate(const EngineConfig& cfg, std::ostream& log);

/// Simulated A/B campaign: set A priced by both phases, set B by the baseline.
int cmd_abtest(const EngineConfig& cfg, std::ostream& log);

/// Rebuilds the A/B report from product_margins.csv in the output directory.
int cmd_report(const EngineConfig& cfg, std::ostream& log);

}  // namespace pvdb
