#pragma once

// Engine configuration: one JSON document whose top-level sections mirror the
// modules (data_core, demand_model, price_optimizer, discount_engine,
// market_sim, evaluation) plus `seed` and `paths`. Unknown keys are errors.
// See README.md for the full key list.

#include <cstdint>
#include <optional>
#include <string>

#include "pvdb/market_sim.hpp"
#include "pvdb/pipeline.hpp"

namespace pvdb {

struct AbTestConfig {
    int products_a = 10;
    int products_b = 10;
    /// Policy for set B: "fixed" (keeps the warmup price), "oracle" or "random".
    std::string baseline = "fixed";
    /// Per-product multiplicative jitter: base_rate * exp(U(-s, s)), same for elasticity.
    double base_rate_spread = 0.0;
    double elasticity_spread = 0.0;
    std::size_t permutations = 10000;
    unsigned workers = 1;
};

struct EngineConfig {
    std::optional<std::string> transactions;  // CSV path for price/discounts
    std::string output_dir = "out";
    std::optional<std::string> posterior_dir; // defaults to output_dir
    std::optional<Timestamp> origin;          // week 0 of the data; defaults to first txn day
    PvdbSettings pricing;
    MarketConfig market;
    AbTestConfig abtest;
    std::uint64_t seed = 0;
    bool has_seed = false;

    std::string posterior_directory() const { return posterior_dir.value_or(output_dir); }
};

/// Parses and validates. Relative paths resolve against `base_dir`.
EngineConfig config_from_text(const std::string& json_text, const std::string& base_dir = ".");
EngineConfig load_config(const std::string& path);

/// Checks the invariants (eta >= 1, seed present, paths resolvable).
void validate(const EngineConfig& cfg);

}  // namespace pvdb
