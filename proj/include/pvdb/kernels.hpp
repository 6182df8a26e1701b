#pragma once

// Data-parallel inner loops behind the price grid search and the permutation
// statistics. Each kernel has a scalar reference and vector variants that are
// bit-identical to it: the reference fixes a 4-lane accumulation order, and
// the vector code performs the same IEEE operations (no FMA contraction).

#include <cstddef>
#include <span>
#include <string_view>

namespace pvdb::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa) noexcept;

/// ISA chosen at first use: the best one the CPU supports, unless the
/// PVDB_KERNELS environment variable names another ("scalar", "avx2", "neon").
Isa active_isa() noexcept;
/// Overrides the runtime choice (tests). Requesting an unsupported ISA falls
/// back to scalar.
void set_active_isa(Isa isa) noexcept;
bool isa_supported(Isa isa) noexcept;

struct GridArgmax {
    std::size_t index = 0;
    double profit = 0.0;
    bool found = false;
};

struct KernelTable {
    /// out[g] = offset + sum_u coeffs[u] * basis[u * n + g], n = out.size().
    /// Rows are accumulated in u order for every g.
    void (*grid_combine)(std::span<const double> basis, std::span<const double> coeffs,
                         double offset, std::span<double> out);
    /// First index maximizing (prices[g] - cost) * max(volumes[g], 0) among
    /// prices[g] > cost.
    GridArgmax (*profit_argmax)(std::span<const double> prices, std::span<const double> volumes,
                                double cost);
    /// Sum with four interleaved partial sums combined as (s0+s1)+(s2+s3),
    /// then the tail in order.
    double (*lane_sum)(std::span<const double> values);
    /// lane_sum of values[idx[i]].
    double (*gather_sum)(std::span<const double> values, std::span<const std::size_t> idx);
};

const KernelTable& table(Isa isa) noexcept;
inline const KernelTable& active() noexcept { return table(active_isa()); }

// Convenience wrappers over the active table.
inline void grid_combine(std::span<const double> basis, std::span<const double> coeffs,
                         double offset, std::span<double> out) {
    active().grid_combine(basis, coeffs, offset, out);
}
inline GridArgmax profit_argmax(std::span<const double> prices, std::span<const double> volumes,
                                double cost) {
    return active().profit_argmax(prices, volumes, cost);
}
inline double lane_sum(std::span<const double> values) { return active().lane_sum(values); }
inline double gather_sum(std::span<const double> values, std::span<const std::size_t> idx) {
    return active().gather_sum(values, idx);
}

namespace detail {
extern const KernelTable scalar_table;
const KernelTable* avx2_table() noexcept;  // nullptr when not compiled in
const KernelTable* neon_table() noexcept;
}  // namespace detail

}  // namespace pvdb::kernels
