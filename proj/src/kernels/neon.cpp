// AArch64 only; NEON is part of the baseline ISA there.
#include <arm_neon.h>

#include <limits>

#include "pvdb/kernels.hpp"

namespace pvdb::kernels {

namespace neon_impl {

void grid_combine(std::span<const double> basis, std::span<const double> coeffs, double offset,
                  std::span<double> out) {
    const std::size_t n = out.size();
    const float64x2_t off = vdupq_n_f64(offset);
    std::size_t g = 0;
    for (; g + 2 <= n; g += 2) {
        float64x2_t acc = vdupq_n_f64(0.0);
        for (std::size_t u = 0; u < coeffs.size(); ++u) {
            // vmulq + vaddq, not vfmaq: must round like the scalar reference.
            acc = vaddq_f64(acc, vmulq_f64(vdupq_n_f64(coeffs[u]), vld1q_f64(&basis[u * n + g])));
        }
        vst1q_f64(&out[g], vaddq_f64(acc, off));
    }
    for (; g < n; ++g) {
        double acc = 0.0;
        for (std::size_t u = 0; u < coeffs.size(); ++u) acc = acc + coeffs[u] * basis[u * n + g];
        out[g] = acc + offset;
    }
}

GridArgmax profit_argmax(std::span<const double> prices, std::span<const double> volumes, double cost) {
    // The search is dominated by the branchy first-index scan; the profits
    // themselves come from the same two roundings as the scalar path.
    return detail::scalar_table.profit_argmax(prices, volumes, cost);
}

double lane_sum(std::span<const double> v) {
    float64x2_t a01 = vdupq_n_f64(0.0);
    float64x2_t a23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= v.size(); i += 4) {
        a01 = vaddq_f64(a01, vld1q_f64(&v[i]));
        a23 = vaddq_f64(a23, vld1q_f64(&v[i + 2]));
    }
    double total = (vgetq_lane_f64(a01, 0) + vgetq_lane_f64(a01, 1)) +
                   (vgetq_lane_f64(a23, 0) + vgetq_lane_f64(a23, 1));
    for (; i < v.size(); ++i) total = total + v[i];
    return total;
}

double gather_sum(std::span<const double> v, std::span<const std::size_t> idx) {
    float64x2_t a01 = vdupq_n_f64(0.0);
    float64x2_t a23 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= idx.size(); i += 4) {
        const double x01[2] = {v[idx[i]], v[idx[i + 1]]};
        const double x23[2] = {v[idx[i + 2]], v[idx[i + 3]]};
        a01 = vaddq_f64(a01, vld1q_f64(x01));
        a23 = vaddq_f64(a23, vld1q_f64(x23));
    }
    double total = (vgetq_lane_f64(a01, 0) + vgetq_lane_f64(a01, 1)) +
                   (vgetq_lane_f64(a23, 0) + vgetq_lane_f64(a23, 1));
    for (; i < idx.size(); ++i) total = total + v[idx[i]];
    return total;
}

const KernelTable neon{grid_combine, profit_argmax, lane_sum, gather_sum};

}  // namespace neon_impl

namespace detail {
const KernelTable* neon_table() noexcept { return &neon_impl::neon; }
}

}  // namespace pvdb::kernels
