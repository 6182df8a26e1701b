// Compiled with -mavx2; only reached after a runtime CPU check.
#include <immintrin.h>

#include <limits>

#include "pvdb/kernels.hpp"

namespace pvdb::kernels {

namespace avx2_impl {

double hsum_pairs(__m256d acc) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

void grid_combine(std::span<const double> basis, std::span<const double> coeffs, double offset,
                  std::span<double> out) {
    const std::size_t n = out.size();
    const __m256d off = _mm256_set1_pd(offset);
    std::size_t g = 0;
    for (; g + 4 <= n; g += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t u = 0; u < coeffs.size(); ++u) {
            const __m256d c = _mm256_set1_pd(coeffs[u]);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(c, _mm256_loadu_pd(&basis[u * n + g])));
        }
        _mm256_storeu_pd(&out[g], _mm256_add_pd(acc, off));
    }
    for (; g < n; ++g) {
        double acc = 0.0;
        for (std::size_t u = 0; u < coeffs.size(); ++u) acc = acc + coeffs[u] * basis[u * n + g];
        out[g] = acc + offset;
    }
}

GridArgmax profit_argmax(std::span<const double> prices, std::span<const double> volumes, double cost) {
    const std::size_t n = prices.size();
    constexpr double kNeg = -std::numeric_limits<double>::infinity();
    const __m256d c = _mm256_set1_pd(cost);
    const __m256d zero = _mm256_setzero_pd();
    const __m256d neg = _mm256_set1_pd(kNeg);
    __m256d best = neg;
    bool any = false;
    std::size_t g = 0;
    for (; g + 4 <= n; g += 4) {
        const __m256d p = _mm256_loadu_pd(&prices[g]);
        const __m256d v = _mm256_max_pd(_mm256_loadu_pd(&volumes[g]), zero);
        const __m256d valid = _mm256_cmp_pd(p, c, _CMP_GT_OQ);
        any = any || _mm256_movemask_pd(valid) != 0;
        const __m256d profit = _mm256_blendv_pd(neg, _mm256_mul_pd(_mm256_sub_pd(p, c), v), valid);
        best = _mm256_max_pd(best, profit);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, best);
    double top = kNeg;
    for (double x : lanes) top = x > top ? x : top;
    for (std::size_t t = g; t < n; ++t) {
        if (!(prices[t] > cost)) continue;
        any = true;
        const double v = volumes[t] > 0.0 ? volumes[t] : 0.0;
        const double profit = (prices[t] - cost) * v;
        top = profit > top ? profit : top;
    }
    if (!any) return {};
    for (std::size_t t = 0; t < n; ++t) {
        if (!(prices[t] > cost)) continue;
        const double v = volumes[t] > 0.0 ? volumes[t] : 0.0;
        const double profit = (prices[t] - cost) * v;
        if (profit == top) return {t, profit, true};
    }
    return {};
}

double lane_sum(std::span<const double> v) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= v.size(); i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(&v[i]));
    double total = hsum_pairs(acc);
    for (; i < v.size(); ++i) total = total + v[i];
    return total;
}

double gather_sum(std::span<const double> v, std::span<const std::size_t> idx) {
    static_assert(sizeof(std::size_t) == sizeof(long long));
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= idx.size(); i += 4) {
        const __m256i ix = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(&idx[i]));
        acc = _mm256_add_pd(acc, _mm256_i64gather_pd(v.data(), ix, 8));
    }
    double total = hsum_pairs(acc);
    for (; i < idx.size(); ++i) total = total + v[idx[i]];
    return total;
}

const KernelTable avx2{grid_combine, profit_argmax, lane_sum, gather_sum};

}  // namespace avx2_impl

namespace detail {
const KernelTable* avx2_table() noexcept { return &avx2_impl::avx2; }
}

}  // namespace pvdb::kernels
