#include "pvdb/kernels.hpp"

namespace pvdb::kernels {

namespace ref {

void grid_combine(std::span<const double> basis, std::span<const double> coeffs, double offset,
                  std::span<double> out) {
    const std::size_t n = out.size();
    for (std::size_t g = 0; g < n; ++g) {
        double acc = 0.0;
        for (std::size_t u = 0; u < coeffs.size(); ++u) acc = acc + coeffs[u] * basis[u * n + g];
        out[g] = acc + offset;
    }
}

GridArgmax profit_argmax(std::span<const double> prices, std::span<const double> volumes, double cost) {
    GridArgmax best;
    for (std::size_t g = 0; g < prices.size(); ++g) {
        if (!(prices[g] > cost)) continue;
        const double v = volumes[g] > 0.0 ? volumes[g] : 0.0;
        const double profit = (prices[g] - cost) * v;
        if (!best.found || profit > best.profit) best = {g, profit, true};
    }
    return best;
}

double lane_sum(std::span<const double> v) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= v.size(); i += 4) {
        s0 = s0 + v[i];
        s1 = s1 + v[i + 1];
        s2 = s2 + v[i + 2];
        s3 = s3 + v[i + 3];
    }
    double total = (s0 + s1) + (s2 + s3);
    for (; i < v.size(); ++i) total = total + v[i];
    return total;
}

double gather_sum(std::span<const double> v, std::span<const std::size_t> idx) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= idx.size(); i += 4) {
        s0 = s0 + v[idx[i]];
        s1 = s1 + v[idx[i + 1]];
        s2 = s2 + v[idx[i + 2]];
        s3 = s3 + v[idx[i + 3]];
    }
    double total = (s0 + s1) + (s2 + s3);
    for (; i < idx.size(); ++i) total = total + v[idx[i]];
    return total;
}

}  // namespace ref

namespace detail {
const KernelTable scalar_table{ref::grid_combine, ref::profit_argmax, ref::lane_sum, ref::gather_sum};
}

}  // namespace pvdb::kernels
