#include "geoscore/renyi.hpp"

#include "geoscore/errors.hpp"

#include <cmath>
#include <limits>

namespace geoscore {

RenyiResult renyi(const GridDensity& p, const GridDensity& q_ref, double order) {
    if (!(p.grid == q_ref.grid)) throw DomainError("renyi requires identical grids");
    if (order < 1.0) throw DomainError("renyi order must be >= 1");
    const Index n = p.grid.point_count();

    RenyiResult out;
    if (order == 1.0) {
        // KL: sum w exp(lp) (lp - lq)
        double acc = 0.0;
        for (Index c = 0; c < n; ++c) {
            const double lp = p.log_values[c] - p.log_norm;
            double lq = q_ref.log_values[c] - q_ref.log_norm;
            if (lq < kRenyiFloorLog) {
                lq = kRenyiFloorLog;
                ++out.floored_points;
            }
            acc += std::exp(p.grid.log_weight(c) + lp) * (lp - lq);
        }
        out.value = acc;
    } else {
        // D_q = log( sum w exp(lp + (q-1)(lp - lq)) ) / (q - 1)
        double m = -std::numeric_limits<double>::infinity();
        Vector terms(n);
        for (Index c = 0; c < n; ++c) {
            const double lp = p.log_values[c] - p.log_norm;
            double lq = q_ref.log_values[c] - q_ref.log_norm;
            if (lq < kRenyiFloorLog) {
                lq = kRenyiFloorLog;
                ++out.floored_points;
            }
            terms[c] = p.grid.log_weight(c) + lp + (order - 1.0) * (lp - lq);
            m = std::max(m, terms[c]);
        }
        double acc = 0.0;
        for (Index c = 0; c < n; ++c) acc += std::exp(terms[c] - m);
        out.value = (m + std::log(acc)) / (order - 1.0);
    }
    // Quadrature rounding can leave a tiny negative residue on identical
    // inputs; the divergence itself is nonnegative.
    if (out.value < 0.0 && out.value > -1e-10) out.value = 0.0;
    return out;
}

} // namespace geoscore
