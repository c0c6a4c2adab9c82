#pragma once

#include "geoscore/grid_density.hpp"

namespace geoscore {

struct RenyiResult {
    double value = 0.0;
    // Points where the reference density underflowed and was floored.
    Index floored_points = 0;
};

// Order-q Renyi divergence D_q(p || q_ref) between two normalized grid
// densities on the same grid. q = 1 is the KL divergence. Reference values
// below exp(kRenyiFloorLog) are floored (grids can violate the absolute
// continuity the divergence assumes).
inline constexpr double kRenyiFloorLog = -690.77552789821368; // log(1e-300)

RenyiResult renyi(const GridDensity& p, const GridDensity& q_ref, double order);

} // namespace geoscore
