#pragma once

#include "geoscore/smoothing.hpp"
#include "geoscore/types.hpp"

#include <string>
#include <vector>

namespace geoscore {

class RngStream;

// Rectangular lattice in dimension <= 3. Values live on the lattice points;
// integration uses the trapezoid rule.
struct Grid {
    std::vector<std::pair<double, double>> bounds; // per-axis (lo, hi)
    std::vector<int> resolution;                   // per-axis point count >= 2

    Index dim() const { return static_cast<Index>(bounds.size()); }
    Index point_count() const;
    double axis_coord(std::size_t axis, Index i) const;
    Vector point(Index flat) const;
    // log of the trapezoid weight at a lattice point.
    double log_weight(Index flat) const;

    void validate() const;
    bool operator==(const Grid& other) const;
};

// Normalized log-density sampled on a grid: sum over points of
// exp(log_values - log_norm) * weight = 1.
struct GridDensity {
    Grid grid;
    Vector log_values;
    double log_norm = 0.0;

    void normalize();
    double total_mass() const;
};

// Per-point smoothed log-density of the model at time epsilon. Each lattice
// point draws from its own substream keyed by the point index, so reruns at
// different kernel scales are paired.
GridDensity eval_grid_smoothed(const SmoothedScoreModel& model, double epsilon, const Grid& grid,
                               RngStream& rng);

// Exact noised empirical log-density.
GridDensity eval_grid_empirical(const EmpiricalScore& score, double epsilon, const Grid& grid);

// Data-domain smoothing of the training set (Gaussian KDE).
GridDensity eval_grid_kde(const Dataset& dataset, double sigma, const Grid& grid);

// Container format: magic "GSG1", u32 JSON header length, JSON header
// (bounds, resolution, log_norm), little-endian f64 payload of log_values.
void save_grid_density(const GridDensity& density, const std::string& path);
GridDensity load_grid_density(const std::string& path);

} // namespace geoscore
