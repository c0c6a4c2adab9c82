#pragma once

#include "geoscore/config.hpp"
#include "geoscore/grid_density.hpp"
#include "geoscore/manifold.hpp"
#include "geoscore/sampler.hpp"

#include <vector>

namespace geoscore {

// Fraction of sample rows at distance >= r from the manifold.
double tail_probability(const Matrix& samples, const Manifold& manifold, double r);

// Euclidean distance to the nearest row of points.
double dist_to_set(const Vector& x, const Matrix& points);

struct LateralDistance {
    double value = 0.0;
    bool clamped = false; // set when d(x, data) < d(x, M) and the root was clamped
};

// sqrt(d(x, data)^2 - d(x, M)^2): movement along the manifold relative to the
// training set.
LateralDistance lateral_distance(const Vector& x, const Dataset& dataset,
                                 const Manifold& manifold);

// Mean negative log-likelihood (nats) of the eval points under the smoothed
// model, via the forward probability-flow ODE.
double nll(const SmoothedScoreModel& model, const DiffusionConfig& config,
           const Matrix& eval_points, RngStream& rng);

// Covariance eigenvalue ratio of an image treated as a density on [0,1]^2.
// Values below 0.1 are zeroed first.
double anisotropy(const Vector& image, int side);

struct ThetaHistogram {
    std::vector<double> edges;  // bins + 1 entries over [0, 2 pi)
    std::vector<int> counts;
};

// Histogram of the projection parameters of the samples on a curve manifold.
ThetaHistogram theta_histogram(const Matrix& samples, const Manifold& manifold, int bins);

// Deviation from the exact log-domain identity between stencil smoothing and
// its manifold-adapted (level-set projected) counterpart:
// max over grid points of |(log p^k - log p^adapted) - mean difference|.
// Zero iff the two smoothed densities agree up to a constant. Training data
// must lie on the manifold (within 1e-9 for analytic kinds).
double adapted_residual(const EmpiricalScore& score, const Manifold& manifold, double h,
                        double epsilon, const Grid& grid,
                        const std::vector<Index>* stencil_axes = nullptr);

// Aggregate sample quality numbers used by the experiment tables.
struct SampleMetrics {
    double mean_dist_data = 0.0;
    double mean_dist_manifold = 0.0;
    double mean_lateral = 0.0;
    int lateral_clamped = 0;
};

SampleMetrics summarize_samples(const Matrix& samples, const Dataset& dataset,
                                const Manifold& manifold);

} // namespace geoscore
