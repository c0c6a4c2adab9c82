#pragma once

#include "geoscore/config.hpp"
#include "geoscore/smoothing.hpp"

#include <vector>

namespace geoscore {

// Integration record. Times are stored strictly decreasing from T to the
// early-stopping time regardless of traversal direction; states[i] is the
// state at times[i]. log_det_accum is the divergence integral of the drift
// over [epsilon, T] along the path.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> states;
    double log_det_accum = 0.0;
};

enum class OdeDirection { Forward, Reverse };

// n independent Euler-Maruyama chains of the reverse SDE, started from the
// schedule prior at T, stopped at config.epsilon. corrector_steps Langevin
// updates follow each predictor step. Returns one sample per row.
Matrix reverse_sde_sample(const SmoothedScoreModel& model, const DiffusionConfig& config, int n,
                          RngStream& rng);

// One chain with its states recorded (for trajectory dumps).
Trajectory reverse_sde_trajectory(const SmoothedScoreModel& model, const DiffusionConfig& config,
                                  RngStream& rng);

// Langevin updates x <- x + delta s + sqrt(2 delta) z with the step size
// delta = 2 (snr |z| / |s|)^2 recomputed each iteration.
Vector langevin_corrector(const SmoothedScoreModel& model, double t, Vector x, int steps,
                          double snr, RngStream& rng);

// Probability-flow ODE integration (Heun) between epsilon and T, accumulating
// the divergence of the drift on the same grid. Smoothing displacements are
// frozen once per trajectory so the drift field is smooth in (x, t).
Trajectory pf_ode_solve(const SmoothedScoreModel& model, const DiffusionConfig& config,
                        const Vector& x_start, OdeDirection direction, RngStream& rng);
Trajectory pf_ode_solve(const SmoothedScoreModel& model, const DiffusionConfig& config,
                        const Vector& x_start, OdeDirection direction,
                        const FrozenSmoothing& frozen);

// Exact KDE sampling: uniform training point plus N(0, sigma^2 I) noise.
Matrix kde_sample(const Dataset& dataset, double sigma, int n, RngStream& rng);

} // namespace geoscore
