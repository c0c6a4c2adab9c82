#pragma once

#include "geoscore/types.hpp"

#include <vector>

namespace geoscore {

// Forward-process marginal parameters: X_t | X_0 ~ N(mu_t X_0, sigma_t^2 I).
struct MuSigma {
    double mu;
    double sigma;
};

// Ornstein-Uhlenbeck (alpha >= 0) or variance-exploding geometric schedule
// on the horizon [0, T].
class NoiseSchedule {
public:
    enum class Kind { OU, VEGeometric };

    static NoiseSchedule ou(double alpha, double horizon);
    static NoiseSchedule ve_geometric(double sigma_min, double sigma_max, double horizon);

    Kind kind() const { return kind_; }
    double horizon() const { return horizon_; }
    double alpha() const { return alpha_; }
    double sigma_min() const { return sigma_min_; }
    double sigma_max() const { return sigma_max_; }

    // Marginal (mu_t, sigma_t). Requires 0 < t <= T.
    MuSigma mu_sigma(double t) const;

    // Squared diffusion coefficient g(t)^2 of the forward SDE.
    // OU: 2. VE: d(sigma_t^2)/dt.
    double g_squared(double t) const;

    // Variance of the sampling prior at t = T.
    double prior_variance() const;
    double prior_log_density(const Vector& x) const;
    void sample_prior(Vector& out, class RngStream& rng) const;

private:
    Kind kind_ = Kind::OU;
    double alpha_ = 0.0;
    double sigma_min_ = 0.0;
    double sigma_max_ = 0.0;
    double horizon_ = 1.0;
};

// Integration grid from T down to epsilon, n_steps intervals (n_steps + 1
// points). Log spacing concentrates points near epsilon.
std::vector<double> make_time_grid(const NoiseSchedule& schedule, double epsilon,
                                   int n_steps, bool log_spaced);

} // namespace geoscore
