#include "geoscore/schedule.hpp"

#include "geoscore/errors.hpp"
#include "geoscore/rng.hpp"

#include <cmath>

namespace geoscore {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

NoiseSchedule NoiseSchedule::ou(double alpha, double horizon) {
    if (alpha < 0.0) throw DomainError("OU schedule requires alpha >= 0");
    if (horizon <= 0.0) throw DomainError("schedule horizon must be positive");
    NoiseSchedule s;
    s.kind_ = Kind::OU;
    s.alpha_ = alpha;
    s.horizon_ = horizon;
    return s;
}

NoiseSchedule NoiseSchedule::ve_geometric(double sigma_min, double sigma_max, double horizon) {
    if (!(sigma_min > 0.0 && sigma_min < sigma_max))
        throw DomainError("VE geometric schedule requires 0 < sigma_min < sigma_max");
    if (horizon <= 0.0) throw DomainError("schedule horizon must be positive");
    NoiseSchedule s;
    s.kind_ = Kind::VEGeometric;
    s.sigma_min_ = sigma_min;
    s.sigma_max_ = sigma_max;
    s.horizon_ = horizon;
    return s;
}

MuSigma NoiseSchedule::mu_sigma(double t) const {
    if (!(t > 0.0) || t > horizon_)
        throw DomainError("mu_sigma: t must lie in (0, T]");
    if (kind_ == Kind::OU) {
        if (alpha_ > 0.0) {
            const double mu = std::exp(-alpha_ * t);
            const double var = (1.0 - mu * mu) / alpha_;
            return {mu, std::sqrt(var)};
        }
        return {1.0, std::sqrt(2.0 * t)};
    }
    const double sigma = sigma_min_ * std::pow(sigma_max_ / sigma_min_, t / horizon_);
    return {1.0, sigma};
}

double NoiseSchedule::g_squared(double t) const {
    if (kind_ == Kind::OU) return 2.0;
    const double sigma = mu_sigma(t).sigma;
    return 2.0 * sigma * sigma * std::log(sigma_max_ / sigma_min_) / horizon_;
}

double NoiseSchedule::prior_variance() const {
    if (kind_ == Kind::OU) {
        if (alpha_ > 0.0) return 1.0 / alpha_;
        return 2.0 * horizon_;
    }
    return sigma_max_ * sigma_max_;
}

double NoiseSchedule::prior_log_density(const Vector& x) const {
    const double var = prior_variance();
    const double d = static_cast<double>(x.size());
    return -0.5 * d * std::log(kTwoPi * var) - 0.5 * x.squaredNorm() / var;
}

void NoiseSchedule::sample_prior(Vector& out, RngStream& rng) const {
    const double sd = std::sqrt(prior_variance());
    for (Index i = 0; i < out.size(); ++i) out[i] = sd * rng.normal();
}

std::vector<double> make_time_grid(const NoiseSchedule& schedule, double epsilon,
                                   int n_steps, bool log_spaced) {
    const double T = schedule.horizon();
    if (!(epsilon > 0.0 && epsilon < T))
        throw DomainError("time grid requires 0 < epsilon < T");
    if (n_steps < 1) throw DomainError("time grid requires n_steps >= 1");
    std::vector<double> t(static_cast<std::size_t>(n_steps) + 1);
    if (log_spaced) {
        const double lt = std::log(T);
        const double le = std::log(epsilon);
        for (int k = 0; k <= n_steps; ++k)
            t[static_cast<std::size_t>(k)] = std::exp(lt + (le - lt) * k / n_steps);
    } else {
        for (int k = 0; k <= n_steps; ++k)
            t[static_cast<std::size_t>(k)] = T + (epsilon - T) * k / n_steps;
    }
    t.front() = T;
    t.back() = epsilon;
    return t;
}

} // namespace geoscore
