#include "geoscore/sampler.hpp"

#include "geoscore/errors.hpp"
#include "geoscore/parallel.hpp"
#include "geoscore/rng.hpp"

#include <cmath>
#include <sstream>

namespace geoscore {

namespace {

void check_finite(const Vector& y, int chain, int step, double t) {
    if (y.allFinite()) return;
    std::ostringstream os;
    os << "chain " << chain << " diverged at step " << step << ", t=" << t;
    throw NumericalError(os.str());
}

// Drift and divergence of the probability-flow ODE in forward time.
struct PfDrift {
    const SmoothedScoreModel* model;
    const FrozenSmoothing* frozen;
    bool need_divergence;

    void operator()(double t, const Vector& x, Vector& v, double* div) const {
        const NoiseSchedule& sched = model->empirical().schedule();
        Vector s;
        double lap = 0.0;
        model->evaluate_frozen(t, x, *frozen, &s, need_divergence ? &lap : nullptr, nullptr);
        if (sched.kind() == NoiseSchedule::Kind::OU) {
            v = -sched.alpha() * x - s;
            if (div) *div = -sched.alpha() * static_cast<double>(x.size()) - lap;
        } else {
            const double half_g2 = 0.5 * sched.g_squared(t);
            v = -half_g2 * s;
            if (div) *div = -half_g2 * lap;
        }
    }
};

} // namespace

namespace {

Vector run_chain(const SmoothedScoreModel& model, const DiffusionConfig& config,
                 const std::vector<double>& times, RngStream& chain_rng, int chain_idx,
                 Trajectory* record) {
    const NoiseSchedule& sched = model.empirical().schedule();
    const Index d = model.dim();
    Vector y(d);
    sched.sample_prior(y, chain_rng);
    if (record && !times.empty()) {
        record->times.push_back(times.front());
        record->states.push_back(y);
    }
    Vector z(d);
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double t_hi = times[k];
        const double t_lo = times[k + 1];
        const double dt = t_hi - t_lo;
        RngStream step_rng = chain_rng.child("step", k);
        RngStream smooth_rng = step_rng.child("smooth");
        const Vector s = model.smoothed_score(t_hi, y, smooth_rng);
        step_rng.fill_normal(z.data(), static_cast<std::size_t>(d));
        if (sched.kind() == NoiseSchedule::Kind::OU) {
            y += dt * (sched.alpha() * y + 2.0 * s) + std::sqrt(2.0 * dt) * z;
        } else {
            const double g2 = sched.g_squared(t_hi);
            y += dt * g2 * s + std::sqrt(g2 * dt) * z;
        }
        check_finite(y, chain_idx, static_cast<int>(k), t_lo);
        if (config.corrector_steps > 0) {
            RngStream corrector_rng = step_rng.child("corrector");
            y = langevin_corrector(model, t_lo, std::move(y), config.corrector_steps,
                                   config.corrector_snr, corrector_rng);
            check_finite(y, chain_idx, static_cast<int>(k), t_lo);
        }
        if (record) {
            record->times.push_back(t_lo);
            record->states.push_back(y);
        }
    }
    return y;
}

} // namespace

Matrix reverse_sde_sample(const SmoothedScoreModel& model, const DiffusionConfig& config, int n,
                          RngStream& rng) {
    if (n < 1) throw DomainError("need n >= 1 chains");
    if (config.n_steps < 0) throw ConfigError("n_steps must be >= 0");
    const NoiseSchedule& sched = model.empirical().schedule();
    if (!(config.epsilon > 0.0 && config.epsilon < sched.horizon()))
        throw ConfigError("epsilon must lie in (0, T)");

    const Index d = model.dim();
    Matrix out(n, d);
    std::vector<double> times;
    if (config.n_steps > 0)
        times = make_time_grid(sched, config.epsilon, config.n_steps, config.log_time_grid);

    parallel_for(static_cast<std::size_t>(n), [&](std::size_t chain) {
        RngStream chain_rng = rng.child("chain", chain);
        out.row(static_cast<Index>(chain)) =
            run_chain(model, config, times, chain_rng, static_cast<int>(chain), nullptr)
                .transpose();
    });
    return out;
}

Trajectory reverse_sde_trajectory(const SmoothedScoreModel& model, const DiffusionConfig& config,
                                  RngStream& rng) {
    if (config.n_steps < 0) throw ConfigError("n_steps must be >= 0");
    const NoiseSchedule& sched = model.empirical().schedule();
    if (!(config.epsilon > 0.0 && config.epsilon < sched.horizon()))
        throw ConfigError("epsilon must lie in (0, T)");
    std::vector<double> times;
    if (config.n_steps > 0)
        times = make_time_grid(sched, config.epsilon, config.n_steps, config.log_time_grid);
    Trajectory traj;
    RngStream chain_rng = rng.child("chain", 0);
    const Vector terminal = run_chain(model, config, times, chain_rng, 0, &traj);
    if (traj.states.empty()) {
        traj.times = {sched.horizon()};
        traj.states = {terminal};
    }
    return traj;
}

Vector langevin_corrector(const SmoothedScoreModel& model, double t, Vector x, int steps,
                          double snr, RngStream& rng) {
    if (steps < 0) throw DomainError("corrector steps must be >= 0");
    const Index d = x.size();
    // Step size 2 (snr |z| / |s|)^2 evaluated at the population scales
    // |z| = sqrt(d), |s| = sqrt(d) / sigma_t, which gives 2 snr^2 sigma_t^2.
    // Evaluating the ratio per chain instead makes the step state-dependent
    // and tilts the invariant law away from the target (the chain then
    // samples p(x) weighted by the inverse step profile).
    const double sigma_t = model.empirical().schedule().mu_sigma(t).sigma;
    const double delta = 2.0 * snr * snr * sigma_t * sigma_t;
    Vector z(d);
    for (int k = 0; k < steps; ++k) {
        RngStream step_rng = rng.child("corrector_step", static_cast<std::uint64_t>(k));
        RngStream smooth_rng = step_rng.child("smooth");
        const Vector s = model.smoothed_score(t, x, smooth_rng);
        if (s.norm() == 0.0) continue; // no drift signal; skip the step
        step_rng.fill_normal(z.data(), static_cast<std::size_t>(d));
        x += delta * s + std::sqrt(2.0 * delta) * z;
    }
    return x;
}

Trajectory pf_ode_solve(const SmoothedScoreModel& model, const DiffusionConfig& config,
                        const Vector& x_start, OdeDirection direction, RngStream& rng) {
    RngStream offsets_rng = rng.child("pf_ode_offsets");
    const FrozenSmoothing frozen = model.freeze(offsets_rng);
    return pf_ode_solve(model, config, x_start, direction, frozen);
}

Trajectory pf_ode_solve(const SmoothedScoreModel& model, const DiffusionConfig& config,
                        const Vector& x_start, OdeDirection direction,
                        const FrozenSmoothing& frozen) {
    if (config.n_steps < 0) throw ConfigError("n_steps must be >= 0");
    const NoiseSchedule& sched = model.empirical().schedule();
    if (!(config.epsilon > 0.0 && config.epsilon < sched.horizon()))
        throw ConfigError("epsilon must lie in (0, T)");

    Trajectory traj;
    if (config.n_steps == 0) {
        traj.times = {direction == OdeDirection::Forward ? config.epsilon : sched.horizon()};
        traj.states = {x_start};
        traj.log_det_accum = 0.0;
        return traj;
    }

    std::vector<double> times =
        make_time_grid(sched, config.epsilon, config.n_steps, config.log_time_grid);
    if (direction == OdeDirection::Forward) std::reverse(times.begin(), times.end());

    const PfDrift drift{&model, &frozen, true};
    std::vector<Vector> states;
    states.reserve(times.size());
    states.push_back(x_start);

    double accum = 0.0; // signed along traversal
    Vector v0(x_start.size()), v1(x_start.size());
    double div0 = 0.0, div1 = 0.0;
    for (std::size_t k = 0; k + 1 < times.size(); ++k) {
        const double t0 = times[k];
        const double t1 = times[k + 1];
        const double dt = t1 - t0;
        const Vector& x0 = states.back();
        drift(t0, x0, v0, &div0);
        const Vector x_pred = x0 + dt * v0;
        drift(t1, x_pred, v1, &div1);
        Vector x1 = x0 + 0.5 * dt * (v0 + v1);
        if (!x1.allFinite()) {
            std::ostringstream os;
            os << "pf_ode diverged at step " << k << ", t=" << t1;
            throw NumericalError(os.str());
        }
        accum += 0.5 * dt * (div0 + div1);
        states.push_back(std::move(x1));
    }

    // Normalise storage to decreasing times; the accumulated integral is
    // reported over [epsilon, T].
    if (direction == OdeDirection::Forward) {
        std::reverse(times.begin(), times.end());
        std::reverse(states.begin(), states.end());
        traj.log_det_accum = accum;
    } else {
        traj.log_det_accum = -accum;
    }
    traj.times = std::move(times);
    traj.states = std::move(states);
    return traj;
}

Matrix kde_sample(const Dataset& dataset, double sigma, int n, RngStream& rng) {
    if (sigma < 0.0) throw DomainError("kde bandwidth must be >= 0");
    if (n < 1) throw DomainError("need n >= 1 samples");
    const Index d = dataset.dim();
    Matrix out(n, d);
    Vector z(d);
    for (int i = 0; i < n; ++i) {
        const auto pick = std::min<Index>(
            dataset.size() - 1,
            static_cast<Index>(rng.uniform01() * static_cast<double>(dataset.size())));
        if (sigma == 0.0) {
            out.row(i) = dataset.points().row(pick);
            continue;
        }
        rng.fill_normal(z.data(), static_cast<std::size_t>(d));
        out.row(i) = dataset.points().row(pick) + sigma * z.transpose();
    }
    return out;
}

} // namespace geoscore
