#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geoscore/errors.hpp"
#include "geoscore/metrics.hpp"
#include "geoscore/rng.hpp"
#include "geoscore/sampler.hpp"

#include <algorithm>
#include <cmath>

using namespace geoscore;

namespace {

std::shared_ptr<const EmpiricalScore> circle_score() {
    return std::make_shared<EmpiricalScore>(circle_dataset(12, 1.0),
                                            NoiseSchedule::ve_geometric(0.01, 4.0, 9.0));
}

SmoothedScoreModel raw_model(std::shared_ptr<const EmpiricalScore> score) {
    return SmoothedScoreModel(std::move(score), std::make_shared<IsotropicGaussian>(0.0), 1);
}

double ks_distance_to_normal(std::vector<double> values, double mean, double sd) {
    std::sort(values.begin(), values.end());
    double ks = 0.0;
    const auto n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double z = (values[i] - mean) / (sd * std::sqrt(2.0));
        const double cdf = 0.5 * (1.0 + std::erf(z));
        ks = std::max(ks, std::abs(cdf - (i + 1) / n));
        ks = std::max(ks, std::abs(cdf - i / n));
    }
    return ks;
}

} // namespace

TEST_CASE("reverse SDE reproduces the single-Gaussian closed form") {
    Matrix one(1, 1);
    one << 0.7;
    const NoiseSchedule sched = NoiseSchedule::ou(0.0, 5.0);
    const auto score = std::make_shared<EmpiricalScore>(Dataset(one), sched);
    DiffusionConfig config;
    config.schedule = sched;
    config.n_steps = 400;
    config.epsilon = 0.01;
    config.log_time_grid = true;
    const int n = 4000;
    RngStream rng(3);
    const Matrix samples = reverse_sde_sample(raw_model(score), config, n, rng);
    REQUIRE(samples.rows() == n);
    const double sigma_eps = std::sqrt(2.0 * config.epsilon);
    const double mean = samples.col(0).mean();
    double var = 0.0;
    for (Index i = 0; i < n; ++i) var += (samples(i, 0) - mean) * (samples(i, 0) - mean);
    var /= (n - 1);
    // target is N(x_1, sigma_eps^2); the prior mismatch decays like eps / T
    CHECK(std::abs(mean - 0.7) < 3.0 * sigma_eps / std::sqrt(static_cast<double>(n)) + 0.002);
    CHECK(std::abs(std::sqrt(var) - sigma_eps) <
          4.0 * sigma_eps / std::sqrt(2.0 * static_cast<double>(n)) + 0.002);
}

TEST_CASE("zero-step config returns prior draws") {
    const auto score = circle_score();
    DiffusionConfig config;
    config.schedule = score->schedule();
    config.n_steps = 0;
    config.epsilon = 0.01;
    RngStream rng(5);
    const int n = 4000;
    const Matrix samples = reverse_sde_sample(raw_model(score), config, n, rng);
    const double prior_sd = std::sqrt(config.schedule.prior_variance());
    const double mean = samples.col(0).mean();
    double var = 0.0;
    for (Index i = 0; i < n; ++i) var += (samples(i, 0) - mean) * (samples(i, 0) - mean);
    var /= (n - 1);
    CHECK(std::abs(mean) < 4.0 * prior_sd / std::sqrt(static_cast<double>(n)));
    CHECK(std::sqrt(var) == doctest::Approx(prior_sd).epsilon(0.08));
}

TEST_CASE("unsmoothed sampling memorizes the training set") {
    const auto score = circle_score();
    const Dataset data = circle_dataset(12, 1.0);
    DiffusionConfig config;
    config.schedule = score->schedule();
    config.n_steps = 100;
    config.epsilon = 0.01;
    RngStream rng(7);
    const Matrix samples = reverse_sde_sample(raw_model(score), config, 100, rng);
    int close = 0;
    for (Index i = 0; i < samples.rows(); ++i)
        if (dist_to_set(samples.row(i).transpose(), data.points()) < 0.05) ++close;
    CHECK(close == samples.rows());
}

TEST_CASE("determinism: same seed gives bit-identical samples") {
    const auto score = circle_score();
    DiffusionConfig config;
    config.schedule = score->schedule();
    config.n_steps = 50;
    config.epsilon = 0.01;
    const SmoothedScoreModel model(score, std::make_shared<IsotropicGaussian>(0.06), 200);
    RngStream a(11), b(11);
    const Matrix sa = reverse_sde_sample(model, config, 16, a);
    const Matrix sb = reverse_sde_sample(model, config, 16, b);
    CHECK((sa - sb).norm() == 0.0);
}

TEST_CASE("langevin corrector: identity cases and convergence to the target") {
    const auto score = circle_score();
    const SmoothedScoreModel model = raw_model(score);
    const Vector x{{0.4, -0.2}};
    RngStream rng(13);
    CHECK((langevin_corrector(model, 1.0, x, 0, 0.16, rng) - x).norm() == 0.0);
    const Vector x_snr0 = langevin_corrector(model, 1.0, x, 5, 0.0, rng);
    CHECK((x_snr0 - x).norm() == 0.0);

    // single-Gaussian target: corrector output approaches N(mu_t x_1, sigma_t^2)
    Matrix one(1, 1);
    one << 0.0;
    const NoiseSchedule sched = NoiseSchedule::ou(0.0, 2.0);
    const auto single = std::make_shared<EmpiricalScore>(Dataset(one), sched);
    const SmoothedScoreModel target = raw_model(single);
    const double t = 0.5; // sigma_t = 1
    auto ks_after = [&](int steps) {
        std::vector<double> out;
        for (int r = 0; r < 2000; ++r) {
            RngStream chain(1000 + static_cast<std::uint64_t>(r));
            const Vector start{{1.5}}; // off the target mode
            const Vector y = langevin_corrector(target, t, start, steps, 0.2, chain);
            out.push_back(y[0]);
        }
        return ks_distance_to_normal(std::move(out), 0.0, 1.0);
    };
    const double ks0 = ks_after(0);
    const double ks8 = ks_after(8);
    const double ks100 = ks_after(100);
    CHECK(ks8 < ks0);
    CHECK(ks100 < ks8);
    CHECK(ks100 < 0.06);
}

TEST_CASE("pf ode: single-Gaussian likelihood matches the closed form") {
    Matrix one(1, 1);
    one << 0.0;
    const NoiseSchedule sched = NoiseSchedule::ou(0.0, 2.0);
    const auto score = std::make_shared<EmpiricalScore>(Dataset(one), sched);
    DiffusionConfig config;
    config.schedule = sched;
    config.n_steps = 400;
    config.epsilon = 0.01;
    config.log_time_grid = true;
    const SmoothedScoreModel model = raw_model(score);
    RngStream rng(17);
    const Vector x{{0.0}};
    const Trajectory traj = pf_ode_solve(model, config, x, OdeDirection::Forward, rng);
    REQUIRE(traj.times.front() == 2.0);
    REQUIRE(traj.times.back() == 0.01);
    const double ll = sched.prior_log_density(traj.states.front()) + traj.log_det_accum;
    const double sigma_eps_sq = 2.0 * config.epsilon;
    const double expected = -0.5 * std::log(2.0 * 3.141592653589793 * sigma_eps_sq);
    CHECK(ll == doctest::Approx(expected).epsilon(1e-2));
}

TEST_CASE("pf ode: zero-length integration is the identity") {
    const auto score = circle_score();
    DiffusionConfig config;
    config.schedule = score->schedule();
    config.n_steps = 0;
    config.epsilon = 0.01;
    RngStream rng(19);
    const Vector x{{0.3, 0.4}};
    const Trajectory traj = pf_ode_solve(raw_model(score), config, x, OdeDirection::Forward, rng);
    REQUIRE(traj.states.size() == 1);
    CHECK((traj.states.front() - x).norm() == 0.0);
    CHECK(traj.log_det_accum == 0.0);
}

TEST_CASE("pf ode: reverse-then-forward round trip returns to the start") {
    const auto score = circle_score();
    DiffusionConfig config;
    config.schedule = score->schedule();
    config.n_steps = 200;
    config.epsilon = 0.01;
    const SmoothedScoreModel model(score, std::make_shared<FixedStencil>(0.05), 1,
                                   SmoothingMode::Quadrature);
    RngStream rng(23);
    const FrozenSmoothing frozen = model.freeze(rng);
    const Vector start{{2.5, -1.0}};
    const Trajectory rev = pf_ode_solve(model, config, start, OdeDirection::Reverse, frozen);
    const Vector end = rev.states.back(); // state at epsilon
    const Trajectory fwd = pf_ode_solve(model, config, end, OdeDirection::Forward, frozen);
    CHECK((fwd.states.front() - start).norm() < 1e-3 * (1.0 + start.norm()));
    // the divergence integrals agree up to the integration error
    CHECK(rev.log_det_accum == doctest::Approx(fwd.log_det_accum).epsilon(1e-3));
}

TEST_CASE("pf ode: likelihood is stable under grid refinement") {
    const auto score = circle_score();
    const SmoothedScoreModel model(score, std::make_shared<IsotropicGaussian>(0.08), 2000);
    RngStream rng(29);
    const FrozenSmoothing frozen = model.freeze(rng);
    const Vector x{{1.0, 0.0}};
    auto ll_with_steps = [&](int steps) {
        DiffusionConfig config;
        config.schedule = score->schedule();
        config.n_steps = steps;
        config.epsilon = 0.01;
        const Trajectory traj = pf_ode_solve(model, config, x, OdeDirection::Forward, frozen);
        return score->schedule().prior_log_density(traj.states.front()) + traj.log_det_accum;
    };
    const double ll_400 = ll_with_steps(400);
    const double ll_800 = ll_with_steps(800);
    CHECK(std::abs(ll_400 - ll_800) <= 1e-3);
}

TEST_CASE("corrector steps reduce the discretization bias (paired seeds)") {
    const auto score = circle_score();
    const Dataset data = circle_dataset(12, 1.0);
    auto median_dist = [&](int corrector_steps) {
        DiffusionConfig config;
        config.schedule = score->schedule();
        config.n_steps = 20; // deliberately coarse
        config.epsilon = 0.01;
        config.corrector_steps = corrector_steps;
        config.corrector_snr = 0.3;
        RngStream rng(31); // paired seed
        const Matrix samples = reverse_sde_sample(raw_model(score), config, 1000, rng);
        std::vector<double> dists;
        for (Index i = 0; i < samples.rows(); ++i)
            dists.push_back(dist_to_set(samples.row(i).transpose(), data.points()));
        std::sort(dists.begin(), dists.end());
        return dists[dists.size() / 2];
    };
    CHECK(median_dist(10) < median_dist(0));
}

TEST_CASE("kde sampling: limits and moments") {
    const Dataset data = circle_dataset(12, 1.0);
    RngStream rng(37);
    const Matrix exact = kde_sample(data, 0.0, 500, rng);
    for (Index i = 0; i < exact.rows(); ++i)
        CHECK(dist_to_set(exact.row(i).transpose(), data.points()) == 0.0);

    const double sigma = 0.3;
    const int n = 100000;
    RngStream rng2(41);
    const Matrix samples = kde_sample(data, sigma, n, rng2);
    const Vector mean = samples.colwise().mean();
    const Vector data_mean = data.points().colwise().mean();
    // per-coordinate variance: dataset variance + sigma^2
    for (Index j = 0; j < 2; ++j) {
        double data_var = 0.0;
        for (Index i = 0; i < data.size(); ++i) {
            const double c = data.points()(i, j) - data_mean[j];
            data_var += c * c;
        }
        data_var /= static_cast<double>(data.size());
        const double expected_var = data_var + sigma * sigma;
        const double band = 4.0 * std::sqrt(expected_var / n);
        CHECK(std::abs(mean[j] - data_mean[j]) < band);
        double var = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double c = samples(i, j) - mean[j];
            var += c * c;
        }
        var /= (n - 1);
        CHECK(var == doctest::Approx(expected_var).epsilon(0.03));
    }
}

TEST_CASE("trajectory recording keeps strictly decreasing times ending at epsilon") {
    const auto score = circle_score();
    DiffusionConfig config;
    config.schedule = score->schedule();
    config.n_steps = 25;
    config.epsilon = 0.01;
    RngStream rng(43);
    const Trajectory traj = reverse_sde_trajectory(raw_model(score), config, rng);
    REQUIRE(traj.times.size() == 26);
    REQUIRE(traj.states.size() == 26);
    CHECK(traj.times.front() == score->schedule().horizon());
    CHECK(traj.times.back() == config.epsilon);
    for (std::size_t i = 0; i + 1 < traj.times.size(); ++i)
        CHECK(traj.times[i] > traj.times[i + 1]);
}
