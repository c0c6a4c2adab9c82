#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geoscore/errors.hpp"
#include "geoscore/grid_density.hpp"
#include "geoscore/metrics.hpp"
#include "geoscore/renyi.hpp"
#include "geoscore/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <set>

using namespace geoscore;

namespace {
constexpr double kPi = 3.1415926535897932384626433832795;
}

TEST_CASE("grid mass: single Gaussian and KDE integrate to one") {
    Matrix one(1, 1);
    one << 0.0;
    const EmpiricalScore score(Dataset(one), NoiseSchedule::ou(0.0, 2.0));
    Grid grid{{{-6.0, 6.0}}, {4096}};
    // t = 0.5 gives a unit Gaussian; no smoothing
    const GridDensity density = eval_grid_empirical(score, 0.5, grid);
    CHECK(std::abs(density.total_mass() - 1.0) < 1e-9);
    // un-normalized log-values happen to be a true density here, so the
    // normalizer itself must be ~0
    CHECK(std::abs(density.log_norm) < 1e-6);

    const Dataset data = circle_dataset(12, 1.0);
    Grid grid2{{{-2.5, 2.5}, {-2.5, 2.5}}, {256, 256}};
    const GridDensity kde = eval_grid_kde(data, 0.15, grid2);
    CHECK(std::abs(kde.total_mass() - 1.0) < 1e-12); // normalized by construction
    // the normalizer absorbs only the truncated tails
    CHECK(std::abs(kde.log_norm) < 1e-3);
}

TEST_CASE("renyi: self-divergence, analytic Gaussian pair, q-monotonicity") {
    Grid grid{{{-8.0, 8.0}}, {4096}};
    Matrix a(1, 1), b(1, 1);
    a << 0.0;
    b << 0.5;
    const NoiseSchedule sched = NoiseSchedule::ou(0.0, 2.0);
    const EmpiricalScore sa(Dataset(a), sched);
    const EmpiricalScore sb(Dataset(b), sched);
    const GridDensity pa = eval_grid_empirical(sa, 0.5, grid); // N(0, 1)
    const GridDensity pb = eval_grid_empirical(sb, 0.5, grid); // N(0.5, 1)

    for (double q : {1.0, 1.5, 2.0}) CHECK(std::abs(renyi(pa, pa, q).value) < 1e-12);

    // D_q(N(m1,s^2) || N(m2,s^2)) = q (m1-m2)^2 / (2 s^2)
    const RenyiResult d2 = renyi(pa, pb, 2.0);
    CHECK(d2.value == doctest::Approx(0.25).epsilon(1e-4));
    CHECK(renyi(pa, pb, 1.0).value == doctest::Approx(0.125).epsilon(1e-3));

    double prev = -1.0;
    for (double q : {1.0, 1.5, 2.0}) {
        const double v = renyi(pa, pb, q).value;
        CHECK(v >= prev);
        prev = v;
    }

    Grid other{{{-8.0, 8.0}}, {2048}};
    const GridDensity pc = eval_grid_empirical(sa, 0.5, other);
    CHECK_THROWS_AS(static_cast<void>(renyi(pa, pc, 2.0)), DomainError);
    CHECK_THROWS_AS(static_cast<void>(renyi(pa, pb, 0.5)), DomainError);
}

TEST_CASE("grid density file round trip") {
    Matrix one(1, 2);
    one << 0.1, -0.2;
    const EmpiricalScore score(Dataset(one), NoiseSchedule::ou(0.0, 2.0));
    Grid grid{{{-3.0, 3.0}, {-3.0, 3.0}}, {48, 48}};
    const GridDensity density = eval_grid_empirical(score, 0.5, grid);
    const std::string path =
        (std::filesystem::temp_directory_path() / "geoscore_density.gsg").string();
    save_grid_density(density, path);
    const GridDensity back = load_grid_density(path);
    CHECK(back.grid == density.grid);
    CHECK(back.log_norm == density.log_norm);
    CHECK((back.log_values - density.log_values).cwiseAbs().maxCoeff() == 0.0);
    std::filesystem::remove(path);
}

TEST_CASE("affine residual: exactness on the line, failure on the circle") {
    // line y = 0 with 5 on-manifold points
    Matrix pts(5, 2);
    for (int i = 0; i < 5; ++i) {
        pts(i, 0) = -1.0 + 0.5 * i;
        pts(i, 1) = 0.0;
    }
    const NoiseSchedule sched = NoiseSchedule::ou(0.0, 1.0);
    const EmpiricalScore score(Dataset(pts), sched);
    Matrix a(1, 2);
    a << 0.0, 1.0;
    const auto line = make_affine(a, Vector::Zero(1));
    Grid grid{{{-2.0, 2.0}, {-2.0, 2.0}}, {64, 64}};
    const double residual = adapted_residual(score, *line, 0.1, 0.01, grid);
    CHECK(residual < 1e-8);

    // stencil restricted to the tangent axis: kernel == adapted kernel
    const std::vector<Index> tangent_axis{0};
    const double tangent_residual =
        adapted_residual(score, *line, 0.1, 0.01, grid, &tangent_axis);
    CHECK(tangent_residual < 1e-12);

    // curved manifold: the identity genuinely fails (measured 0.39)
    const Dataset circle_data = circle_dataset(5, 1.0);
    const EmpiricalScore circle_score(circle_data, sched);
    const auto circle = make_circle(1.0);
    const double circle_residual = adapted_residual(circle_score, *circle, 0.1, 0.01, grid);
    CHECK(circle_residual > 1e-3);

    Matrix off(1, 2);
    off << 0.3, 0.4;
    const EmpiricalScore off_score(Dataset(off), sched);
    CHECK_THROWS_AS(
        static_cast<void>(adapted_residual(off_score, *line, 0.1, 0.01, grid)), DomainError);
}

TEST_CASE("affine residual holds across subspace dims, stencil steps and epsilon") {
    RngStream rng(3);
    const NoiseSchedule sched = NoiseSchedule::ou(0.0, 1.0);
    for (int rep = 0; rep < 6; ++rep) {
        const int d = rep % 2 == 0 ? 2 : 3;
        const int k = 1 + rep % (d - 1); // 1 .. d-1
        // random row-orthonormal constraints
        Matrix raw(d, d);
        for (Index i = 0; i < d; ++i)
            for (Index j = 0; j < d; ++j) raw(i, j) = rng.normal();
        const Eigen::HouseholderQR<Matrix> qr(raw);
        Matrix q = qr.householderQ();
        Matrix constraints = q.leftCols(k).transpose();
        Vector offset(k);
        for (Index i = 0; i < k; ++i) offset[i] = 0.3 * rng.normal();
        const auto affine = std::make_shared<AffineSubspace>(constraints, offset);

        // on-manifold training points
        Matrix tangent = q.rightCols(d - k);
        Matrix train(4, d);
        for (Index i = 0; i < 4; ++i) {
            Vector u(d - k);
            for (Index j = 0; j < d - k; ++j) u[j] = rng.normal();
            train.row(i) = (constraints.transpose() * offset + tangent * u).transpose();
        }
        const EmpiricalScore score(Dataset(train), sched);
        const double h = 0.01 + 0.49 * rng.uniform01();
        const double eps = 0.005 + 0.1 * rng.uniform01();
        Grid grid;
        for (int axis = 0; axis < d; ++axis) grid.bounds.emplace_back(-2.0, 2.0);
        grid.resolution.assign(static_cast<std::size_t>(d), d == 2 ? 24 : 10);
        const double residual = adapted_residual(score, *affine, h, eps, grid);
        CHECK(residual < 1e-8);
    }
}

TEST_CASE("tail probability: limits and monotonicity") {
    const auto circle = make_circle(1.0);
    RngStream rng(5);
    const Matrix on_manifold = circle->sample_uniform(200, rng, false);
    CHECK(tail_probability(on_manifold, *circle, 0.0) == 1.0);
    CHECK(tail_probability(on_manifold, *circle, 1e-6) == 0.0);

    Matrix spread(100, 2);
    for (Index i = 0; i < 100; ++i)
        spread.row(i) << 1.0 + 0.01 * static_cast<double>(i), 0.0;
    double prev = 2.0;
    for (double r : {0.1, 0.2, 0.3, 0.4}) {
        const double tail = tail_probability(spread, *circle, r);
        CHECK(tail <= prev);
        prev = tail;
    }
}

TEST_CASE("distances: nearest set member and lateral identity") {
    const Dataset data = circle_dataset(12, 1.0);
    const auto circle = make_circle(1.0);
    // at a training point both distances vanish
    const Vector train = data.point(0);
    CHECK(dist_to_set(train, data.points()) == 0.0);
    CHECK(lateral_distance(train, data, *circle).value == 0.0);

    // on-manifold midway between two training points: lateral = dist_to_set
    const double theta = kPi / 12.0;
    const Vector mid{{std::cos(theta), std::sin(theta)}};
    const LateralDistance lat = lateral_distance(mid, data, *circle);
    CHECK(lat.value == doctest::Approx(dist_to_set(mid, data.points())).epsilon(1e-9));
    CHECK(!lat.clamped);

    // lateral^2 + d(x, M)^2 = d(x, data)^2 by construction
    RngStream rng(7);
    for (int i = 0; i < 50; ++i) {
        const Vector x{{2.0 * rng.normal(), 2.0 * rng.normal()}};
        const LateralDistance l = lateral_distance(x, data, *circle);
        if (l.clamped) continue;
        const double dd = dist_to_set(x, data.points());
        const double dm = circle->distance(x);
        CHECK(l.value * l.value + dm * dm == doctest::Approx(dd * dd).epsilon(1e-9));
    }
    CHECK_THROWS_AS(static_cast<void>(dist_to_set(train, Matrix(0, 2))), DomainError);
}

TEST_CASE("nll: single-Gaussian analytic value and the memorization extreme") {
    Matrix one(1, 1);
    one << 0.0;
    const NoiseSchedule sched = NoiseSchedule::ou(0.0, 2.0);
    const auto score = std::make_shared<EmpiricalScore>(Dataset(one), sched);
    DiffusionConfig config;
    config.schedule = sched;
    config.n_steps = 400;
    config.epsilon = 0.01;
    config.log_time_grid = true;
    const SmoothedScoreModel raw(score, std::make_shared<IsotropicGaussian>(0.0), 1);
    Matrix eval(1, 1);
    eval << 0.0;
    RngStream rng(11);
    const double value = nll(raw, config, eval, rng);
    const double expected = 0.5 * std::log(2.0 * kPi * 2.0 * config.epsilon);
    CHECK(value == doctest::Approx(expected).epsilon(1e-2));

    // NLL at the training points drops as smoothing vanishes
    const Dataset data = circle_dataset(12, 1.0);
    const NoiseSchedule ve = NoiseSchedule::ve_geometric(0.01, 4.0, 9.0);
    const auto circle_model = std::make_shared<EmpiricalScore>(data, ve);
    DiffusionConfig ve_config;
    ve_config.schedule = ve;
    ve_config.n_steps = 100;
    ve_config.epsilon = 0.01;
    const Matrix train_eval = data.points();
    RngStream rng_a(13), rng_b(13);
    const SmoothedScoreModel none(circle_model, std::make_shared<IsotropicGaussian>(0.0), 1);
    const SmoothedScoreModel some(circle_model, std::make_shared<IsotropicGaussian>(0.1), 1000);
    const double nll_none = nll(none, ve_config, train_eval, rng_a);
    const double nll_some = nll(some, ve_config, train_eval, rng_b);
    CHECK(nll_none < nll_some);
}

TEST_CASE("anisotropy: round bumps, stretched images, degenerate input") {
    const Vector round = bump_image(0.2, 64, 0.5, 1.1);
    CHECK(anisotropy(round, 64) == doctest::Approx(1.0).epsilon(1e-2));

    // anisotropic Gaussian image stretched x2 along u: variance ratio 4
    Vector stretched(64 * 64);
    for (int iy = 0; iy < 64; ++iy)
        for (int ix = 0; ix < 64; ++ix) {
            const double u = -1.0 + 2.0 * (ix + 0.5) / 64;
            const double v = -1.0 + 2.0 * (iy + 0.5) / 64;
            stretched[static_cast<Index>(iy) * 64 + ix] =
                std::exp(-(u * u / (2.0 * 0.4 * 0.4) + v * v / (2.0 * 0.2 * 0.2)));
        }
    stretched /= stretched.maxCoeff();
    CHECK(anisotropy(stretched, 64) == doctest::Approx(4.0).epsilon(0.05));

    CHECK_THROWS_AS(static_cast<void>(anisotropy(Vector::Zero(64 * 64), 64)), DomainError);
    CHECK_THROWS_AS(static_cast<void>(anisotropy(Vector::Zero(100), 64)), DomainError);
}

TEST_CASE("theta histogram: training images occupy exactly the training bins") {
    const auto bump = make_bump_curve(0.2, 64, 0.5, 1024);
    RngStream rng(17);
    const Matrix train = bump->sample_uniform(16, rng, true);
    // 50 bins: no training angle falls on a bin edge
    const ThetaHistogram hist = theta_histogram(train, *bump, 50);
    REQUIRE(hist.counts.size() == 50);
    std::set<int> expected;
    for (int j = 0; j < 16; ++j) expected.insert(static_cast<int>(50.0 * j / 16.0));
    int total = 0;
    std::set<int> occupied;
    for (std::size_t b = 0; b < 50; ++b) {
        total += hist.counts[b];
        if (hist.counts[b] > 0) occupied.insert(static_cast<int>(b));
    }
    CHECK(total == 16);
    CHECK(occupied == expected);
}

TEST_CASE("trend: adapted-kernel divergence prefers the data geometry at small scales") {
    // At small sigma the wavy-circle-adapted kernel tracks the data geometry
    // better than the base-circle one; heavy smoothing flips the ordering.
    const auto wavy = make_wavy_circle(1.0, 0.15, 8, 1024);
    const auto circle = make_circle(1.0);
    RngStream data_rng(1);
    const Dataset data(wavy->sample_uniform(24, data_rng, true));
    const NoiseSchedule sched = NoiseSchedule::ve_geometric(0.01, 4.0, 9.0);
    const auto score = std::make_shared<EmpiricalScore>(data, sched);
    Grid grid{{{-1.5, 1.5}, {-1.5, 1.5}}, {72, 72}};

    auto d2_pair = [&](double sigma) {
        auto base = std::make_shared<IsotropicGaussian>(sigma);
        const SmoothedScoreModel plain(score, base, 600);
        const SmoothedScoreModel wavy_adapted(
            score, std::make_shared<LevelSetAdapted>(base, wavy, 1.0), 600);
        const SmoothedScoreModel circle_adapted(
            score, std::make_shared<LevelSetAdapted>(base, circle, 1.0), 600);
        RngStream r1(7), r2(7), r3(7); // paired point streams
        const GridDensity p = eval_grid_smoothed(plain, 0.01, grid, r1);
        const GridDensity pw = eval_grid_smoothed(wavy_adapted, 0.01, grid, r2);
        const GridDensity pc = eval_grid_smoothed(circle_adapted, 0.01, grid, r3);
        return std::pair{renyi(pw, p, 2.0).value, renyi(pc, p, 2.0).value};
    };

    const auto [w_small, c_small] = d2_pair(0.03);
    CHECK(w_small < c_small);
    const auto [w_mid, c_mid] = d2_pair(0.3);
    INFO("mid-scale D2: wavy ", w_mid, " circle ", c_mid);
    const auto [w_large, c_large] = d2_pair(0.6);
    CHECK(w_large > c_large);
}

TEST_CASE("trend: on-manifold midpoints gain density as smoothing grows") {
    const Dataset data = circle_dataset(12, 1.0);
    const NoiseSchedule sched = NoiseSchedule::ve_geometric(0.01, 4.0, 9.0);
    const auto score = std::make_shared<EmpiricalScore>(data, sched);
    RngStream zrng(11);
    const int n = 3000;
    Matrix z(n, 2);
    zrng.fill_normal(z.data(), 2 * n);
    double prev = -1e300;
    for (double sigma : {0.02, 0.06, 0.12}) {
        FrozenSmoothing frozen;
        frozen.offsets = sigma * z; // common random numbers across sigma
        frozen.weights = Vector::Constant(n, 1.0 / n);
        const SmoothedScoreModel model(score, std::make_shared<IsotropicGaussian>(sigma), n);
        double worst = 1e300;
        for (int j = 0; j < 12; ++j) {
            const double mid_theta = (2.0 * j + 1.0) * kPi / 12.0;
            const Vector mid{{std::cos(mid_theta), std::sin(mid_theta)}};
            const Vector train = data.point(j);
            double lm = 0.0, lt = 0.0;
            model.evaluate_frozen(0.01, mid, frozen, nullptr, nullptr, &lm);
            model.evaluate_frozen(0.01, train, frozen, nullptr, nullptr, &lt);
            worst = std::min(worst, lm - lt);
        }
        CHECK(worst > prev);
        prev = worst;
    }
}
