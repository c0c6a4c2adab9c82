#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geoscore/errors.hpp"
#include "geoscore/kernels.hpp"
#include "geoscore/rng.hpp"

#include <cmath>
#include <map>

using namespace geoscore;

TEST_CASE("isotropic draws: CLT band around the centre") {
    const IsotropicGaussian kernel(0.5);
    RngStream rng(3);
    const Vector x{{1.0, -2.0, 0.5}};
    const int n = 100000;
    Matrix draws;
    kernel.draw_batch(x, n, rng, draws);
    const Vector mean = draws.colwise().mean();
    const double band = 4.0 * 0.5 / std::sqrt(static_cast<double>(n));
    for (Index j = 0; j < 3; ++j) CHECK(std::abs(mean[j] - x[j]) < band);

    const IsotropicGaussian delta(0.0);
    RngStream rng2(4);
    CHECK((delta.draw(x, rng2) - x).norm() == 0.0);
}

TEST_CASE("stencil draws: four equally frequent nodes in d = 2") {
    const FixedStencil kernel(0.1);
    RngStream rng(5);
    const Vector x{{0.0, 0.0}};
    std::map<std::pair<double, double>, int> freq;
    const int n = 40000;
    for (int i = 0; i < n; ++i) {
        const Vector y = kernel.draw(x, rng);
        ++freq[{y[0], y[1]}];
    }
    REQUIRE(freq.size() == 4);
    for (const auto& [node, count] : freq) {
        // binomial band around n/4
        CHECK(std::abs(count - n / 4.0) < 4.0 * std::sqrt(n * 0.25 * 0.75));
    }
}

TEST_CASE("stencil nodes: exact quadrature") {
    const FixedStencil kernel(0.1);
    const Vector x{{0.0}};
    const auto nodes = kernel.nodes(x);
    REQUIRE(nodes.size() == 2);
    CHECK(nodes[0].first[0] == doctest::Approx(0.1));
    CHECK(nodes[0].second == doctest::Approx(0.5));
    CHECK(nodes[1].first[0] == doctest::Approx(-0.1));

    const Vector x2{{0.3, -0.7, 2.0}};
    const auto nodes2 = kernel.nodes(x2);
    REQUIRE(nodes2.size() == 6);
    Vector mean = Vector::Zero(3);
    double wsum = 0.0;
    for (const auto& [pt, w] : nodes2) {
        mean += w * pt;
        wsum += w;
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-15));
    CHECK((mean - x2).norm() < 1e-15); // node mean is exactly the centre
    // linear functions are integrated exactly
    const Vector a{{1.5, -0.25, 3.0}};
    double acc = 0.0;
    for (const auto& [pt, w] : nodes2) acc += w * a.dot(pt);
    CHECK(acc == doctest::Approx(a.dot(x2)).epsilon(1e-14));

    const IsotropicGaussian iso(0.1);
    CHECK_THROWS_AS(static_cast<void>(iso.nodes(x)), CapabilityError);
}

TEST_CASE("level-set kernel on an affine subspace removes the normal component") {
    Matrix a(1, 2);
    a << 1.0, 0.0; // manifold x_0 = 0, normal direction e_0
    const auto affine = make_affine(a, Vector{{0.0}});
    const double sigma = 0.2;
    const LevelSetAdapted kernel(std::make_shared<IsotropicGaussian>(sigma), affine, 1.0, 512);
    // x far from the manifold relative to sigma: the level-set projection pins
    // the normal coordinate at r(x), so its variance collapses.
    const Vector x{{1.0, 0.4}};
    RngStream rng(7);
    const int n = 20000;
    Matrix draws;
    kernel.draw_batch(x, n, rng, draws);
    double normal_mean = 0.0, normal_sq = 0.0, tangent_var_acc = 0.0;
    const double tangent_mean = draws.col(1).mean();
    for (Index i = 0; i < n; ++i) {
        normal_mean += draws(i, 0);
        normal_sq += draws(i, 0) * draws(i, 0);
        tangent_var_acc += (draws(i, 1) - tangent_mean) * (draws(i, 1) - tangent_mean);
    }
    normal_mean /= n;
    const double normal_var = normal_sq / n - normal_mean * normal_mean;
    const double tangent_var = tangent_var_acc / n;
    CHECK(normal_var < 1e-12);                        // pinned at r(x)
    CHECK(normal_mean == doctest::Approx(kernel.level_radius(x)).epsilon(1e-9));
    CHECK(tangent_var == doctest::Approx(sigma * sigma).epsilon(0.05));
    // r(x)^2 = dist^2 + E|A xi|^2 for a centred base
    CHECK(kernel.level_radius(x) ==
          doctest::Approx(std::sqrt(1.0 + sigma * sigma)).epsilon(0.02));
}

TEST_CASE("level-set draws sit on the level set of the scaled manifold") {
    const auto circle = make_circle(1.0);
    const LevelSetAdapted kernel(std::make_shared<IsotropicGaussian>(0.1), circle, 0.8, 256);
    const auto scaled = circle->scaled(0.8);
    const Vector x{{0.9, 0.2}};
    const double r = kernel.level_radius(x);
    RngStream rng(11);
    for (int i = 0; i < 200; ++i) {
        const Vector y = kernel.draw(x, rng);
        CHECK(std::abs(scaled->distance(y) - r) < 1e-9);
    }
}

TEST_CASE("shifted-manifold draws approximately preserve the offset") {
    const auto circle = make_circle(1.0, Vector::Zero(2));
    const double offset = 0.3;
    const double sigma = 0.05;
    const ShiftedManifoldAdapted kernel(sigma, circle, 1024);
    const Vector x{{1.0 + offset, 0.0}};
    RngStream rng(13);
    Matrix draws;
    kernel.draw_batch(x, 2000, rng, draws);
    for (Index i = 0; i < draws.rows(); ++i) {
        const double d = circle->distance(draws.row(i).transpose());
        // translation preserves the offset up to curvature of the shifted
        // copy and the node resolution
        CHECK(std::abs(d - offset) < 0.012);
    }
}

TEST_CASE("anisotropic kernel spreads along the circle tangent") {
    const auto circle = make_circle(1.0);
    const AnisotropicGaussian kernel(0.3, 0.01, circle);
    const Vector x{{1.0, 0.0}}; // tangent here is e_1
    RngStream rng(17);
    double var_t = 0.0, var_n = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const Vector y = kernel.draw(x, rng);
        var_t += (y[1] - x[1]) * (y[1] - x[1]);
        var_n += (y[0] - x[0]) * (y[0] - x[0]);
    }
    var_t /= n;
    var_n /= n;
    CHECK(var_t == doctest::Approx(0.09).epsilon(0.08));
    CHECK(var_n == doctest::Approx(0.0001).epsilon(0.1));
}

TEST_CASE("estimate_K: stencil inside the subspace, Gaussian codimension law") {
    // Stencil directions inside the manifold: the trivial whole-space affine
    // subspace (no constraints) leaves distances at zero.
    const auto whole = make_affine(Matrix(0, 2), Vector(0));
    const FixedStencil stencil(0.25);
    Matrix probes(3, 2);
    probes << 0.0, 0.0, 1.0, -1.0, 0.3, 0.7;
    RngStream rng(19);
    const KernelDiagnostics k0 = estimate_K(stencil, *whole, probes, 512, rng);
    CHECK(k0.K == 0.0);
    CHECK(k0.K_max == 0.0);

    // Isotropic Gaussian on a codimension-c affine subspace: K^2 ~ c sigma^2.
    Matrix a(2, 3);
    a << 1.0, 0.0, 0.0, 0.0, 1.0, 0.0; // x_0 = x_1 = 0, codim 2 in R^3
    const auto affine = make_affine(a, Vector::Zero(2));
    Matrix on_m(4, 3);
    on_m << 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -0.5, 0.0, 0.0, 2.0;
    const double sigma = 0.05;
    const IsotropicGaussian iso(sigma);
    RngStream rng2(23);
    const KernelDiagnostics kg = estimate_K(iso, *affine, on_m, 20000, rng2);
    CHECK(kg.K * kg.K == doctest::Approx(2.0 * sigma * sigma).epsilon(0.1));
    CHECK(kg.K_max > kg.K);

    // Adapted kernel beats the isotropic one at equal scale on the circle.
    const auto circle = make_circle(1.0);
    RngStream probe_rng(29);
    const Matrix circle_probes = circle->sample_uniform(8, probe_rng, true);
    RngStream rng3(31);
    const KernelDiagnostics k_iso = estimate_K(IsotropicGaussian(0.3), *circle,
                                               circle_probes, 4000, rng3);
    RngStream rng4(31);
    const ShiftedManifoldAdapted adapted(0.3, circle, 1024);
    const KernelDiagnostics k_adapted = estimate_K(adapted, *circle, circle_probes, 4000, rng4);
    CHECK(k_adapted.K < k_iso.K);
}

TEST_CASE("estimate_K is monotone in sigma (paired seeds)") {
    const auto circle = make_circle(1.0);
    RngStream probe_rng(37);
    const Matrix probes = circle->sample_uniform(6, probe_rng, true);
    double prev = -1.0;
    for (double sigma : {0.02, 0.05, 0.1, 0.2}) {
        RngStream rng(41); // same seed for every sigma
        const KernelDiagnostics diag =
            estimate_K(IsotropicGaussian(sigma), *circle, probes, 4000, rng);
        CHECK(diag.K > prev);
        prev = diag.K;
    }
}

TEST_CASE("kernel json factory round trip") {
    const auto iso = kernel_from_json(R"({"kind":"isotropic_gaussian","sigma":0.25})");
    CHECK(iso->location_independent());
    const auto stencil = kernel_from_json(R"({"kind":"fixed_stencil","h":0.1})");
    CHECK(stencil->has_nodes());
    const auto adapted = kernel_from_json(
        R"({"kind":"shifted_manifold_adapted","sigma":1.0,
            "manifold":{"kind":"circle","radius":1.0},"n_proj_nodes":64})");
    CHECK(!adapted->location_independent());
    const auto level = kernel_from_json(
        R"({"kind":"level_set_adapted","base":{"kind":"isotropic_gaussian","sigma":0.1},
            "manifold":{"kind":"circle","radius":1.0},"epsilon_scale":1.0})");
    CHECK(!level->location_independent());
    CHECK_THROWS_AS(static_cast<void>(kernel_from_json(R"({"kind":"wat"})")), ConfigError);
    CHECK_THROWS_AS(static_cast<void>(kernel_from_json("not json")), ConfigError);
}

TEST_CASE("draw determinism: same stream, same draws") {
    const auto circle = make_circle(1.0);
    const ShiftedManifoldAdapted kernel(0.5, circle, 128);
    const Vector x{{1.2, 0.1}};
    RngStream a(43), b(43);
    Matrix da, db;
    kernel.draw_batch(x, 64, a, da);
    kernel.draw_batch(x, 64, b, db);
    CHECK((da - db).norm() == 0.0);
}
