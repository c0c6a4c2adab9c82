#include <benchmark/benchmark.h>

#include "geoscore/manifold.hpp"
#include "geoscore/rng.hpp"

using namespace geoscore;

namespace {

void bm_circle_project(benchmark::State& state) {
    const auto circle = make_circle(1.0);
    const Vector x{{1.7, -0.4}};
    for (auto _ : state) benchmark::DoNotOptimize(circle->project(x));
}
BENCHMARK(bm_circle_project);

void bm_bump_project_batch(benchmark::State& state) {
    const auto bump = make_bump_curve(0.2, 64, 0.5, static_cast<int>(state.range(0)));
    RngStream rng(1);
    Matrix queries(256, 64 * 64);
    rng.fill_normal(queries.data(), static_cast<std::size_t>(queries.size()));
    Matrix points(256, 64 * 64);
    Vector dists(256);
    for (auto _ : state) {
        bump->project_batch(queries, &points, &dists, nullptr);
        benchmark::DoNotOptimize(dists.data());
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(bm_bump_project_batch)->Arg(128)->Arg(1024);

void bm_bump_image(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(bump_image(0.2, 64, 0.5, 0.3));
}
BENCHMARK(bm_bump_image);

} // namespace

BENCHMARK_MAIN();
