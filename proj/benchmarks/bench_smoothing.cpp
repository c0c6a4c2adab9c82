#include <benchmark/benchmark.h>

#include "geoscore/rng.hpp"
#include "geoscore/smoothing.hpp"

using namespace geoscore;

namespace {

void bm_smoothed_score_circle(benchmark::State& state) {
    const auto score = std::make_shared<EmpiricalScore>(
        circle_dataset(12, 1.0), NoiseSchedule::ve_geometric(0.01, 4.0, 9.0));
    const SmoothedScoreModel model(score, std::make_shared<IsotropicGaussian>(0.06),
                                   static_cast<int>(state.range(0)));
    const Vector x{{0.9, 0.1}};
    RngStream rng(1);
    for (auto _ : state) benchmark::DoNotOptimize(model.smoothed_score(0.5, x, rng));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_smoothed_score_circle)->Arg(1000)->Arg(5000);

void bm_smoothed_score_image(benchmark::State& state) {
    const auto bump = make_bump_curve(0.2, 64, 0.5, 64);
    RngStream data_rng(2);
    const Dataset data(bump->sample_uniform(16, data_rng, true));
    const auto score = std::make_shared<EmpiricalScore>(
        data, NoiseSchedule::ve_geometric(0.01, 2.0 * data.diameter(), 9.0));
    const SmoothedScoreModel model(score, std::make_shared<IsotropicGaussian>(2.0),
                                   static_cast<int>(state.range(0)));
    const Vector x = data.point(0);
    RngStream rng(3);
    for (auto _ : state) benchmark::DoNotOptimize(model.smoothed_score(1.0, x, rng));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_smoothed_score_image)->Arg(1000);

void bm_shifted_adapted_draws(benchmark::State& state) {
    const auto bump = make_bump_curve(0.2, 64, 0.5, 128);
    const ShiftedManifoldAdapted kernel(3.5, bump, 128);
    RngStream data_rng(4);
    const Vector x = bump_image(0.2, 64, 0.5, 0.1);
    RngStream rng(5);
    Matrix draws;
    for (auto _ : state) {
        kernel.draw_batch(x, state.range(0), rng, draws);
        benchmark::DoNotOptimize(draws.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_shifted_adapted_draws)->Arg(512);

} // namespace
