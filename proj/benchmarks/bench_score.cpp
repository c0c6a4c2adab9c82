#include <benchmark/benchmark.h>

#include "geoscore/empirical_score.hpp"
#include "geoscore/rng.hpp"

using namespace geoscore;

namespace {

Matrix random_points(Index n, Index d, std::uint64_t seed) {
    RngStream rng(seed);
    Matrix m(n, d);
    rng.fill_normal(m.data(), static_cast<std::size_t>(m.size()));
    return m;
}

void bm_lse(benchmark::State& state) {
    RngStream rng(1);
    std::vector<double> values(static_cast<std::size_t>(state.range(0)));
    for (auto& v : values) v = 200.0 * (rng.uniform01() - 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(lse(values));
}
BENCHMARK(bm_lse)->Arg(12)->Arg(256)->Arg(4096);

void bm_score_single(benchmark::State& state) {
    const Index n = state.range(0);
    const Index d = state.range(1);
    const EmpiricalScore score(Dataset(random_points(n, d, 2)),
                               NoiseSchedule::ve_geometric(0.01, 4.0, 9.0));
    const Vector x = Vector::Zero(d);
    for (auto _ : state) benchmark::DoNotOptimize(score.evaluate(1.0, x));
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(bm_score_single)->Args({12, 2})->Args({50, 8})->Args({16, 4096});

void bm_score_batch(benchmark::State& state) {
    const Index n = state.range(0);
    const Index d = state.range(1);
    const Index rows = state.range(2);
    const EmpiricalScore score(Dataset(random_points(n, d, 3)),
                               NoiseSchedule::ve_geometric(0.01, 4.0, 9.0));
    const Matrix queries = random_points(rows, d, 4);
    Vector lds(rows), laps(rows);
    Matrix scores(rows, d);
    for (auto _ : state) {
        score.evaluate_batch(1.0, queries, &lds, &scores, &laps);
        benchmark::DoNotOptimize(scores.data());
    }
    state.SetItemsProcessed(state.iterations() * rows);
}
BENCHMARK(bm_score_batch)->Args({12, 2, 1000})->Args({16, 4096, 512});

void bm_rng_normal(benchmark::State& state) {
    RngStream rng(5);
    std::vector<double> buf(4096);
    for (auto _ : state) {
        rng.fill_normal(buf.data(), buf.size());
        benchmark::DoNotOptimize(buf.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(buf.size()));
}
BENCHMARK(bm_rng_normal);

} // namespace
