#include <benchmark/benchmark.h>

#include "pottsvb/evalbench.hpp"
#include "pottsvb/init.hpp"
#include "pottsvb/phantom.hpp"
#include "pottsvb/potts.hpp"
#include "pottsvb/special.hpp"
#include "pottsvb/vb.hpp"

using namespace pottsvb;

namespace {

Phantom make_phantom(int side) {
    PhantomSpec spec;
    spec.height = side;
    spec.width = side;
    spec.class_stddevs = {0.15, 0.15, 0.15, 0.15};
    return generate_phantom(spec, 7);
}

} // namespace

static void BM_Digamma(benchmark::State& state) {
    double x = 0.1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(digamma(x));
        x += 0.37;
        if (x > 50.0) x = 0.1;
    }
}
BENCHMARK(BM_Digamma);

static void BM_NeighborClassCounts(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    Phantom phantom = make_phantom(side);
    for (auto _ : state) {
        benchmark::DoNotOptimize(neighbor_class_counts(phantom.labels));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_NeighborClassCounts)->RangeMultiplier(2)->Range(16, 128)->Complexity();

static void BM_PottsGradient(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    Phantom phantom = make_phantom(side);
    const auto counts = neighbor_class_counts(phantom.labels);
    const auto beta = SmoothnessParams::uniform(4, 1.5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(potts_gradient(phantom.labels, counts, beta));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PottsGradient)->RangeMultiplier(2)->Range(16, 128)->Complexity();

static void BM_FitBeta(benchmark::State& state) {
    std::vector<LabelField> sources;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        PhantomSpec spec;
        sources.push_back(generate_phantom(spec, seed).labels);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_beta(sources));
    }
}
BENCHMARK(BM_FitBeta)->Unit(benchmark::kMillisecond);

static void BM_KmeansInit(benchmark::State& state) {
    Phantom phantom = make_phantom(64);
    for (auto _ : state) {
        benchmark::DoNotOptimize(kmeans_init(phantom.image, 4, 11));
    }
    state.SetItemsProcessed(state.iterations() * phantom.image.voxel_count());
}
BENCHMARK(BM_KmeansInit)->Unit(benchmark::kMillisecond);

static void BM_EStep(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    Phantom phantom = make_phantom(side);
    const auto priors = Hyperparams::weak_default(phantom.image, 4);
    const auto init = kmeans_init(phantom.image, 4, 3);
    const auto stats = compute_stats(phantom.image, init.responsibilities);
    const auto post = m_step(priors, stats);
    const auto beta = SmoothnessParams::uniform(4, 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(e_step(phantom.image, post, beta, init.responsibilities, {}));
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EStep)->RangeMultiplier(2)->Range(16, 128)->Complexity();

static void BM_FullFit(benchmark::State& state) {
    Phantom phantom = make_phantom(64);
    const auto priors = Hyperparams::weak_default(phantom.image, 4);
    const auto init = kmeans_init(phantom.image, 4, 3);
    const auto beta = SmoothnessParams::uniform(4, 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            fit(phantom.image, priors, beta, init.responsibilities, {}));
    }
}
BENCHMARK(BM_FullFit)->Unit(benchmark::kMillisecond);

static void BM_MatchClusters(benchmark::State& state) {
    Phantom phantom = make_phantom(64);
    const Mask& mask = phantom.mask;
    for (auto _ : state) {
        benchmark::DoNotOptimize(match_clusters(phantom.labels, phantom.labels, mask));
    }
}
BENCHMARK(BM_MatchClusters);

static void BM_GeneratePhantom(benchmark::State& state) {
    PhantomSpec spec;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate_phantom(spec, seed++));
    }
    state.SetItemsProcessed(state.iterations() * 64 * 64);
}
BENCHMARK(BM_GeneratePhantom)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
