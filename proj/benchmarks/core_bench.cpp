#include <benchmark/benchmark.h>

#include <random>

#include "metasel/cluster.hpp"
#include "metasel/features.hpp"
#include "metasel/nn.hpp"

using namespace metasel;

namespace {

Vec random_input(std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec x(dim);
    for (double& v : x) v = nd(rng);
    return x;
}

FeatureSet random_features(std::size_t n, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    FeatureSet fs;
    fs.layout.checkpoint_epochs = {1};
    fs.layout.block_dims = {dim};
    fs.values.resize(n * dim);
    for (double& v : fs.values) v = nd(rng);
    for (std::size_t j = 0; j < n; ++j) fs.sample_ids.push_back(j);
    return fs;
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
    std::size_t dim = std::size_t(state.range(0));
    NetworkParams p = make_network({dim, 64, 10}, Activation::Relu, 1);
    Vec x = random_input(dim, 2);
    for (auto _ : state) benchmark::DoNotOptimize(forward(p, x).logits());
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(256)->Arg(784);

static void BM_PerSampleGradient(benchmark::State& state) {
    std::size_t dim = std::size_t(state.range(0));
    NetworkParams p = make_network({dim, 64, 10}, Activation::Relu, 1);
    Vec x = random_input(dim, 2);
    for (auto _ : state) benchmark::DoNotOptimize(per_sample_gradient(p, x, 3, GradMode::Full));
}
BENCHMARK(BM_PerSampleGradient)->Arg(64)->Arg(256)->Arg(784);

static void BM_RbcFeature(benchmark::State& state) {
    std::size_t dim = std::size_t(state.range(0));
    NetworkParams p = make_network({dim, 64, 10}, Activation::Relu, 1);
    Vec x = random_input(dim, 2);
    for (auto _ : state) benchmark::DoNotOptimize(rbc_feature(p, x, 3, GradMode::Full));
}
BENCHMARK(BM_RbcFeature)->Arg(64)->Arg(256)->Arg(784);

static void BM_WeightedKmeansIteration(benchmark::State& state) {
    std::size_t n = std::size_t(state.range(0));
    FeatureSet fs = random_features(n, 128, 7);
    ClusterModel init = weighted_kmeans(fs, 10, 1, 0);  // init only
    std::vector<std::size_t> assign = init.assignment;
    std::vector<Vec> cents = init.centroids;
    for (auto _ : state) {
        std::vector<bool> empty;
        std::vector<Vec> up = kmeans_update(fs, assign, cents, empty);
        benchmark::DoNotOptimize(kmeans_assign(fs, up));
    }
}
BENCHMARK(BM_WeightedKmeansIteration)->Arg(200)->Arg(1000);

BENCHMARK_MAIN();
