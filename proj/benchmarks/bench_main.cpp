#include <benchmark/benchmark.h>

#include <random>

#include "gspkit/chain_world.hpp"
#include "gspkit/grid_world.hpp"
#include "gspkit/gsp.hpp"
#include "gspkit/imitate.hpp"

using namespace gspkit;

static void BM_MatmulForward(benchmark::State& state) {
    int n = static_cast<int>(state.range(0));
    Tape tape;
    std::mt19937_64 rng(1);
    std::normal_distribution<float> nd;
    std::vector<float> a(n * n), b(n * n);
    for (auto& v : a) v = nd(rng);
    for (auto& v : b) v = nd(rng);
    auto ta = tape.tensor({n, n}, std::vector<float>(a));
    auto tb = tape.tensor({n, n}, std::vector<float>(b));
    for (auto _ : state) {
        auto c = tape.matmul(ta, tb);
        benchmark::DoNotOptimize(c->data.data());
        tape.clear();
    }
}
BENCHMARK(BM_MatmulForward)->Arg(64)->Arg(128);

static void BM_MlpBackward(benchmark::State& state) {
    Tape tape;
    std::mt19937_64 rng(1);
    auto mlp = MlpT<float>::create(tape, {70, 128, 64}, rng);
    std::normal_distribution<float> nd;
    std::vector<float> x(64 * 70);
    for (auto& v : x) v = nd(rng);
    for (auto _ : state) {
        auto in = tape.tensor({64, 70}, std::vector<float>(x));
        auto out = mlp.apply(tape, in);
        auto loss = tape.mse(out, tape.zeros({64, 64}));
        tape.backward(loss);
        benchmark::DoNotOptimize(loss->item());
    }
}
BENCHMARK(BM_MlpBackward);

static void BM_GridStep(benchmark::State& state) {
    GridWorld world = GridWorld::generate(13, 13, 8, 1);
    std::mt19937_64 rng(2);
    for (auto _ : state) {
        world.step_action(static_cast<int>(rng() % 4));
        benchmark::DoNotOptimize(world.pose());
    }
}
BENCHMARK(BM_GridStep);

static void BM_GridObserve(benchmark::State& state) {
    GridWorld world = GridWorld::generate(13, 13, 8, 1);
    for (auto _ : state) {
        auto obs = world.observe();
        benchmark::DoNotOptimize(obs.data());
    }
}
BENCHMARK(BM_GridObserve);

static void BM_ChainStep(benchmark::State& state) {
    ChainWorld world;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (auto _ : state) {
        EnvAction a{static_cast<int>(rng() % world.num_points()), ud(rng), ud(rng)};
        world.step(a);
        benchmark::DoNotOptimize(world.points().data());
    }
}
BENCHMARK(BM_ChainStep);

static void BM_PolicyStep(benchmark::State& state) {
    GridWorld world = GridWorld::generate(13, 13, 8, 1);
    GspConfig cfg;
    auto model = GspModel::create(cfg, world.obs_dim(), world.action_spec(), 7);
    PolicyRunner runner(model);
    auto obs = world.observe();
    std::mt19937_64 rng(4);
    for (auto _ : state) {
        auto a = runner.act(obs, obs, rng, false);
        benchmark::DoNotOptimize(a.index);
    }
}
BENCHMARK(BM_PolicyStep);

BENCHMARK_MAIN();
