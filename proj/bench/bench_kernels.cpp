// Serial reference vs OpenMP kernels. Set OMP_NUM_THREADS to compare.

#include <benchmark/benchmark.h>

#include <cmath>

#include "hsk/bg.hpp"
#include "hsk/kinetic.hpp"
#include "hsk/sampling.hpp"

using namespace hsk;

namespace {

Execution mode(const benchmark::State& st) { return st.range(0) ? Execution::parallel : Execution::serial; }

void monte_carlo_mean(benchmark::State& st)
{
    for (auto _ : st) {
        auto e = mc_mean(1'000'000, 1, 0, mode(st), [](Rng& rng) {
            const Vec3 a = normal_vec(rng), b = normal_vec(rng);
            return norm(a - b);
        });
        benchmark::DoNotOptimize(e.value);
    }
}

void slab_dsmc(benchmark::State& st)
{
    auto rng = make_rng(2);
    const auto init = slab_state(100'000, 8.0, 16, 1.0, triangle_profile(8.0, 0.5), 1.5, 1.0, rng);
    SolverConfig cfg;
    cfg.homogeneous = false;
    cfg.cells = 16;
    cfg.length = 8.0;
    cfg.dt = 0.02;
    cfg.t_end = 0.2;
    cfg.execution = mode(st);
    for (auto _ : st) {
        auto r = run_slab(init, cfg);
        benchmark::DoNotOptimize(r.stats);
    }
}

void bg_replicas(benchmark::State& st)
{
    ScalingPlan plan;
    plan.epsilons = {0.3, 0.2};
    plan.box_side = 1.8;
    plan.replicas = 16;
    plan.jackknife_groups = 4;
    plan.t_grid = {0.0, 0.25};
    plan.reference_samples = 20'000;
    plan.reference_steps_per_unit = 8;
    plan.execution = mode(st);
    const auto law = counter_streaming_law();
    for (auto _ : st) {
        auto r = bg_convergence_report(plan, law);
        benchmark::DoNotOptimize(r.rows);
    }
}

} // namespace

BENCHMARK(monte_carlo_mean)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(slab_dsmc)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(bg_replicas)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
