#include <benchmark/benchmark.h>

#include "koop/control.hpp"
#include "koop/dmd.hpp"
#include "koop/sparse.hpp"

namespace {

using namespace koop;

const Trajectory& pde_trajectory()
{
    static const Trajectory traj = [] {
        const Vector v1 = bump_profile(200, 0.35, 0.18, 1.0);
        const Vector v2 = bump_profile(200, 0.70, 0.22, 0.8);
        const TimeGrid grid = TimeGrid::uniform(0.0, 35.0, 351);
        return synthetic_pde_trajectory(v1, 0.1, v2, 1.0 / 30.0, grid);
    }();
    return traj;
}

struct SweepPointInstance {
    Trajectory traj;
    ProfileDictionary dict;
    double reg = 0.0;
};

const SweepPointInstance& sweep_point_instance()
{
    static const SweepPointInstance instance = [] {
        SweepPointInstance out;
        const Vector v1 = bump_profile(60, 0.25, 0.15, 1.0);
        const Vector v2 = bump_profile(60, 0.75, 0.15, 0.8);
        const TimeGrid grid = TimeGrid::uniform(0.0, 30.0, 61);
        out.traj = synthetic_pde_trajectory(v1, 0.1, v2, 1.0 / 30.0, grid);
        const ProfileFamily family{ProfileKind::TruncatedLinear,
                                   lambda_grid(0.02, 0.3, 22, {0.1, 1.0 / 30.0}), 2.0};
        out.dict = build_dictionary(family, out.traj.grid);
        out.reg = 0.5 * lasso_reg_max(out.traj.states, out.dict);
        return out;
    }();
    return instance;
}

void BM_dmd_pde(benchmark::State& state)
{
    const Trajectory& traj = pde_trajectory();
    for (auto _ : state) {
        benchmark::DoNotOptimize(dmd(traj, RankRule::energy_fraction(0.9999)));
    }
}
BENCHMARK(BM_dmd_pde)->Unit(benchmark::kMillisecond);

void BM_sparse_sweep_point(benchmark::State& state)
{
    const SweepPointInstance& instance = sweep_point_instance();
    LassoOptions opts;
    opts.max_sweeps = 20000;
    for (auto _ : state) {
        const Matrix coeffs = lasso(instance.traj.states, instance.dict,
                                    instance.reg, opts);
        benchmark::DoNotOptimize(
            prune_and_refit(instance.traj.states, instance.dict, coeffs,
                            instance.reg));
    }
}
BENCHMARK(BM_sparse_sweep_point)->Unit(benchmark::kMillisecond);

void BM_rk4_closed_loop_grid(benchmark::State& state)
{
    const SystemSpec sys = bistable_cubic_system();
    Vector x0(1);
    x0(0) = -0.5;
    const TimeGrid grid = TimeGrid::uniform(0.0, 20.0, 2001);
    for (auto _ : state) {
        benchmark::DoNotOptimize(integrate(sys, x0, grid));
    }
}
BENCHMARK(BM_rk4_closed_loop_grid)->Unit(benchmark::kMicrosecond);

} // namespace

BENCHMARK_MAIN();
