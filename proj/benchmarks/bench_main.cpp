#include <benchmark/benchmark.h>

#include "resdiff/metrics.hpp"
#include "resdiff/mlp.hpp"
#include "resdiff/sampler.hpp"
#include "resdiff/schedule.hpp"
#include "resdiff/tasks.hpp"
#include "resdiff/training.hpp"

namespace {

using namespace resdiff;

void BM_GaussianDraws(benchmark::State& state) {
    RandomStream stream(1);
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(gaussian(stream, Shape{n}));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_GaussianDraws)->Arg(1024)->Arg(65536);

void BM_PowerScheduleBuild(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(make_power_schedule(1000, 1.0, 1.0, 1.0, 1.0));
    }
}
BENCHMARK(BM_PowerScheduleBuild);

void BM_DdimConversion(benchmark::State& state) {
    const DdimSchedule d = make_ddim_schedule(1000, DdimFamily::kLinear);
    for (auto _ : state) {
        benchmark::DoNotOptimize(schedule_from_ddim(d, 1.0, VarianceMode::kSumConstrained));
    }
}
BENCHMARK(BM_DdimConversion);

void BM_MlpForward(benchmark::State& state) {
    MlpConfig cfg{64, 64, 32, 128, 1};
    RandomStream init(7);
    const MlpModel model = MlpModel::init(cfg, init);
    RandomStream stream(8);
    const Tensor input = gaussian(stream, Shape{16, cfg.input_dim()});
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.forward(input));
    }
}
BENCHMARK(BM_MlpForward);

void BM_TrainingStep(benchmark::State& state) {
    const TaskSpec task = make_task("shade-restore");
    const CoefficientSchedule sched = make_power_schedule(1000, 1.0, 1.0, 0.01, 0.0);
    MlpConfig cfg{64, 64, 32, 128, 1};
    RandomStream root(9);
    RandomStream init = root.derive(0);
    MlpModel model = MlpModel::init(cfg, init);
    AdamState adam(model);
    const AdamConfig acfg;
    long it = 0;
    for (auto _ : state) {
        RandomStream ds = root.derive(100 + static_cast<std::uint64_t>(it));
        const TripletBatch data = make_dataset(task, 1, ds);
        RandomStream ts = root.derive(200 + static_cast<std::uint64_t>(it));
        const TrainingBatch batch = sample_training_batch(data.i0, data.i_in, sched, ts, false);
        benchmark::DoNotOptimize(backprop_and_step(model, batch, LossConfig{1, 0, Norm::kL1},
                                                   PredictorRole::kResidual,
                                                   TimeConditionMode::kReparameterized, 1000.0,
                                                   adam, acfg, ++it));
    }
}
BENCHMARK(BM_TrainingStep);

void BM_OracleSample100Steps(benchmark::State& state) {
    const TaskSpec task = make_task("gaussian-2d");
    const CoefficientSchedule sched = make_power_schedule(1000, 1.0, 1.0, 1.0, 0.0);
    const GaussianOraclePredictor oracle(task.oracle_params);
    const SamplingPlan plan{uniform_timesteps(1000, 100), 0.0, SamplingMethod::kResidualNoise,
                            PathMode::kSimultaneous};
    const Tensor i_in(Shape{64, 2});
    std::uint64_t seed = 0;
    for (auto _ : state) {
        RandomStream stream(++seed);
        benchmark::DoNotOptimize(sample(plan, oracle, i_in, sched, stream));
    }
}
BENCHMARK(BM_OracleSample100Steps);

void BM_EnergyDistance(benchmark::State& state) {
    const TaskSpec task = make_task("mixture-2d");
    RandomStream a(1), b(2);
    const Tensor sa = make_dataset(task, 1000, a).i0;
    const Tensor sb = make_dataset(task, 1000, b).i0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(energy_distance(sa, sb));
    }
}
BENCHMARK(BM_EnergyDistance);

}  // namespace

BENCHMARK_MAIN();
