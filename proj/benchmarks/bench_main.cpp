#include <memory>

#include <benchmark/benchmark.h>

#include "peakinf/field.hpp"
#include "peakinf/harness.hpp"
#include "peakinf/infer.hpp"
#include "peakinf/peaks.hpp"
#include "peakinf/randomized.hpp"

using namespace peakinf;

namespace {

std::shared_ptr<const Grid> square_grid(int n) {
    return std::make_shared<const Grid>(Box{Vec::Constant(2, -0.5), Vec::Constant(2, 0.5)}, std::vector<int>{n, n});
}

std::shared_ptr<const SignalSpec> bump_signal(double height) {
    auto s = std::make_shared<SignalSpec>();
    s->domain = Box{Vec::Constant(2, -0.5), Vec::Constant(2, 0.5)};
    s->bumps.push_back({Vec::Zero(2), height, 0.15});
    return s;
}

}  // namespace

static void BM_CovarianceFactor(benchmark::State& state) {
    const auto grid = square_grid(static_cast<int>(state.range(0)));
    KernelSpec k;
    for (auto _ : state) benchmark::DoNotOptimize(covariance_factor(k, grid));
}
BENCHMARK(BM_CovarianceFactor)->Arg(21)->Arg(31)->Arg(41)->Unit(benchmark::kMillisecond);

static void BM_SampleField(benchmark::State& state) {
    const auto factor = covariance_factor(KernelSpec{}, square_grid(static_cast<int>(state.range(0))));
    const auto signal = bump_signal(8.0);
    std::uint32_t r = 0;
    for (auto _ : state) benchmark::DoNotOptimize(sample_field(factor, signal, NoiseKey{1, r++, kNoiseStream, 0}));
}
BENCHMARK(BM_SampleField)->Arg(21)->Arg(41)->Unit(benchmark::kMicrosecond);

static void BM_FindLocalMaxima(benchmark::State& state) {
    const auto factor = covariance_factor(KernelSpec{}, square_grid(static_cast<int>(state.range(0))));
    const auto sample = sample_field(factor, bump_signal(8.0), NoiseKey{1, 0, kNoiseStream, 0});
    for (auto _ : state) benchmark::DoNotOptimize(find_local_maxima(sample));
}
BENCHMARK(BM_FindLocalMaxima)->Arg(21)->Arg(41)->Unit(benchmark::kMicrosecond);

static void BM_SoftTgCdf(benchmark::State& state) {
    const double gamma = state.range(0) == 0 ? 1.0 : 1e-6;
    for (auto _ : state) benchmark::DoNotOptimize(soft_tg_cdf(8.3, 7.0, 8.0, gamma, 0.4));
}
BENCHMARK(BM_SoftTgCdf)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

static void BM_HeightIntervals(benchmark::State& state) {
    KernelSpec k;
    const Mat lambda = derivative_bundle(k).lambda;
    const auto factor = covariance_factor(k, square_grid(41));
    const auto sample = sample_field(factor, bump_signal(8.0), NoiseKey{1, 0, kNoiseStream, 0});
    const auto peaks = find_local_maxima(sample);
    const Peak& top = peaks.front();
    CarveContext ctx;
    ctx.u = top.height - 0.5;
    ctx.sel_peak = top;
    ctx.full_peak = top;
    ctx.H_inf = top.neg_hessian;
    const bool carve = state.range(0) == 1;
    for (auto _ : state) {
        if (carve)
            benchmark::DoNotOptimize(carve_height_interval(ctx, 0.1, lambda));
        else
            benchmark::DoNotOptimize(height_interval(top, top.height - 0.5, 0.1, lambda));
    }
    state.SetLabel(carve ? "carve" : "standard");
}
BENCHMARK(BM_HeightIntervals)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

static void BM_Replicate(benchmark::State& state) {
    const auto plan = make_plan(make_config("exp1", R"({"replicates": 1})"));
    std::uint32_t r = 0;
    for (auto _ : state) benchmark::DoNotOptimize(run_replicate(plan, r++));
}
BENCHMARK(BM_Replicate)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
