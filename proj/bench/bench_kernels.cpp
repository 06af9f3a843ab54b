// SPDX-License-Identifier: Apache-2.0
// Serial reference vs OpenMP kernels on a synthetic trace set.
#include <benchmark/benchmark.h>

#include <numeric>

#include "xici/kernels.hpp"
#include "xici/preprocess.hpp"
#include "xici/synth.hpp"

namespace {

const xici::TraceSet& fixture() {
    static const xici::TraceSet set = [] {
        xici::SynthConfig cfg;
        cfg.meta = xici::qwen3_30b_meta();
        cfg.excluded_layers = xici::default_excluded_layers(cfg.meta, xici::Preset::Qwen3_30B);
        cfg.n_questions = 20;
        cfg.noise_std = 0.5;
        cfg.seed = 7;
        return xici::generate(cfg).traces;
    }();
    return set;
}

const xici::kernels::RoutingTable& table() {
    static const auto t = xici::kernels::serial::routing_table(fixture());
    return t;
}

std::vector<std::size_t> all_positions() {
    std::vector<std::size_t> pos(table().num_layers);
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    return pos;
}

const xici::kernels::QuestionDeltas& deltas() {
    static const xici::RoutingAnalysis analysis(fixture());
    static const auto d = analysis.question_deltas(fixture().sequences.front().question_id);
    return d;
}

std::vector<std::size_t> all_cells() {
    std::vector<std::size_t> c(deltas().num_layers * deltas().num_experts);
    std::iota(c.begin(), c.end(), std::size_t{0});
    return c;
}

void BM_RoutingTableSerial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(xici::kernels::serial::routing_table(fixture()));
}
void BM_RoutingTableOmp(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(xici::kernels::routing_table(fixture()));
}
void BM_MarksSerial(benchmark::State& st) {
    const auto pos = all_positions();
    for (auto _ : st)
        benchmark::DoNotOptimize(xici::kernels::serial::top_fraction_marks(table(), pos, 0.01));
}
void BM_MarksOmp(benchmark::State& st) {
    const auto pos = all_positions();
    for (auto _ : st) benchmark::DoNotOptimize(xici::kernels::top_fraction_marks(table(), pos, 0.01));
}
void BM_ExpertTestsSerial(benchmark::State& st) {
    const auto cells = all_cells();
    for (auto _ : st) benchmark::DoNotOptimize(xici::kernels::serial::expert_tests(deltas(), cells));
}
void BM_ExpertTestsOmp(benchmark::State& st) {
    const auto cells = all_cells();
    for (auto _ : st) benchmark::DoNotOptimize(xici::kernels::expert_tests(deltas(), cells));
}

} // namespace

BENCHMARK(BM_RoutingTableSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RoutingTableOmp)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MarksSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MarksOmp)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExpertTestsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExpertTestsOmp)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
