#include <benchmark/benchmark.h>

#include <map>

#include "depthedge/dataset.hpp"
#include "depthedge/evaluate.hpp"
#include "depthedge/net.hpp"
#include "depthedge/refine.hpp"
#include "depthedge/rng.hpp"
#include "depthedge/segment.hpp"
#include "depthedge/train.hpp"

using namespace depthedge;

namespace {

// One generated scene with truth per canvas size, built on first use.
const SceneBundle& scene(int size) {
    static std::map<int, SceneBundle> cache;
    auto it = cache.find(size);
    if (it == cache.end()) {
        DatasetConfig cfg;
        cfg.width = cfg.height = size;
        cfg.seed = 11;
        SceneBundle s = generate_scene(cfg, 0);
        compute_truth(s);
        it = cache.emplace(size, std::move(s)).first;
    }
    return it->second;
}

void BM_Conv2dForward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0)), cin = 16, cout = 16;
    Rng rng(3);
    Tensor<float> x(1, cin, size, size);
    for (auto& v : x.data) v = static_cast<float>(rng.normal());
    std::vector<float> w(static_cast<std::size_t>(cout) * cin * 16), b(cout);
    for (auto& v : w) v = static_cast<float>(rng.normal() * 0.1);
    const ConvGeometry g;
    for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward(x, w, b, cout, g));
    state.SetItemsProcessed(state.iterations() * size * size);
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Infer(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const auto params = NetworkParameters<float>::initialize(ArchitectureConfig::make_default(5), 1);
    const SceneBundle& s = scene(size);
    for (auto _ : state) benchmark::DoNotOptimize(infer(params, s));
}
BENCHMARK(BM_Infer)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_GroundTruth(benchmark::State& state) {
    const SceneBundle& s = scene(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(make_ground_truth(s.disparity_gt, s.normals_gt));
}
BENCHMARK(BM_GroundTruth)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Median(benchmark::State& state) {
    const SceneBundle& s = scene(128);
    const FilterSpec spec = FilterSpec::median(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(filter(s.disparity_est, spec));
}
BENCHMARK(BM_Median)->Arg(2)->Arg(7)->Unit(benchmark::kMillisecond);

void BM_Watershed(benchmark::State& state) {
    const SceneBundle& s = scene(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(watershed(s.edges_gt));
}
BENCHMARK(BM_Watershed)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Segment(benchmark::State& state) {
    const SceneBundle& s = scene(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(segment(s.edges_gt));
}
BENCHMARK(BM_Segment)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_PrCurve(benchmark::State& state) {
    const SceneBundle& s = scene(128);
    const SegmentationHierarchy h = segment(s.edges_gt);
    const Image gt = binarize(s.edges_gt);
    const auto thresholds = uniform_thresholds(33);
    const int radius = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(pr_curve(h, gt, thresholds, radius));
}
BENCHMARK(BM_PrCurve)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_MultiscaleRefine(benchmark::State& state) {
    const SceneBundle& s = scene(static_cast<int>(state.range(0)));
    RefineConfig cfg;
    cfg.levels = static_cast<int>(state.range(1));
    for (auto _ : state)
        benchmark::DoNotOptimize(multiscale_refine(s.disparity_est, s.contour_gt, s.directions_gt, cfg));
}
BENCHMARK(BM_MultiscaleRefine)->Args({64, 1})->Args({128, 1})->Args({128, 3})->Unit(benchmark::kMillisecond);

void BM_GenerateScene(benchmark::State& state) {
    DatasetConfig cfg;
    cfg.width = cfg.height = static_cast<int>(state.range(0));
    int i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(generate_scene(cfg, i++));
}
BENCHMARK(BM_GenerateScene)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
