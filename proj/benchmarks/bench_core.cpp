#include <benchmark/benchmark.h>

#include <random>

#include "bev/body_model.hpp"
#include "bev/losses.hpp"
#include "bev/maps.hpp"
#include "bev/metrics.hpp"

using namespace bev;

namespace {

const CameraIntrinsics kCam = CameraIntrinsics::make(512, 512, 60.0);

VoxelGrid bench_grid() {
  VoxelGrid g;
  g.depth_bins = 64;
  g.map_height = 128;
  g.map_width = 128;
  g.d_min = 0.5;
  g.d_max = 50.0;
  return g;
}

std::vector<Eigen::Vector3d> bench_people(int n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> lateral(-1.5, 1.5);
  std::uniform_real_distribution<double> depth(3.0, 15.0);
  std::vector<Eigen::Vector3d> people;
  for (int i = 0; i < n; ++i) {
    people.emplace_back(lateral(rng), lateral(rng), depth(rng));
  }
  return people;
}

}  // namespace

static void BM_RenderGtMaps(benchmark::State& state) {
  const VoxelGrid grid = bench_grid();
  const auto people = bench_people(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(render_gt_maps(people, grid, kCam, 2.0, 8));
  }
}
BENCHMARK(BM_RenderGtMaps)->Arg(4)->Arg(16);

static void BM_ParseDetections(benchmark::State& state) {
  const VoxelGrid grid = bench_grid();
  const AnchorMaps anchors(grid, kCam);
  const MapSet maps = render_gt_maps(bench_people(16), grid, kCam, 2.0, 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        parse_detections(maps.center3d, maps.offset3d, anchors, 0.2, 64));
  }
}
BENCHMARK(BM_ParseDetections);

static void BM_BodyModel(benchmark::State& state) {
  const BodyModelAssets assets =
      make_toy_assets(static_cast<int>(state.range(0)), 1);
  BodyParams params = BodyParams::rest();
  params.alpha = 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(smpl_plus_a(params, assets, 0.8));
  }
}
BENCHMARK(BM_BodyModel)->Arg(64)->Arg(512);

static void BM_BodyModelJacobian(benchmark::State& state) {
  const BodyModelAssets assets = make_toy_assets(64, 1);
  BodyParams params = BodyParams::rest();
  params.alpha = 0.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(smpl_plus_a_jacobian(params, assets, 0.8));
  }
}
BENCHMARK(BM_BodyModelJacobian);

static void BM_Hungarian(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cost(i, j) = unit(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hungarian(cost));
  }
}
BENCHMARK(BM_Hungarian)->Arg(8)->Arg(64);

static void BM_FocalLoss3d(benchmark::State& state) {
  const MapSet maps = render_gt_maps(bench_people(8), bench_grid(), kCam, 2.0, 8);
  Array pred = maps.center3d;
  for (double& v : pred.data) v = 0.5 * v + 0.25;
  for (auto _ : state) {
    benchmark::DoNotOptimize(focal_loss_3d(pred, maps.center3d));
  }
}
BENCHMARK(BM_FocalLoss3d);

BENCHMARK_MAIN();
