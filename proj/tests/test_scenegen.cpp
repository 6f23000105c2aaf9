#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bev/losses.hpp"
#include "bev/metrics.hpp"
#include "bev/scenegen.hpp"

using namespace bev;

namespace {

const CameraIntrinsics kCam = CameraIntrinsics::make(512, 512, 60.0);

// modest resolutions; many scenes' map tensors stay resident at once
VoxelGrid default_grid() {
  VoxelGrid g;
  g.depth_bins = 32;
  g.map_height = 64;
  g.map_width = 64;
  g.d_min = 0.5;
  g.d_max = 50.0;
  return g;
}

VoxelGrid tiny_grid() {
  VoxelGrid g = default_grid();
  g.depth_bins = 16;
  g.map_height = 32;
  g.map_width = 32;
  return g;
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/bev_scenegen_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("generation is deterministic for a fixed seed") {
  const BodyModelAssets assets = make_toy_assets(32, 1);
  SceneSpec spec;
  spec.seed = 7;
  spec.num_scenes = 3;
  const auto a = generate(spec, assets, default_grid(), kCam);
  const auto b = generate(spec, assets, default_grid(), kCam);
  REQUIRE(a.size() == b.size());

  TempFile fa("det_a.txt"), fb("det_b.txt");
  std::vector<SceneAnnotation> sa, sb;
  for (const auto& s : a) sa.push_back(s.annotation);
  for (const auto& s : b) sb.push_back(s.annotation);
  save_annotations(sa, fa.path);
  save_annotations(sb, fb.path);
  CHECK(slurp(fa.path) == slurp(fb.path));
  CHECK(a[0].maps.center3d.data == b[0].maps.center3d.data);
}

TEST_CASE("generated scenes respect the spec invariants") {
  const BodyModelAssets assets = make_toy_assets(32, 1);
  SceneSpec spec;
  spec.seed = 11;
  spec.num_scenes = 10;
  const VoxelGrid grid = default_grid();
  const auto scenes = generate(spec, assets, grid, kCam);
  for (const auto& scene : scenes) {
    const int n = static_cast<int>(scene.annotation.people.size());
    CHECK(n >= spec.min_people);
    CHECK(n <= spec.max_people);
    std::vector<double> depths;
    for (const auto& p : scene.annotation.people) {
      REQUIRE(p.gt_depth.has_value());
      CHECK(*p.gt_depth >= spec.depth_min);
      CHECK(*p.gt_depth <= spec.depth_max);
      depths.push_back(*p.gt_depth);
    }
    // annotated layers are exactly the derived layers
    const auto layers = derive_depth_layers(depths, spec.gamma);
    for (int i = 0; i < n; ++i) CHECK(scene.annotation.people[i].depth_layer == layers[i]);
  }
}

TEST_CASE("alpha is drawn inside the annotated class range") {
  const BodyModelAssets assets = make_toy_assets(32, 1);
  const AgeRanges ranges = AgeRanges::defaults();
  SceneSpec spec;
  spec.seed = 13;
  spec.num_scenes = 20;
  const auto scenes = generate(spec, assets, default_grid(), kCam);
  int seen = 0;
  for (const auto& scene : scenes) {
    for (const auto& p : scene.annotation.people) {
      REQUIRE(p.gt_params.has_value());
      const AgeRange& r = ranges.of(p.age_class);
      CHECK(p.gt_params->alpha > r.lower);
      CHECK(p.gt_params->alpha <= r.upper);
      CHECK(age_loss(p.gt_params->alpha, p.age_class, ranges).loss == 0.0);
      ++seen;
    }
  }
  CHECK(seen > 50);
}

TEST_CASE("all-adult mix stays inside the adult range") {
  const BodyModelAssets assets = make_toy_assets(32, 1);
  SceneSpec spec;
  spec.seed = 17;
  spec.num_scenes = 5;
  spec.age_mix = {1.0, 0.0, 0.0, 0.0};
  const auto scenes = generate(spec, assets, default_grid(), kCam);
  for (const auto& scene : scenes) {
    for (const auto& p : scene.annotation.people) {
      CHECK(p.age_class == AgeClass::Adult);
      CHECK(p.gt_params->alpha > -0.05);
      CHECK(p.gt_params->alpha <= 0.15);
    }
  }
}

TEST_CASE("forced overlaps share the image cell at distinct depth bins") {
  const BodyModelAssets assets = make_toy_assets(32, 1);
  const VoxelGrid grid = default_grid();
  SceneSpec spec;
  spec.seed = 19;
  spec.num_scenes = 10;
  spec.force_overlap = true;
  const auto scenes = generate(spec, assets, grid, kCam);
  for (const auto& scene : scenes) {
    REQUIRE(scene.centers.size() >= 2);
    const Eigen::Vector2d a = project(scene.centers[0], kCam);
    const Eigen::Vector2d b = project(scene.centers[1], kCam);
    CHECK(std::lround(grid.cell_w(a.x(), kCam)) == std::lround(grid.cell_w(b.x(), kCam)));
    CHECK(std::lround(grid.cell_h(a.y(), kCam)) == std::lround(grid.cell_h(b.y(), kCam)));
    const long bin_a = std::lround(grid.bin_of_depth(scene.centers[0].z()));
    const long bin_b = std::lround(grid.bin_of_depth(scene.centers[1].z()));
    CHECK(std::abs(bin_a - bin_b) >= 2);
  }
}

TEST_CASE("ground truth satisfies every cross-layer margin") {
  const BodyModelAssets assets = make_toy_assets(32, 1);
  SceneSpec spec;
  spec.seed = 23;
  spec.num_scenes = 10;
  const auto scenes = generate(spec, assets, default_grid(), kCam);
  for (const auto& scene : scenes) {
    const auto& people = scene.annotation.people;
    for (std::size_t i = 0; i < people.size(); ++i) {
      for (std::size_t j = i + 1; j < people.size(); ++j) {
        const DepthLayerPair pair{*people[i].gt_depth, *people[j].gt_depth,
                                  people[i].depth_layer, people[j].depth_layer,
                                  spec.gamma};
        if (pair.r_i != pair.r_j) {
          // cross-layer relations sit exactly on the lossless branch
          CHECK(depth_layer_loss(pair).loss == 0.0);
        } else {
          // within a layer depths stay under the equal-depth threshold
          CHECK(std::abs(pair.d_i - pair.d_j) < 0.2);
        }
      }
    }
  }
}

TEST_CASE("zero-noise perturbation closes the loop at perfect scores") {
  const BodyModelAssets assets = make_toy_assets(32, 1);
  SceneSpec spec;
  spec.seed = 29;
  spec.num_scenes = 5;
  const auto generated = generate(spec, assets, default_grid(), kCam);
  std::vector<SceneAnnotation> gt;
  for (const auto& s : generated) gt.push_back(s.annotation);
  const auto pred = perturb(gt, assets, kCam, 0.8, NoiseSpec{});

  MetricsConfig cfg;
  const MetricsReport report = evaluate(gt, pred, kCam, cfg, &assets, 0.8);
  CHECK(report.f1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.pcdr.overall_pct == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(report.mesh.mpjpe_mm < 1e-6);
}

TEST_CASE("drop rate removes about the expected fraction of people") {
  const BodyModelAssets assets = make_toy_assets(32, 1);
  SceneSpec spec;
  spec.seed = 31;
  spec.num_scenes = 150;
  spec.min_people = 6;
  spec.max_people = 9;
  const auto generated = generate(spec, assets, tiny_grid(), kCam);
  std::vector<SceneAnnotation> gt;
  std::size_t people = 0;
  for (const auto& s : generated) {
    people += s.annotation.people.size();
    gt.push_back(s.annotation);
  }
  REQUIRE(people >= 1000);

  NoiseSpec noise;
  noise.drop_rate = 0.5;
  const auto pred = perturb(gt, assets, kCam, 0.8, noise);
  std::size_t kept = 0;
  for (const auto& p : pred) kept += p.people.size();
  const double rate = static_cast<double>(kept) / people;
  CHECK(rate > 0.45);
  CHECK(rate < 0.55);
}

TEST_CASE("large same-layer depth jitter breaks the same-layer relations") {
  const BodyModelAssets assets = make_toy_assets(32, 1);
  SceneSpec spec;
  spec.seed = 37;
  spec.num_scenes = 30;
  spec.depth_min = 5.0;  // headroom so jittered depths stay in front
  const auto generated = generate(spec, assets, tiny_grid(), kCam);
  std::vector<SceneAnnotation> gt;
  for (const auto& s : generated) gt.push_back(s.annotation);

  NoiseSpec noise;
  noise.depth_jitter = 0.5;
  const auto pred = perturb(gt, assets, kCam, 0.8, noise);
  MetricsConfig cfg;
  const MetricsReport clean = evaluate(gt, perturb(gt, assets, kCam, 0.8, NoiseSpec{}),
                                       kCam, cfg, nullptr, 0.8);
  const MetricsReport noisy = evaluate(gt, pred, kCam, cfg, nullptr, 0.8);
  CHECK(clean.pcdr.overall_pct == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(noisy.pcdr.overall_pct < 100.0);
}

TEST_CASE("perturbation draws are aligned across noise magnitudes") {
  const BodyModelAssets assets = make_toy_assets(32, 1);
  SceneSpec spec;
  spec.seed = 41;
  spec.num_scenes = 10;
  const auto generated = generate(spec, assets, default_grid(), kCam);
  std::vector<SceneAnnotation> gt;
  for (const auto& s : generated) gt.push_back(s.annotation);

  NoiseSpec drop_only;
  drop_only.drop_rate = 0.3;
  NoiseSpec drop_and_jitter = drop_only;
  drop_and_jitter.depth_jitter = 0.5;
  const auto a = perturb(gt, assets, kCam, 0.8, drop_only);
  const auto b = perturb(gt, assets, kCam, 0.8, drop_and_jitter);
  // the same people survive; only their depths differ
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].people.size() == b[i].people.size());
  }
}

TEST_CASE("invalid specs are rejected") {
  SceneSpec spec;
  spec.age_mix = {0.5, 0.5, 0.5, 0.0};
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = SceneSpec{};
  spec.min_people = 5;
  spec.max_people = 2;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = SceneSpec{};
  spec.depth_min = 0.1;  // below the grid range
  const BodyModelAssets assets = make_toy_assets(16, 1);
  CHECK_THROWS_AS(generate(spec, assets, default_grid(), kCam), Error);
}
