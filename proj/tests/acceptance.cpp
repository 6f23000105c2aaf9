// End-to-end acceptance gate. Each numbered check prints one PASS/FAIL
// line; the process exits nonzero when any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "bev/dataio.hpp"
#include "bev/gradcheck.hpp"
#include "bev/losses.hpp"
#include "bev/maps.hpp"
#include "bev/metrics.hpp"
#include "bev/scenegen.hpp"

using namespace bev;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int index, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << index << " " << name;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << "\n";
  if (!ok) ++g_failures;
}

double seconds_since(const Clock::time_point& t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const CameraIntrinsics kCam = CameraIntrinsics::make(512, 512, 60.0);

VoxelGrid default_grid() {
  VoxelGrid g;
  g.depth_bins = 64;
  g.map_height = 128;
  g.map_width = 128;
  g.d_min = 0.5;
  g.d_max = 50.0;
  return g;
}

void check_normalization() {
  const auto t0 = Clock::now();
  const NormalizedErrors a = normalized_errors(108.9, 104.6, 0.93);
  const NormalizedErrors b = normalized_errors(132.1, 129.1, 0.56);
  const bool values_ok = std::abs(a.nmje - 117.1) < 0.1 && std::abs(a.nmve - 112.5) < 0.1 &&
                         std::abs(b.nmje - 235.9) < 0.1 && std::abs(b.nmve - 230.5) < 0.1;
  const double elapsed = seconds_since(t0);
  std::ostringstream detail;
  detail << "nmje " << a.nmje << "/" << b.nmje << ", " << elapsed << " s";
  report(1, "error normalization arithmetic", values_ok && elapsed < 1.0, detail.str());
}

void check_oracle_closure() {
  const auto t0 = Clock::now();
  const BodyModelAssets assets = make_toy_assets(64, 7);
  VoxelGrid grid = default_grid();
  grid.map_height = 64;  // keeps 100 scenes of map tensors in memory
  grid.map_width = 64;
  const AnchorMaps anchors(grid, kCam);

  SceneSpec spec;
  spec.seed = 99;
  spec.num_scenes = 100;
  spec.min_people = 3;
  spec.max_people = 10;
  spec.force_overlap = true;
  const auto generated = generate(spec, assets, grid, kCam);

  bool translations_ok = true;
  double worst_translation = 0.0;
  std::vector<SceneAnnotation> gt;
  std::vector<ScenePredictions> pred;
  for (const auto& scene : generated) {
    const auto detections =
        parse_detections(scene.maps.center3d, scene.maps.offset3d, anchors, 0.2, 64);
    if (detections.size() != scene.annotation.people.size()) translations_ok = false;

    ScenePredictions sp;
    sp.id = scene.annotation.id;
    for (const auto& det : detections) {
      // nearest annotated person supplies the regressed body parameters
      std::size_t best = 0;
      double best_dist = 1e300;
      for (std::size_t p = 0; p < scene.annotation.people.size(); ++p) {
        const double dist =
            (*scene.annotation.people[p].gt_translation - det.translation).norm();
        if (dist < best_dist) {
          best_dist = dist;
          best = p;
        }
      }
      worst_translation = std::max(worst_translation, best_dist);
      if (best_dist > 1e-9) translations_ok = false;

      PredictedPerson person;
      person.translation = det.translation;
      person.confidence = det.confidence;
      person.joints =
          smpl_plus_a(*scene.annotation.people[best].gt_params, assets, 0.8).joints;
      sp.people.push_back(std::move(person));
    }
    gt.push_back(scene.annotation);
    pred.push_back(std::move(sp));
  }

  const MetricsReport metrics = evaluate(gt, pred, kCam, MetricsConfig{}, &assets, 0.8);
  const double elapsed = seconds_since(t0);
  const bool ok = translations_ok && std::abs(metrics.f1 - 1.0) < 1e-12 &&
                  std::abs(metrics.pcdr.overall_pct - 100.0) < 1e-9 &&
                  metrics.mesh.mpjpe_mm < 1e-3 && elapsed < 30.0;
  std::ostringstream detail;
  detail << "f1 " << metrics.f1 << ", pcdr " << metrics.pcdr.overall_pct << "%, mpjpe "
         << metrics.mesh.mpjpe_mm << " mm, worst translation " << worst_translation
         << " m, " << elapsed << " s";
  report(2, "synthetic oracle closure over 100 scenes", ok, detail.str());
}

void check_gradients() {
  const auto t0 = Clock::now();
  const BodyModelAssets assets = make_toy_assets(64, 7);
  GradCheckOptions options;
  options.points = 1000;
  const GradCheckReport rep = run_gradient_checks(assets, 0.8, options);
  double worst = 0.0;
  for (const auto& s : rep.suites) worst = std::max(worst, s.max_rel_err);
  const double elapsed = seconds_since(t0);
  std::ostringstream detail;
  detail << rep.suites.size() << " suites, max rel err " << worst << ", " << elapsed
         << " s";
  report(3, "analytic gradients match finite differences", rep.all_passed() && elapsed < 60.0,
         detail.str());
}

void check_depth_layer_loss_properties() {
  bool ok = true;

  DepthLayerPair violated{5.0, 5.3, 1, 3, 0.3};
  ok &= std::abs(depth_layer_loss(violated).loss - 0.554355) < 1e-6;
  DepthLayerPair satisfied{5.0, 5.7, 1, 3, 0.3};
  ok &= depth_layer_loss(satisfied).loss == 0.0;
  // exactly representable values put the pair exactly on the margin
  DepthLayerPair at_margin{5.0, 5.5, 1, 3, 0.25};
  ok &= depth_layer_loss(at_margin).loss == 0.0;

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> depth(1.0, 20.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> layer(0, 5);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    DepthLayerPair pair;
    pair.gamma = 0.3;
    pair.d_i = depth(rng);
    pair.r_i = layer(rng);
    if (i % 2 == 0) {
      // same layer, equal depth
      pair.r_j = pair.r_i;
      pair.d_j = pair.d_i;
    } else {
      // farther layer, gap at or beyond the margin
      pair.r_j = pair.r_i + 1 + layer(rng);
      pair.d_j = pair.d_i + pair.gamma * (pair.r_j - pair.r_i) + unit(rng);
    }
    if (depth_layer_loss(pair).loss != 0.0) ++violations;

    DepthLayerPair random{depth(rng), depth(rng), layer(rng), layer(rng), 0.3};
    DepthLayerPair swapped{random.d_j, random.d_i, random.r_j, random.r_i, 0.3};
    if (std::abs(depth_layer_loss(random).loss - depth_layer_loss(swapped).loss) > 1e-12) {
      ++violations;
    }
  }
  ok &= violations == 0;
  std::ostringstream detail;
  detail << violations << " violations over 10000 pairs";
  report(4, "depth layer loss zero set and symmetry", ok, detail.str());
}

void check_age_loss_values() {
  const AgeRanges ranges = AgeRanges::defaults();
  const bool ok = std::abs(age_loss(0.10, AgeClass::Adult, ranges).loss - 0.0) < 1e-12 &&
                  std::abs(age_loss(0.50, AgeClass::Adult, ranges).loss - 0.25) < 1e-12 &&
                  std::abs(age_loss(0.90, AgeClass::Child, ranges).loss - 0.09) < 1e-12;
  report(5, "age loss worked values", ok, "");
}

void check_body_model() {
  const BodyModelAssets assets = make_toy_assets(64, 7);
  bool ok = true;

  const BodyMesh rest = smpl_plus_a(BodyParams::rest(), assets, 0.8);
  ok &= (rest.vertices - assets.template_adult).cwiseAbs().maxCoeff() == 0.0;

  BodyParams params = BodyParams::rest();
  params.alpha = 0.35;
  const BodyMesh blended = smpl_plus_a(params, assets, 0.8);
  const Eigen::MatrixXd expected =
      0.65 * assets.template_adult + 0.35 * assets.template_infant;
  ok &= (blended.vertices - expected).cwiseAbs().maxCoeff() < 1e-9;

  params.alpha = 0.81;
  ok &= (smpl_plus_a(params, assets, 0.8).vertices - assets.template_infant)
            .cwiseAbs()
            .maxCoeff() < 1e-9;
  params.alpha = 0.8;  // blended branch still applies at the threshold
  ok &= (smpl_plus_a(params, assets, 0.8).vertices -
         (0.2 * assets.template_adult + 0.8 * assets.template_infant))
            .cwiseAbs()
            .maxCoeff() < 1e-9;

  double prev = 1e300;
  for (int i = 0; i <= 16; ++i) {
    params.alpha = 0.8 * i / 16.0;
    const double h = smpl_plus_a(params, assets, 0.8).vertices.col(1).maxCoeff() -
                     smpl_plus_a(params, assets, 0.8).vertices.col(1).minCoeff();
    ok &= h <= prev + 1e-12;
    prev = h;
  }
  report(6, "body model blend and branch behavior", ok, "");
}

void check_matching_optimality() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> size(1, 6);
  bool ok = true;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = size(rng);
    Eigen::MatrixXd cost(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) cost(i, j) = unit(rng);

    const auto assignment = hungarian(cost);
    double got = 0.0;
    for (int i = 0; i < n; ++i) got += cost(i, assignment[i]);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
      double total = 0.0;
      for (int i = 0; i < n; ++i) total += cost(i, perm[i]);
      best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));

    if (std::abs(got - best) > 1e-9) ok = false;
  }
  report(7, "assignment optimality on 500 random cost matrices", ok, "");
}

void check_degradation_monotonicity() {
  const BodyModelAssets assets = make_toy_assets(32, 7);
  SceneSpec spec;
  spec.seed = 17;
  spec.num_scenes = 80;
  spec.min_people = 5;
  spec.max_people = 8;
  VoxelGrid grid = default_grid();
  grid.depth_bins = 16;  // map size does not matter here, memory does
  grid.map_height = 32;
  grid.map_width = 32;
  const auto generated = generate(spec, assets, grid, kCam);
  std::vector<SceneAnnotation> gt;
  for (const auto& s : generated) gt.push_back(s.annotation);

  const double levels[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
  bool ok = true;
  double prev = 101.0;
  std::ostringstream detail;
  for (int i = 0; i < 5; ++i) {
    NoiseSpec noise;
    noise.seed = 23;
    noise.depth_jitter = levels[i];
    const auto pred = perturb(gt, assets, kCam, 0.8, noise);
    const MetricsReport rep = evaluate(gt, pred, kCam, MetricsConfig{}, nullptr, 0.8);
    ok &= rep.pcdr.pairs_total >= 1000;
    ok &= rep.pcdr.overall_pct <= prev + 1e-9;
    prev = rep.pcdr.overall_pct;
    detail << (i ? " " : "") << rep.pcdr.overall_pct;
  }
  report(8, "pcdr non-increasing under growing depth jitter", ok, detail.str() + " %");
}

void check_round_trips() {
  bool ok = true;
  std::mt19937_64 rng(29);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<SceneAnnotation> scenes(5);
  for (int i = 0; i < 5; ++i) {
    scenes[i].id = "acc-" + std::to_string(i);
    scenes[i].width = scenes[i].height = 512;
    for (int p = 0; p < 4; ++p) {
      PersonAnnotation person;
      person.depth_layer = p % 2;
      person.age_class = static_cast<AgeClass>(p % 4);
      person.keypoints.resize(3, 3);
      for (int k = 0; k < 3; ++k)
        person.keypoints.row(k) << 512 * unit(rng), 512 * unit(rng), 1.0;
      person.gt_depth = 3.0 + unit(rng);
      person.gt_translation = Eigen::Vector3d(gauss(rng), gauss(rng), *person.gt_depth);
      BodyParams params = BodyParams::rest();
      params.alpha = unit(rng);
      for (int t = 0; t < BodyParams::kThetaDim; ++t) params.theta(t) += 0.1 * gauss(rng);
      person.gt_params = params;
      scenes[i].people.push_back(std::move(person));
    }
  }
  const std::string ann_a = "/tmp/bev_acc_ann_a.txt";
  const std::string ann_b = "/tmp/bev_acc_ann_b.txt";
  save_annotations(scenes, ann_a);
  const auto loaded = load_annotations(ann_a);
  ok &= loaded.size() == scenes.size();
  for (std::size_t i = 0; ok && i < scenes.size(); ++i) {
    ok &= loaded[i].id == scenes[i].id && loaded[i].people.size() == scenes[i].people.size();
    for (std::size_t p = 0; ok && p < scenes[i].people.size(); ++p) {
      const auto& x = scenes[i].people[p];
      const auto& y = loaded[i].people[p];
      ok &= x.depth_layer == y.depth_layer && x.age_class == y.age_class &&
            (x.keypoints.array() == y.keypoints.array()).all() &&
            *x.gt_depth == *y.gt_depth &&
            (x.gt_translation->array() == y.gt_translation->array()).all() &&
            (x.gt_params->theta.array() == y.gt_params->theta.array()).all() &&
            x.gt_params->alpha == y.gt_params->alpha;
    }
  }
  save_annotations(loaded, ann_b);
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  ok &= slurp(ann_a) == slurp(ann_b);

  std::vector<ScenePredictions> preds(2);
  for (int i = 0; i < 2; ++i) {
    preds[i].id = "p" + std::to_string(i);
    PredictedPerson q;
    q.translation = Eigen::Vector3d(gauss(rng), gauss(rng), 5.0);
    q.confidence = unit(rng);
    Eigen::MatrixXd joints(4, 3);
    for (int k = 0; k < 4; ++k) joints.row(k) << gauss(rng), gauss(rng), gauss(rng);
    q.joints = joints;
    preds[i].people.push_back(std::move(q));
  }
  const std::string pred_a = "/tmp/bev_acc_pred_a.txt";
  const std::string pred_b = "/tmp/bev_acc_pred_b.txt";
  save_predictions(preds, pred_a);
  const auto pred_loaded = load_predictions(pred_a);
  ok &= pred_loaded.size() == preds.size();
  for (std::size_t i = 0; ok && i < preds.size(); ++i) {
    ok &= (pred_loaded[i].people[0].translation.array() ==
           preds[i].people[0].translation.array())
              .all();
  }
  save_predictions(pred_loaded, pred_b);
  ok &= slurp(pred_a) == slurp(pred_b);

  ArrayContainer container;
  Array payload({4, 5});
  for (double& v : payload.data) v = gauss(rng);
  container["payload"] = payload;
  const std::string arr_a = "/tmp/bev_acc_arr_a.bva";
  const std::string arr_b = "/tmp/bev_acc_arr_b.bva";
  save_arrays(container, arr_a);
  const ArrayContainer arr_loaded = load_arrays(arr_a);
  ok &= arr_loaded.at("payload").shape == payload.shape &&
        arr_loaded.at("payload").data == payload.data;
  save_arrays(arr_loaded, arr_b);
  ok &= slurp(arr_a) == slurp(arr_b);

  for (const auto& path : {ann_a, ann_b, pred_a, pred_b, arr_a, arr_b}) {
    std::remove(path.c_str());
  }
  report(9, "file format round trips", ok, "");
}

}  // namespace

int main() {
  check_normalization();
  check_oracle_closure();
  check_gradients();
  check_depth_layer_loss_properties();
  check_age_loss_values();
  check_body_model();
  check_matching_optimality();
  check_degradation_monotonicity();
  check_round_trips();

  if (g_failures > 0) {
    std::cout << g_failures << " acceptance check(s) failed\n";
    return 1;
  }
  std::cout << "all acceptance checks passed\n";
  return 0;
}
