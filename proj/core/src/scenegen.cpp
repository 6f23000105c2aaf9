#include "bev/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace bev {

void SceneSpec::validate() const {
  if (num_scenes < 1) throw Error("scene spec: num_scenes must be >= 1");
  if (min_people < 1 || max_people < min_people) {
    throw Error("scene spec: invalid person count range");
  }
  if (!(depth_min > 0.0 && depth_min < depth_max)) {
    throw Error("scene spec: invalid depth range");
  }
  if (!(lateral_margin >= 0.0 && lateral_margin < 0.5)) {
    throw Error("scene spec: lateral margin must lie in [0, 0.5)");
  }
  double total = 0.0;
  for (double f : age_mix) {
    if (f < 0.0) throw Error("scene spec: negative age fraction");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("scene spec: age mix must sum to 1");
  if (gamma <= 0.0) throw Error("scene spec: gamma must be positive");
}

namespace {

constexpr int kMaxRetries = 100;
constexpr double kLayerSpread = 0.12;  // within-layer depth spread bound

AgeClass draw_age(std::mt19937_64& rng, const std::array<double, kNumAgeClasses>& mix) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double x = unit(rng);
  for (int c = 0; c < kNumAgeClasses; ++c) {
    if (x < mix[c] || c == kNumAgeClasses - 1) return static_cast<AgeClass>(c);
    x -= mix[c];
  }
  return AgeClass::Adult;
}

double draw_alpha(std::mt19937_64& rng, AgeClass c) {
  // inside the class's (lower, upper], clipped to the valid [0,1] domain
  static const std::array<std::pair<double, double>, kNumAgeClasses> bounds = {
      std::pair{-0.05, 0.15}, {0.15, 0.45}, {0.45, 0.75}, {0.75, 1.0}};
  const auto [lo, hi] = bounds[static_cast<int>(c)];
  const double eff_lo = std::max(0.0, lo);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double margin = 0.05 * (hi - eff_lo);
  return eff_lo + margin + u(rng) * (hi - eff_lo - margin);
}

/// Largest metric depth step of the grid, used to guarantee forced-overlap
/// pairs land in distinct depth bins.
double max_depth_step(const VoxelGrid& grid) {
  double step = 0.0;
  for (int d = 0; d + 1 < grid.depth_bins; ++d) {
    step = std::max(step, grid.depth_of_bin(d + 1) - grid.depth_of_bin(d));
  }
  return step;
}

}  // namespace

std::vector<GeneratedScene> generate(const SceneSpec& spec, const BodyModelAssets& assets,
                                     const VoxelGrid& grid, const CameraIntrinsics& cam,
                                     double t_alpha, double sigma) {
  spec.validate();
  grid.validate();
  if (spec.depth_min < grid.d_min || spec.depth_max > grid.d_max) {
    throw Error("scene spec: depth range must lie inside the grid depth range");
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double overlap_gap = spec.force_overlap ? 2.5 * max_depth_step(grid) : 0.0;

  std::vector<GeneratedScene> out;
  out.reserve(spec.num_scenes);
  for (int si = 0; si < spec.num_scenes; ++si) {
    const int n = std::min(
        spec.max_people,
        spec.min_people +
            static_cast<int>(unit(rng) * (spec.max_people - spec.min_people + 1)));

    // Layer anchors spaced so cross-layer gaps respect the gamma margin
    // for any layer difference and, when forcing overlaps, span >= 2 bins.
    const int target_layers = std::min(n, 2 + static_cast<int>(unit(rng) * 3));
    std::vector<double> anchors;
    double a = spec.depth_min + unit(rng) * 0.2 * (spec.depth_max - spec.depth_min);
    for (int l = 0; l < target_layers && a < spec.depth_max - kLayerSpread; ++l) {
      anchors.push_back(a);
      a += std::max(spec.gamma + kLayerSpread + unit(rng) * 0.5, overlap_gap);
    }
    if (anchors.empty()) anchors.push_back(spec.depth_min);
    const int num_layers = static_cast<int>(anchors.size());

    GeneratedScene scene;
    scene.annotation.id = "synthetic-" + std::to_string(spec.seed) + "-" + std::to_string(si);
    scene.annotation.width = cam.width;
    scene.annotation.height = cam.height;

    struct Placement {
      int cell_h, cell_w;
      double u, v, depth;
      int layer;
    };
    std::vector<Placement> placed;

    const double u_lo = spec.lateral_margin * cam.width;
    const double u_hi = (1.0 - spec.lateral_margin) * cam.width;
    const double v_lo = spec.lateral_margin * cam.height;
    const double v_hi = (1.0 - spec.lateral_margin) * cam.height;

    for (int pi = 0; pi < n; ++pi) {
      // person pi == 1 overlaps person 0's image cell when forced
      const bool overlap_partner = spec.force_overlap && pi == 1 && !placed.empty();
      bool ok = false;
      Placement pl{};
      for (int attempt = 0; attempt < kMaxRetries && !ok; ++attempt) {
        if (overlap_partner) {
          // same map cell, distinct pixel; keeps 2D matching unambiguous
          const double cell_px_w = static_cast<double>(cam.width) / grid.map_width;
          const double cell_px_h = static_cast<double>(cam.height) / grid.map_height;
          pl.u = grid.pixel_u(placed[0].cell_w, cam) + (unit(rng) - 0.5) * 0.8 * cell_px_w;
          pl.v = grid.pixel_v(placed[0].cell_h, cam) + (unit(rng) - 0.5) * 0.8 * cell_px_h;
          // any other layer: anchors are >= 2 bins apart when forcing
          pl.layer = (placed[0].layer + 1 +
                      static_cast<int>(unit(rng) * (num_layers - 1))) %
                     num_layers;
          if (num_layers < 2) throw PlacementInfeasible("forced overlap needs >= 2 layers");
        } else {
          pl.u = u_lo + unit(rng) * (u_hi - u_lo);
          pl.v = v_lo + unit(rng) * (v_hi - v_lo);
          pl.layer = static_cast<int>(unit(rng) * num_layers) % num_layers;
        }
        pl.depth = anchors[pl.layer] + unit(rng) * 0.9 * kLayerSpread;
        pl.cell_w = static_cast<int>(std::lround(grid.cell_w(pl.u, cam)));
        pl.cell_h = static_cast<int>(std::lround(grid.cell_h(pl.v, cam)));

        ok = true;
        const int dbin = static_cast<int>(std::lround(grid.bin_of_depth(pl.depth)));
        for (std::size_t q = 0; q < placed.size(); ++q) {
          const auto& other = placed[q];
          const int sep = std::max(std::abs(other.cell_h - pl.cell_h),
                                   std::abs(other.cell_w - pl.cell_w));
          const int other_dbin =
              static_cast<int>(std::lround(grid.bin_of_depth(other.depth)));
          if (overlap_partner && q == 0) {
            if (std::abs(other_dbin - dbin) < 2) ok = false;
            continue;
          }
          if (sep < std::max(1, spec.min_separation_cells)) ok = false;
          // distinct center voxels keep parsing unambiguous
          if (sep == 0 && other_dbin == dbin) ok = false;
        }
      }
      if (!ok) {
        throw PlacementInfeasible("scene " + scene.annotation.id + ": person " +
                                  std::to_string(pi) + " could not be placed");
      }
      placed.push_back(pl);
    }

    // Bodies: mild random pose/shape, age offset inside the class range.
    std::vector<double> depths(n);
    scene.annotation.people.resize(n);
    for (int pi = 0; pi < n; ++pi) {
      PersonAnnotation& person = scene.annotation.people[pi];
      person.age_class = draw_age(rng, spec.age_mix);

      BodyParams params = BodyParams::rest();
      for (int j = 0; j < BodyParams::kNumJoints; ++j) {
        Vector6d r = params.joint_rot(j);
        for (int k = 0; k < 6; ++k) r(k) += 0.05 * gauss(rng);
        params.set_joint_rot(j, r);
      }
      for (int k = 0; k < BodyParams::kBetaDim; ++k) params.beta(k) = 0.3 * gauss(rng);
      params.alpha = draw_alpha(rng, person.age_class);

      const BodyMesh mesh = smpl_plus_a(params, assets, t_alpha);
      const Eigen::Vector3d root = mesh.joints.row(0).transpose();

      const Placement& pl = placed[pi];
      const Eigen::Vector3d center =
          back_project(Eigen::Vector2d(pl.u, pl.v), pl.depth, cam);
      scene.centers.push_back(center);
      depths[pi] = center.z();

      person.gt_translation = center;
      person.gt_depth = center.z();
      person.gt_params = params;

      const int K = assets.num_eval_joints();
      person.keypoints.resize(K, 3);
      for (int k = 0; k < K; ++k) {
        const Eigen::Vector3d jw = center + (mesh.joints.row(k).transpose() - root);
        double vis = 0.0, u = 0.0, v = 0.0;
        if (jw.z() > 1e-6) {
          const Eigen::Vector2d px = project(jw, cam);
          u = px.x();
          v = px.y();
          vis = (u >= 0.0 && u < cam.width && v >= 0.0 && v < cam.height) ? 1.0 : 0.0;
        }
        person.keypoints.row(k) << u, v, vis;
      }
    }

    const std::vector<int> layers = derive_depth_layers(depths, spec.gamma);
    for (int pi = 0; pi < n; ++pi) scene.annotation.people[pi].depth_layer = layers[pi];

    scene.maps = render_gt_maps(scene.centers, grid, cam, sigma);
    out.push_back(std::move(scene));
  }
  return out;
}

std::vector<ScenePredictions> perturb(const std::vector<SceneAnnotation>& scenes,
                                      const BodyModelAssets& assets,
                                      const CameraIntrinsics& cam, double t_alpha,
                                      const NoiseSpec& noise) {
  std::mt19937_64 rng(noise.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double f = cam.focal();

  std::vector<ScenePredictions> out;
  out.reserve(scenes.size());
  for (const auto& scene : scenes) {
    ScenePredictions preds;
    preds.id = scene.id;
    for (const auto& person : scene.people) {
      // fixed draw count per person keeps streams aligned across noise levels
      const double drop_draw = unit(rng);
      const double depth_draw = gauss(rng);
      const double kp_draw_x = gauss(rng);
      const double kp_draw_y = gauss(rng);

      if (!person.gt_translation || !person.gt_params) continue;
      if (drop_draw < noise.drop_rate) continue;

      const BodyMesh mesh = smpl_plus_a(*person.gt_params, assets, t_alpha);
      const Eigen::Vector3d root = mesh.joints.row(0).transpose();

      PredictedPerson p;
      p.translation = *person.gt_translation;
      p.translation.z() += noise.depth_jitter * depth_draw;
      p.confidence = 1.0;
      Eigen::MatrixXd joints = mesh.joints;
      joints.rowwise() -= root.transpose();
      const double px_to_m = noise.keypoint_jitter_px * p.translation.z() / f;
      joints.col(0).array() += px_to_m * kp_draw_x;
      joints.col(1).array() += px_to_m * kp_draw_y;
      p.joints = std::move(joints);
      p.params = person.gt_params;
      preds.people.push_back(std::move(p));
    }
    out.push_back(std::move(preds));
  }
  return out;
}

}  // namespace bev
