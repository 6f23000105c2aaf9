// bev: command line front end for the body model, map pipeline, losses,
// metrics, and the synthetic scene oracle. Exit codes: 0 success, 1 domain
// error, 2 usage error.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "bev/config.hpp"
#include "bev/dataio.hpp"
#include "bev/gradcheck.hpp"
#include "bev/maps.hpp"
#include "bev/metrics.hpp"
#include "bev/scenegen.hpp"

namespace {

using namespace bev;

Eigen::MatrixXd to_matrix(const Array& a, const std::string& name) {
  if (a.ndim() != 2) throw ShapeMismatch("asset array " + name + ": expected 2 dims");
  Eigen::MatrixXd m(a.dim(0), a.dim(1));
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < a.dim(1); ++j) m(i, j) = a(i, j);
  }
  return m;
}

Array from_matrix(const Eigen::MatrixXd& m) {
  Array a({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) a(i, j) = m(i, j);
  }
  return a;
}

const Array& require(const ArrayContainer& c, const std::string& name) {
  const auto it = c.find(name);
  if (it == c.end()) throw AssetMismatch("asset container: missing array " + name);
  return it->second;
}

BodyModelAssets assets_from_container(const ArrayContainer& c, const std::string& prefix) {
  BodyModelAssets a;
  a.template_adult = to_matrix(require(c, prefix + "template_adult"), "template_adult");
  a.template_infant = to_matrix(require(c, prefix + "template_infant"), "template_infant");
  a.shape_dirs = to_matrix(require(c, prefix + "shape_dirs"), "shape_dirs");
  a.pose_dirs = to_matrix(require(c, prefix + "pose_dirs"), "pose_dirs");
  a.skin_weights = to_matrix(require(c, prefix + "skin_weights"), "skin_weights");
  a.joint_regressor_skel =
      to_matrix(require(c, prefix + "joint_regressor_skel"), "joint_regressor_skel");
  a.joint_regressor_eval =
      to_matrix(require(c, prefix + "joint_regressor_eval"), "joint_regressor_eval");
  const Array& parents = require(c, prefix + "kinematic_parents");
  for (double v : parents.data) a.kinematic_parents.push_back(static_cast<int>(v));
  if (const auto it = c.find(prefix + "faces"); it != c.end()) {
    const Eigen::MatrixXd f = to_matrix(it->second, "faces");
    a.faces = f.cast<int>();
  }
  return a;
}

void assets_to_container(const BodyModelAssets& a, const std::string& prefix,
                         ArrayContainer& c) {
  c[prefix + "template_adult"] = from_matrix(a.template_adult);
  c[prefix + "template_infant"] = from_matrix(a.template_infant);
  c[prefix + "shape_dirs"] = from_matrix(a.shape_dirs);
  c[prefix + "pose_dirs"] = from_matrix(a.pose_dirs);
  c[prefix + "skin_weights"] = from_matrix(a.skin_weights);
  c[prefix + "joint_regressor_skel"] = from_matrix(a.joint_regressor_skel);
  c[prefix + "joint_regressor_eval"] = from_matrix(a.joint_regressor_eval);
  Array parents({a.kinematic_parents.size()});
  for (std::size_t i = 0; i < a.kinematic_parents.size(); ++i) {
    parents(i) = a.kinematic_parents[i];
  }
  c[prefix + "kinematic_parents"] = std::move(parents);
  if (a.faces.size() > 0) c[prefix + "faces"] = from_matrix(a.faces.cast<double>());
}

BodyModelAssets resolve_assets(const RunConfig& cfg) {
  if (!cfg.paths.assets.empty()) {
    const ArrayContainer c = load_arrays(cfg.paths.assets);
    BodyModelAssets a = assets_from_container(c, "");
    if (c.count("infant.template_adult")) {
      a.infant_assets =
          std::make_shared<BodyModelAssets>(assets_from_container(c, "infant."));
    }
    a.validate();
    return a;
  }
  return make_toy_assets(cfg.body.toy_vertices, cfg.body.toy_seed);
}

std::vector<Eigen::Vector3d> gt_centers(const SceneAnnotation& scene) {
  std::vector<Eigen::Vector3d> centers;
  for (const auto& p : scene.people) {
    if (!p.gt_translation) {
      throw MissingLayers("scene " + scene.id +
                          ": map rendering needs gt translations for every person");
    }
    centers.push_back(*p.gt_translation);
  }
  return centers;
}

void write_scene_maps(const MapSet& maps, const std::string& prefix, ArrayContainer& c) {
  c[prefix + "front_center"] = maps.front_center;
  c[prefix + "front_offset"] = maps.front_offset;
  c[prefix + "bev_center"] = maps.bev_center;
  c[prefix + "bev_offset"] = maps.bev_offset;
  c[prefix + "center3d"] = maps.center3d;
  c[prefix + "offset3d"] = maps.offset3d;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file: " + path);
  out << text;
}

struct GlobalOpts {
  std::string config_path;

  RunConfig config() const {
    std::string path = config_path.empty() ? default_config_path() : config_path;
    return path.empty() ? RunConfig{} : RunConfig::load(path);
  }
};

BodyParams params_from_flags(double alpha, std::uint64_t pose_seed, double pose_scale) {
  BodyParams params = BodyParams::rest();
  params.alpha = alpha;
  if (pose_scale != 0.0) {
    std::mt19937_64 rng(pose_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < BodyParams::kThetaDim; ++i) params.theta(i) += pose_scale * gauss(rng);
    for (int i = 0; i < BodyParams::kBetaDim; ++i) params.beta(i) = pose_scale * gauss(rng);
  }
  return params;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bev: age-blended body model, BEV localization maps, losses, metrics"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("-c,--config", g.config_path,
                 "config file (default: $BEV_CONFIG when set)");

  int exit_code = 0;
  auto guard = [&exit_code](auto&& fn) {
    return [&exit_code, fn]() {
      try {
        fn();
      } catch (const bev::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        exit_code = 1;
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        exit_code = 1;
      }
    };
  };

  // model-info
  {
    auto* cmd = app.add_subcommand("model-info", "print body model asset dimensions");
    auto export_path = std::make_shared<std::string>();
    cmd->add_option("--export-assets", *export_path, "write the resolved asset set");
    cmd->callback(guard([&g, export_path]() {
      const RunConfig cfg = g.config();
      const BodyModelAssets assets = resolve_assets(cfg);
      assets.validate();
      if (!export_path->empty()) {
        ArrayContainer c;
        assets_to_container(assets, "", c);
        if (assets.infant_assets) assets_to_container(*assets.infant_assets, "infant.", c);
        save_arrays(c, *export_path);
      }
      std::cout << "model-info: vertices=" << assets.num_vertices()
                << " skel_joints=" << assets.num_skel_joints()
                << " eval_joints=" << assets.num_eval_joints()
                << " faces=" << assets.faces.rows()
                << " infant_set=" << (assets.infant_assets ? "yes" : "no") << "\n";
    }));
  }

  // lbs-eval
  {
    auto* cmd = app.add_subcommand("lbs-eval", "evaluate the model, write mesh arrays");
    auto alpha = std::make_shared<double>(0.0);
    auto pose_seed = std::make_shared<std::uint64_t>(1);
    auto pose_scale = std::make_shared<double>(0.0);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--alpha", *alpha, "age offset in [0, 1]");
    cmd->add_option("--pose-seed", *pose_seed, "seed of the random pose draw");
    cmd->add_option("--pose-scale", *pose_scale, "std of the random pose draw");
    cmd->add_option("-o,--output", *out, "output array container")->required();
    cmd->callback(guard([&g, alpha, pose_seed, pose_scale, out]() {
      const RunConfig cfg = g.config();
      const BodyModelAssets assets = resolve_assets(cfg);
      const BodyParams params = params_from_flags(*alpha, *pose_seed, *pose_scale);
      const BodyMesh mesh = smpl_plus_a(params, assets, cfg.body.t_alpha);
      ArrayContainer c;
      c["vertices"] = from_matrix(mesh.vertices);
      c["joints"] = from_matrix(mesh.joints);
      save_arrays(c, *out);
      std::cout << "lbs-eval: alpha=" << format_double(*alpha) << " vertices="
                << mesh.vertices.rows() << " joints=" << mesh.joints.rows() << " -> "
                << *out << "\n";
    }));
  }

  // export-anchors
  {
    auto* cmd = app.add_subcommand("export-anchors", "write voxel anchor coordinates");
    auto out = std::make_shared<std::string>();
    cmd->add_option("-o,--output", *out, "output array container")->required();
    cmd->callback(guard([&g, out]() {
      const RunConfig cfg = g.config();
      const AnchorMaps anchors(cfg.grid, cfg.camera);
      const auto D = static_cast<std::size_t>(cfg.grid.depth_bins);
      const auto H = static_cast<std::size_t>(cfg.grid.map_height);
      const auto W = static_cast<std::size_t>(cfg.grid.map_width);
      Array a({D, H, W, 3});
      for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t h = 0; h < H; ++h) {
          for (std::size_t w = 0; w < W; ++w) {
            const Eigen::Vector3d& p = anchors.at(static_cast<int>(d), static_cast<int>(h),
                                                  static_cast<int>(w));
            for (std::size_t axis = 0; axis < 3; ++axis) a(d, h, w, axis) = p(axis);
          }
        }
      }
      ArrayContainer c;
      c["anchors"] = std::move(a);
      save_arrays(c, *out);
      std::cout << "export-anchors: " << D << "x" << H << "x" << W << "x3 -> " << *out
                << "\n";
    }));
  }

  // render-maps
  {
    auto* cmd = app.add_subcommand("render-maps", "render gt maps from annotations");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("-i,--annotations", *in, "annotation file with gt translations")
        ->required();
    cmd->add_option("-o,--output", *out, "output array container")->required();
    cmd->callback(guard([&g, in, out]() {
      const RunConfig cfg = g.config();
      const auto scenes = load_annotations(*in);
      ArrayContainer c;
      for (std::size_t i = 0; i < scenes.size(); ++i) {
        const MapSet maps = render_gt_maps(gt_centers(scenes[i]), cfg.grid, cfg.camera,
                                           cfg.maps.sigma, cfg.maps.encoding_dim);
        write_scene_maps(maps, "s" + std::to_string(i) + ".", c);
      }
      save_arrays(c, *out);
      std::cout << "render-maps: " << scenes.size() << " scenes -> " << *out << "\n";
    }));
  }

  // parse-maps
  {
    auto* cmd = app.add_subcommand("parse-maps", "extract detections from map arrays");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto ids_from = std::make_shared<std::string>();
    cmd->add_option("-i,--maps", *in, "array container from render-maps")->required();
    cmd->add_option("-o,--output", *out, "output prediction file")->required();
    cmd->add_option("--ids-from", *ids_from, "annotation file supplying scene ids");
    cmd->callback(guard([&g, in, out, ids_from]() {
      const RunConfig cfg = g.config();
      const ArrayContainer c = load_arrays(*in);
      std::vector<std::string> ids;
      if (!ids_from->empty()) {
        for (const auto& s : load_annotations(*ids_from)) ids.push_back(s.id);
      }
      const AnchorMaps anchors(cfg.grid, cfg.camera);
      std::vector<ScenePredictions> preds;
      for (std::size_t i = 0;; ++i) {
        const std::string prefix = "s" + std::to_string(i) + ".";
        const auto c3 = c.find(prefix + "center3d");
        const auto o3 = c.find(prefix + "offset3d");
        if (c3 == c.end() || o3 == c.end()) break;
        const auto dets = parse_detections(c3->second, o3->second, anchors,
                                           cfg.maps.parse_threshold, cfg.maps.max_people);
        ScenePredictions p;
        p.id = i < ids.size() ? ids[i] : "s" + std::to_string(i);
        for (const auto& det : dets) {
          PredictedPerson person;
          person.translation = det.translation;
          person.confidence = det.confidence;
          p.people.push_back(std::move(person));
        }
        preds.push_back(std::move(p));
      }
      save_predictions(preds, *out);
      std::size_t total = 0;
      for (const auto& p : preds) total += p.people.size();
      std::cout << "parse-maps: " << preds.size() << " scenes, " << total
                << " detections -> " << *out << "\n";
    }));
  }

  // synth
  {
    auto* cmd = app.add_subcommand("synth", "generate synthetic oracle scenes");
    auto spec = std::make_shared<SceneSpec>();
    auto out = std::make_shared<std::string>();
    auto out_maps = std::make_shared<std::string>();
    auto force_overlap = std::make_shared<bool>(false);
    cmd->add_option("--seed", spec->seed, "generation seed");
    cmd->add_option("--scenes", spec->num_scenes, "number of scenes");
    cmd->add_option("--min-people", spec->min_people, "minimum people per scene");
    cmd->add_option("--max-people", spec->max_people, "maximum people per scene");
    cmd->add_option("--depth-min", spec->depth_min, "nearest person depth, meters");
    cmd->add_option("--depth-max", spec->depth_max, "farthest person depth, meters");
    cmd->add_flag("--force-overlap", *force_overlap,
                  "place one pair per scene at the same image cell");
    cmd->add_option("-o,--output", *out, "output annotation file")->required();
    cmd->add_option("--output-maps", *out_maps, "optional gt map container");
    cmd->callback(guard([&g, spec, out, out_maps, force_overlap]() {
      const RunConfig cfg = g.config();
      spec->force_overlap = *force_overlap;
      spec->gamma = cfg.loss.gamma;
      const BodyModelAssets assets = resolve_assets(cfg);
      const auto scenes =
          generate(*spec, assets, cfg.grid, cfg.camera, cfg.body.t_alpha, cfg.maps.sigma);
      std::vector<SceneAnnotation> annotations;
      for (const auto& s : scenes) annotations.push_back(s.annotation);
      save_annotations(annotations, *out);
      if (!out_maps->empty()) {
        ArrayContainer c;
        for (std::size_t i = 0; i < scenes.size(); ++i) {
          write_scene_maps(scenes[i].maps, "s" + std::to_string(i) + ".", c);
        }
        save_arrays(c, *out_maps);
      }
      std::size_t people = 0;
      for (const auto& s : annotations) people += s.people.size();
      std::cout << "synth: " << annotations.size() << " scenes, " << people
                << " people -> " << *out << "\n";
    }));
  }

  // perturb
  {
    auto* cmd = app.add_subcommand("perturb", "degrade gt into noisy predictions");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto noise = std::make_shared<NoiseSpec>();
    cmd->add_option("-i,--annotations", *in, "annotation file with gt")->required();
    cmd->add_option("-o,--output", *out, "output prediction file")->required();
    cmd->add_option("--seed", noise->seed, "noise seed");
    cmd->add_option("--depth-jitter", noise->depth_jitter, "depth noise std, meters");
    cmd->add_option("--keypoint-jitter", noise->keypoint_jitter_px,
                    "keypoint noise std, pixels");
    cmd->add_option("--drop-rate", noise->drop_rate, "person drop probability");
    cmd->callback(guard([&g, in, out, noise]() {
      const RunConfig cfg = g.config();
      const BodyModelAssets assets = resolve_assets(cfg);
      const auto scenes = load_annotations(*in);
      const auto preds = perturb(scenes, assets, cfg.camera, cfg.body.t_alpha, *noise);
      save_predictions(preds, *out);
      std::size_t total = 0;
      for (const auto& p : preds) total += p.people.size();
      std::cout << "perturb: " << preds.size() << " scenes, " << total
                << " predictions -> " << *out << "\n";
    }));
  }

  // eval
  {
    auto* cmd = app.add_subcommand("eval", "evaluate predictions against annotations");
    auto gt_path = std::make_shared<std::string>();
    auto pred_path = std::make_shared<std::string>();
    auto report_path = std::make_shared<std::string>();
    auto record_path = std::make_shared<std::string>();
    cmd->add_option("-g,--annotations", *gt_path, "gt annotation file")->required();
    cmd->add_option("-p,--predictions", *pred_path, "prediction file")->required();
    cmd->add_option("-o,--report", *report_path, "report destination (default stdout)");
    cmd->add_option("--record", *record_path, "machine-readable record destination");
    cmd->callback(guard([&g, gt_path, pred_path, report_path, record_path]() {
      const RunConfig cfg = g.config();
      const BodyModelAssets assets = resolve_assets(cfg);
      const auto gt = load_annotations(*gt_path);
      const auto pred = load_predictions(*pred_path);
      MetricsReport report =
          evaluate(gt, pred, cfg.camera, cfg.metrics, &assets, cfg.body.t_alpha);
      report.config_echo = cfg.echo();
      write_text(*report_path, render_report(report));
      if (!record_path->empty()) write_text(*record_path, render_record(report));
      std::cout << "eval: f1=" << format_double(report.f1)
                << " pcdr=" << format_double(report.pcdr.overall_pct)
                << " mpjpe_mm=" << format_double(report.mesh.mpjpe_mm) << "\n";
    }));
  }

  // grad-check
  {
    auto* cmd = app.add_subcommand("grad-check", "finite-difference gradient audit");
    auto opts = std::make_shared<GradCheckOptions>();
    cmd->add_option("--seed", opts->seed, "sampling seed");
    cmd->add_option("--points", opts->points, "points per suite");
    cmd->callback(guard([&g, opts, &exit_code]() {
      const RunConfig cfg = g.config();
      const BodyModelAssets assets = resolve_assets(cfg);
      const GradCheckReport report = run_gradient_checks(assets, cfg.body.t_alpha, *opts);
      std::cout << report.render();
      if (!report.all_passed()) exit_code = 1;
    }));
  }

  // validate
  {
    auto* cmd = app.add_subcommand("validate", "check annotation schema invariants");
    auto in = std::make_shared<std::string>();
    cmd->add_option("-i,--annotations", *in, "annotation file")->required();
    cmd->callback(guard([in, &exit_code]() {
      const auto scenes = load_annotations(*in);
      const auto violations = validate(scenes);
      for (const auto& v : violations) std::cout << v << "\n";
      std::cout << "validate: " << scenes.size() << " scenes, " << violations.size()
                << " violations\n";
      if (!violations.empty()) exit_code = 1;
    }));
  }

  // stats
  {
    auto* cmd = app.add_subcommand("stats", "annotation corpus statistics");
    auto in = std::make_shared<std::string>();
    cmd->add_option("-i,--annotations", *in, "annotation file")->required();
    cmd->callback(guard([in]() {
      const auto scenes = load_annotations(*in);
      const AnnotationStats s = stats(scenes);
      std::cout << "scenes " << s.scenes << "\n" << "people " << s.people << "\n";
      for (int c = 0; c < kNumAgeClasses; ++c) {
        std::cout << "age." << to_string(static_cast<AgeClass>(c)) << " " << s.per_age[c]
                  << "\n";
      }
      for (const auto& [layer, count] : s.layer_histogram) {
        std::cout << "layer." << layer << " " << count << "\n";
      }
      std::cout << "stats: " << s.scenes << " scenes, " << s.people << " people\n";
    }));
  }

  // export-mesh
  {
    auto* cmd = app.add_subcommand("export-mesh", "write the posed mesh as OBJ text");
    auto alpha = std::make_shared<double>(0.0);
    auto pose_seed = std::make_shared<std::uint64_t>(1);
    auto pose_scale = std::make_shared<double>(0.0);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--alpha", *alpha, "age offset in [0, 1]");
    cmd->add_option("--pose-seed", *pose_seed, "seed of the random pose draw");
    cmd->add_option("--pose-scale", *pose_scale, "std of the random pose draw");
    cmd->add_option("-o,--output", *out, "output OBJ file")->required();
    cmd->callback(guard([&g, alpha, pose_seed, pose_scale, out]() {
      const RunConfig cfg = g.config();
      const BodyModelAssets assets = resolve_assets(cfg);
      const BodyParams params = params_from_flags(*alpha, *pose_seed, *pose_scale);
      const BodyMesh mesh = smpl_plus_a(params, assets, cfg.body.t_alpha);
      std::ostringstream os;
      for (Eigen::Index v = 0; v < mesh.vertices.rows(); ++v) {
        os << "v " << format_double(mesh.vertices(v, 0)) << " "
           << format_double(mesh.vertices(v, 1)) << " "
           << format_double(mesh.vertices(v, 2)) << "\n";
      }
      for (Eigen::Index f = 0; f < assets.faces.rows(); ++f) {
        os << "f " << assets.faces(f, 0) + 1 << " " << assets.faces(f, 1) + 1 << " "
           << assets.faces(f, 2) + 1 << "\n";
      }
      write_text(*out, os.str());
      std::cout << "export-mesh: " << mesh.vertices.rows() << " vertices, "
                << assets.faces.rows() << " faces -> " << *out << "\n";
    }));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return exit_code;
}
