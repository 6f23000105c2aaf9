#include "bev/gradcheck.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "bev/camera.hpp"

namespace bev {

bool GradCheckReport::all_passed() const {
  for (const auto& s : suites) {
    if (!s.passed) return false;
  }
  return !suites.empty();
}

std::string GradCheckReport::render() const {
  std::ostringstream os;
  os << "gradient check: step " << format_double(options.step) << ", tolerance "
     << format_double(options.tolerance) << ", " << options.points
     << " points per suite, seed " << options.seed << "\n";
  for (const auto& s : suites) {
    os << "  " << (s.passed ? "[PASS]" : "[FAIL]") << " " << s.name
       << "  max_rel_err=" << format_double(s.max_rel_err) << "\n";
  }
  os << (all_passed() ? "all suites passed" : "FAILURES PRESENT") << "\n";
  return os.str();
}

namespace {

// Error scale floors at 1 so near-zero gradients are compared absolutely.
double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

struct SuiteRunner {
  std::mt19937_64 rng;
  const GradCheckOptions& opt;
  GradCheckReport& report;

  void record(const std::string& name, double max_err) {
    report.suites.push_back({name, opt.points, max_err, max_err < opt.tolerance});
  }
};

void check_depth_layer(SuiteRunner& r) {
  std::uniform_real_distribution<double> depth(1.0, 10.0);
  std::uniform_int_distribution<int> layer(0, 3);
  const double gamma = 0.3;
  double max_err = 0.0;
  for (int p = 0; p < r.opt.points; ++p) {
    DepthLayerPair pair{};
    do {
      pair = {depth(r.rng), depth(r.rng), layer(r.rng), layer(r.rng), gamma};
    } while (std::abs((pair.d_i - pair.d_j) - gamma * (pair.r_i - pair.r_j)) <=
             r.opt.boundary_margin);
    const auto res = depth_layer_loss(pair);
    const double h = r.opt.step;
    auto at = [&pair](double di, double dj) {
      return depth_layer_loss({di, dj, pair.r_i, pair.r_j, pair.gamma}).loss;
    };
    const double fd_i = (at(pair.d_i + h, pair.d_j) - at(pair.d_i - h, pair.d_j)) / (2 * h);
    const double fd_j = (at(pair.d_i, pair.d_j + h) - at(pair.d_i, pair.d_j - h)) / (2 * h);
    max_err = std::max({max_err, rel_err(res.d_di, fd_i), rel_err(res.d_dj, fd_j)});
  }
  r.record("depth_layer_loss", max_err);
}

void check_age(SuiteRunner& r) {
  const AgeRanges ranges = AgeRanges::defaults();
  std::uniform_real_distribution<double> alpha(-0.1, 1.1);
  std::uniform_int_distribution<int> cls(0, kNumAgeClasses - 1);
  double max_err = 0.0;
  for (int p = 0; p < r.opt.points; ++p) {
    const AgeClass k = static_cast<AgeClass>(cls(r.rng));
    const AgeRange& range = ranges.of(k);
    double a;
    do {
      a = alpha(r.rng);
    } while (std::abs(a - range.lower) <= r.opt.boundary_margin ||
             std::abs(a - range.upper) <= r.opt.boundary_margin);
    const auto res = age_loss(a, k, ranges);
    const double h = r.opt.step;
    const double fd =
        (age_loss(a + h, k, ranges).loss - age_loss(a - h, k, ranges).loss) / (2 * h);
    max_err = std::max(max_err, rel_err(res.grad, fd));
  }
  r.record("age_loss", max_err);
}

void check_focal(SuiteRunner& r, bool three_d) {
  std::uniform_real_distribution<double> interior(0.01, 0.99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double max_err = 0.0;
  const int reps = std::max(1, r.opt.points / 25);  // cells checked per map
  for (int p = 0; p < reps; ++p) {
    Array pred = three_d ? Array::zeros({1, 4, 6, 6}) : Array::zeros({1, 8, 8});
    Array gt = pred;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred(i) = interior(r.rng);
      const double g = unit(r.rng);
      gt(i) = g > 0.9 ? 1.0 : 0.95 * g;  // a few exact positives
    }
    auto eval = [&](const Array& q) {
      return three_d ? focal_loss_3d(q, gt).loss : focal_loss_2d(q, gt).loss;
    };
    const auto res = three_d ? focal_loss_3d(pred, gt) : focal_loss_2d(pred, gt);
    const double h = r.opt.step;
    for (int c = 0; c < 25; ++c) {
      const std::size_t idx =
          static_cast<std::size_t>(unit(r.rng) * pred.size()) % pred.size();
      Array q = pred;
      q(idx) = pred(idx) + h;
      const double up = eval(q);
      q(idx) = pred(idx) - h;
      const double dn = eval(q);
      max_err = std::max(max_err, rel_err(res.grad(idx), (up - dn) / (2 * h)));
    }
  }
  r.record(three_d ? "focal_loss_3d" : "focal_loss_2d", max_err);
}

void check_projection(SuiteRunner& r) {
  const CameraIntrinsics cam = CameraIntrinsics::make(512, 512, 60.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr int K = 8;
  double max_err = 0.0;
  for (int p = 0; p < r.opt.points; ++p) {
    Eigen::MatrixXd joints(K, 3);
    Eigen::MatrixXd kp(K, 3);
    for (int k = 0; k < K; ++k) {
      joints.row(k) << 0.3 * gauss(r.rng), 0.3 * gauss(r.rng), 0.3 * gauss(r.rng);
      kp.row(k) << unit(r.rng) * cam.width, unit(r.rng) * cam.height,
          unit(r.rng) > 0.3 ? 1.0 : 0.0;
    }
    const Eigen::Vector3d trans(gauss(r.rng), gauss(r.rng), 4.0 + 2.0 * unit(r.rng));
    const auto res = projection_loss(joints, trans, kp, cam);
    const double h = r.opt.step;
    for (int c = 0; c < 6; ++c) {
      const int k = static_cast<int>(unit(r.rng) * K) % K;
      const int axis = static_cast<int>(unit(r.rng) * 3) % 3;
      Eigen::MatrixXd q = joints;
      q(k, axis) += h;
      const double up = projection_loss(q, trans, kp, cam).loss;
      q(k, axis) = joints(k, axis) - h;
      const double dn = projection_loss(q, trans, kp, cam).loss;
      max_err = std::max(max_err, rel_err(res.d_joints(k, axis), (up - dn) / (2 * h)));
    }
    for (int axis = 0; axis < 3; ++axis) {
      Eigen::Vector3d t = trans;
      t(axis) += h;
      const double up = projection_loss(joints, t, kp, cam).loss;
      t(axis) = trans(axis) - h;
      const double dn = projection_loss(joints, t, kp, cam).loss;
      max_err = std::max(max_err, rel_err(res.d_translation(axis), (up - dn) / (2 * h)));
    }
  }
  r.record("projection_loss", max_err);
}

void check_params(SuiteRunner& r) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double max_err = 0.0;
  for (int p = 0; p < r.opt.points; ++p) {
    BodyParams pred = BodyParams::rest();
    BodyParams gt = BodyParams::rest();
    for (int i = 0; i < BodyParams::kThetaDim; ++i) {
      pred.theta(i) += 0.2 * gauss(r.rng);
      gt.theta(i) += 0.2 * gauss(r.rng);
    }
    for (int i = 0; i < BodyParams::kBetaDim; ++i) {
      pred.beta(i) = gauss(r.rng);
      gt.beta(i) = gauss(r.rng);
    }
    const auto res = param_losses(pred, gt);
    const double h = r.opt.step;
    for (int c = 0; c < 6; ++c) {
      const int i =
          static_cast<int>(unit(r.rng) * BodyParams::kThetaDim) % BodyParams::kThetaDim;
      BodyParams q = pred;
      q.theta(i) += h;
      const double up = param_losses(q, gt).theta_loss;
      q.theta(i) = pred.theta(i) - h;
      const double dn = param_losses(q, gt).theta_loss;
      max_err = std::max(max_err, rel_err(res.d_theta(i), (up - dn) / (2 * h)));
    }
    for (int c = 0; c < 3; ++c) {
      const int i =
          static_cast<int>(unit(r.rng) * BodyParams::kBetaDim) % BodyParams::kBetaDim;
      BodyParams q = pred;
      q.beta(i) += h;
      const double up = param_losses(q, gt).beta_loss;
      q.beta(i) = pred.beta(i) - h;
      const double dn = param_losses(q, gt).beta_loss;
      max_err = std::max(max_err, rel_err(res.d_beta(i), (up - dn) / (2 * h)));
    }
  }
  r.record("param_losses", max_err);
}

void check_joints(SuiteRunner& r) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr int K = 10;
  double max_err_mpj = 0.0, max_err_pmpj = 0.0;
  for (int p = 0; p < r.opt.points; ++p) {
    Eigen::MatrixXd pred(K, 3), gt(K, 3);
    std::vector<int> vis(K);
    int n_vis = 0;
    for (int k = 0; k < K; ++k) {
      pred.row(k) << gauss(r.rng), gauss(r.rng), gauss(r.rng);
      gt.row(k) << gauss(r.rng), gauss(r.rng), gauss(r.rng);
      vis[k] = unit(r.rng) > 0.3 ? 1 : 0;
      n_vis += vis[k];
    }
    for (int k = 0; n_vis < 3 && k < K; ++k) {
      if (!vis[k]) {
        vis[k] = 1;
        ++n_vis;
      }
    }
    const auto res = joint_losses(pred, gt, vis);
    const double h = r.opt.step;
    for (int c = 0; c < 6; ++c) {
      const int k = static_cast<int>(unit(r.rng) * K) % K;
      const int axis = static_cast<int>(unit(r.rng) * 3) % 3;
      Eigen::MatrixXd q = pred;
      q(k, axis) += h;
      const auto up = joint_losses(q, gt, vis);
      q(k, axis) = pred(k, axis) - h;
      const auto dn = joint_losses(q, gt, vis);
      max_err_mpj = std::max(
          max_err_mpj, rel_err(res.d_mpj(k, axis), (up.mpj - dn.mpj) / (2 * h)));
      if (res.pmpj_valid) {
        max_err_pmpj = std::max(
            max_err_pmpj, rel_err(res.d_pmpj(k, axis), (up.pmpj - dn.pmpj) / (2 * h)));
      }
    }
  }
  r.record("joint_loss", max_err_mpj);
  r.record("procrustes_joint_loss", max_err_pmpj);
}

void check_body_model(SuiteRunner& r, const BodyModelAssets& assets, double t_alpha) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int V = assets.num_vertices();
  const int K = assets.num_eval_joints();
  constexpr int P = BodyParams::kThetaDim + BodyParams::kBetaDim + 1;
  double max_err = 0.0;
  for (int p = 0; p < r.opt.points; ++p) {
    BodyParams params = BodyParams::rest();
    for (int i = 0; i < BodyParams::kThetaDim; ++i) params.theta(i) += 0.1 * gauss(r.rng);
    for (int i = 0; i < BodyParams::kBetaDim; ++i) params.beta(i) = 0.5 * gauss(r.rng);
    // both branches, clear of the branch point and the [0, 1] ends
    params.alpha = (p % 2 == 0) ? 0.02 + unit(r.rng) * (t_alpha - 0.04)
                                : t_alpha + 0.02 + unit(r.rng) * (1.0 - t_alpha - 0.04);

    Eigen::VectorXd dir(P);
    for (int i = 0; i < P; ++i) dir(i) = gauss(r.rng);
    dir.normalize();

    const auto jac = smpl_plus_a_jacobian(params, assets, t_alpha);
    const Eigen::VectorXd dv = jac.d_vertices * dir;
    const Eigen::VectorXd dj = jac.d_joints * dir;

    auto shifted = [&params](const Eigen::VectorXd& d, double s) {
      BodyParams q = params;
      q.theta += s * d.head(BodyParams::kThetaDim);
      q.beta += s * d.segment(BodyParams::kThetaDim, BodyParams::kBetaDim);
      q.alpha += s * d(BodyParams::kThetaDim + BodyParams::kBetaDim);
      return q;
    };
    const double h = r.opt.step;
    const BodyMesh up = smpl_plus_a(shifted(dir, h), assets, t_alpha);
    const BodyMesh dn = smpl_plus_a(shifted(dir, -h), assets, t_alpha);
    for (int v = 0; v < V; ++v) {
      for (int axis = 0; axis < 3; ++axis) {
        const double fd = (up.vertices(v, axis) - dn.vertices(v, axis)) / (2 * h);
        max_err = std::max(max_err, rel_err(dv(3 * v + axis), fd));
      }
    }
    for (int k = 0; k < K; ++k) {
      for (int axis = 0; axis < 3; ++axis) {
        const double fd = (up.joints(k, axis) - dn.joints(k, axis)) / (2 * h);
        max_err = std::max(max_err, rel_err(dj(3 * k + axis), fd));
      }
    }
  }
  r.record("body_model_jacobian", max_err);
}

}  // namespace

GradCheckReport run_gradient_checks(const BodyModelAssets& assets, double t_alpha,
                                    const GradCheckOptions& options) {
  GradCheckReport report;
  report.options = options;
  SuiteRunner runner{std::mt19937_64(options.seed), options, report};
  check_depth_layer(runner);
  check_age(runner);
  check_focal(runner, false);
  check_focal(runner, true);
  check_projection(runner);
  check_params(runner);
  check_joints(runner);
  check_body_model(runner, assets, t_alpha);
  return report;
}

}  // namespace bev
