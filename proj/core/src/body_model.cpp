#include "bev/body_model.hpp"

#include <cmath>
#include <random>

#include "bev/common.hpp"

namespace bev {

BodyParams::BodyParams() : theta(kThetaDim), beta(kBetaDim) {
  for (int j = 0; j < kNumJoints; ++j) theta.segment<6>(6 * j) = rot6d_identity();
  beta.setZero();
}

BodyParams::BodyParams(Eigen::VectorXd theta_in, Eigen::VectorXd beta_in, double alpha_in)
    : theta(std::move(theta_in)), beta(std::move(beta_in)), alpha(alpha_in) {
  if (theta.size() != kThetaDim) {
    throw Error("BodyParams: theta must have " + std::to_string(kThetaDim) + " entries");
  }
  if (beta.size() != kBetaDim) {
    throw Error("BodyParams: beta must have " + std::to_string(kBetaDim) + " entries");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error("BodyParams: alpha must lie in [0,1], got " + format_double(alpha));
  }
}

BodyParams BodyParams::rest() { return BodyParams(); }

Eigen::VectorXd BodyParams::body_axis_angle() const {
  Eigen::VectorXd aa(3 * (kNumJoints - 1));
  for (int j = 1; j < kNumJoints; ++j) {
    aa.segment<3>(3 * (j - 1)) = matrix_to_axis_angle(rot6d_to_matrix(joint_rot(j)));
  }
  return aa;
}

void BodyModelAssets::validate() const {
  const int V = num_vertices();
  const int Js = num_skel_joints();
  const int K = num_eval_joints();
  if (V < 1 || Js < 1 || K < 1) throw AssetMismatch("assets: empty dimension");
  if (template_infant.rows() != V || template_infant.cols() != 3 || template_adult.cols() != 3) {
    throw AssetMismatch("assets: template shape mismatch");
  }
  if (shape_dirs.rows() != 3 * V || shape_dirs.cols() != BodyParams::kBetaDim) {
    throw AssetMismatch("assets: shape_dirs must be 3V x 10");
  }
  if (pose_dirs.rows() != 3 * V || pose_dirs.cols() != 9 * (Js - 1)) {
    throw AssetMismatch("assets: pose_dirs must be 3V x 9*(Js-1)");
  }
  if (skin_weights.rows() != V) throw AssetMismatch("assets: skin_weights must be V x Js");
  if (joint_regressor_skel.rows() != Js || joint_regressor_skel.cols() != V) {
    throw AssetMismatch("assets: joint_regressor_skel must be Js x V");
  }
  if (joint_regressor_eval.cols() != V) {
    throw AssetMismatch("assets: joint_regressor_eval must be K x V");
  }
  if (static_cast<int>(kinematic_parents.size()) != Js) {
    throw AssetMismatch("assets: kinematic_parents must have Js entries");
  }
  if (kinematic_parents[0] != -1) throw AssetMismatch("assets: joint 0 must be the root");
  for (int j = 1; j < Js; ++j) {
    // parent index below child guarantees a tree rooted at 0
    if (kinematic_parents[j] < 0 || kinematic_parents[j] >= j) {
      throw AssetMismatch("assets: kinematic_parents is not a tree rooted at 0");
    }
  }
  for (int v = 0; v < V; ++v) {
    if (skin_weights.row(v).minCoeff() < 0.0) {
      throw AssetMismatch("assets: negative skinning weight at vertex " + std::to_string(v));
    }
    if (std::abs(skin_weights.row(v).sum() - 1.0) > 1e-6) {
      throw AssetMismatch("assets: skinning weights at vertex " + std::to_string(v) +
                          " do not sum to 1");
    }
  }
  for (int k = 0; k < K; ++k) {
    if (std::abs(joint_regressor_eval.row(k).sum() - 1.0) > 1e-6) {
      throw AssetMismatch("assets: eval regressor row " + std::to_string(k) +
                          " does not sum to 1");
    }
  }
}

namespace {

Eigen::MatrixXd unflatten3(const Eigen::VectorXd& flat) {
  const int V = static_cast<int>(flat.size()) / 3;
  Eigen::MatrixXd m(V, 3);
  for (int v = 0; v < V; ++v)
    for (int c = 0; c < 3; ++c) m(v, c) = flat(3 * v + c);
  return m;
}

Eigen::VectorXd flatten3(const Eigen::MatrixXd& m) {
  Eigen::VectorXd flat(3 * m.rows());
  for (int v = 0; v < m.rows(); ++v)
    for (int c = 0; c < 3; ++c) flat(3 * v + c) = m(v, c);
  return flat;
}

struct LbsWork {
  std::vector<Eigen::Matrix3d> rot;       // Js world-chained rotations A_j
  std::vector<Eigen::Vector3d> offset;    // Js world translations minus rest joints
  std::vector<Eigen::Matrix3d> local;     // Js local rotations R_j
  Eigen::MatrixXd rest_joints;            // Js x 3
  Eigen::MatrixXd t_posed;                // V x 3, T_A(.)
};

/// Single-branch blend-skinning: blend templates by alpha, add shape and
/// pose blend shapes, run forward kinematics on the shape-regressed
/// skeleton, then skin.
LbsWork lbs_forward(const BodyParams& params, const BodyModelAssets& assets, double alpha) {
  const int V = assets.num_vertices();
  const int Js = assets.num_skel_joints();
  if (Js != BodyParams::kNumJoints) {
    throw AssetMismatch("lbs: skeleton joint count must match theta joint count");
  }

  LbsWork w;
  w.local.resize(Js);
  Eigen::VectorXd pose_vec(9 * (Js - 1));
  for (int j = 0; j < Js; ++j) {
    w.local[j] = rot6d_to_matrix(params.joint_rot(j));
    if (j >= 1) {
      const Eigen::Matrix3d d = w.local[j] - Eigen::Matrix3d::Identity();
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) pose_vec(9 * (j - 1) + 3 * r + c) = d(r, c);
    }
  }

  Eigen::VectorXd t_flat = flatten3((1.0 - alpha) * assets.template_adult +
                                    alpha * assets.template_infant);
  t_flat += assets.shape_dirs * params.beta;
  t_flat += assets.pose_dirs * pose_vec;
  w.t_posed = unflatten3(t_flat);

  // Skeleton joints depend on shape only (adult template base).
  const Eigen::MatrixXd shaped =
      assets.template_adult + unflatten3(assets.shape_dirs * params.beta);
  w.rest_joints = assets.joint_regressor_skel * shaped;

  // World translations are carried as offsets from the rest joints so that
  // identity rotations reproduce the rest pose bit-exactly.
  w.rot.resize(Js);
  w.offset.resize(Js);
  w.rot[0] = w.local[0];
  w.offset[0] = Eigen::Vector3d::Zero();
  for (int j = 1; j < Js; ++j) {
    const int p = assets.kinematic_parents[j];
    w.rot[j] = w.rot[p] * w.local[j];
    const Eigen::Vector3d bone =
        (w.rest_joints.row(j) - w.rest_joints.row(p)).transpose();
    w.offset[j] = w.offset[p] + (w.rot[p] * bone - bone);
  }

  (void)V;
  return w;
}

Eigen::MatrixXd skin(const LbsWork& w, const BodyModelAssets& assets) {
  const int V = assets.num_vertices();
  const int Js = assets.num_skel_joints();
  Eigen::MatrixXd out(V, 3);
  for (int v = 0; v < V; ++v) {
    const Eigen::Vector3d x = w.t_posed.row(v).transpose();
    // skinning as a displacement keeps the rest pose exact
    Eigen::Vector3d acc = x;
    for (int j = 0; j < Js; ++j) {
      const double wt = assets.skin_weights(v, j);
      if (wt == 0.0) continue;
      const Eigen::Vector3d local = x - w.rest_joints.row(j).transpose();
      acc += wt * ((w.rot[j] * local - local) + w.offset[j]);
    }
    out.row(v) = acc.transpose();
  }
  return out;
}

}  // namespace

BodyMesh smpl_plus_a(const BodyParams& params, const BodyModelAssets& assets,
                     double t_alpha) {
  const BodyModelAssets* set = &assets;
  double alpha = params.alpha;
  if (params.alpha > t_alpha) {
    if (!assets.infant_assets) throw AssetMismatch("smpl_plus_a: missing infant asset set");
    set = assets.infant_assets.get();
    alpha = 0.0;  // infant set's templates are both the infant mesh
  }
  set->validate();
  const LbsWork w = lbs_forward(params, *set, alpha);
  BodyMesh mesh;
  mesh.vertices = skin(w, *set);
  mesh.joints = set->joint_regressor_eval * mesh.vertices;
  return mesh;
}

BodyModelJacobian smpl_plus_a_jacobian(const BodyParams& params,
                                       const BodyModelAssets& assets,
                                       double t_alpha) {
  const BodyModelAssets* set = &assets;
  double alpha = params.alpha;
  const bool infant_branch = params.alpha > t_alpha;
  if (infant_branch) {
    if (!assets.infant_assets) throw AssetMismatch("smpl_plus_a: missing infant asset set");
    set = assets.infant_assets.get();
    alpha = 0.0;
  }
  const int V = set->num_vertices();
  const int Js = set->num_skel_joints();
  if (Js != BodyParams::kNumJoints) {
    throw AssetMismatch("lbs: skeleton joint count must match theta joint count");
  }
  const int n_params = BodyParams::kThetaDim + BodyParams::kBetaDim + 1;

  // Forward pass with per-joint 6D rotation jacobians.
  std::vector<Eigen::Matrix3d> local(Js);
  std::vector<std::array<Eigen::Matrix3d, 6>> local_jac(Js);
  Eigen::VectorXd pose_vec(9 * (Js - 1));
  for (int j = 0; j < Js; ++j) {
    local[j] = rot6d_to_matrix_jacobian(params.joint_rot(j), local_jac[j]);
    if (j >= 1) {
      const Eigen::Matrix3d d = local[j] - Eigen::Matrix3d::Identity();
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) pose_vec(9 * (j - 1) + 3 * r + c) = d(r, c);
    }
  }

  Eigen::VectorXd t_flat = flatten3((1.0 - alpha) * set->template_adult +
                                    alpha * set->template_infant);
  t_flat += set->shape_dirs * params.beta;
  t_flat += set->pose_dirs * pose_vec;
  const Eigen::MatrixXd t_posed = unflatten3(t_flat);

  const Eigen::MatrixXd shaped =
      set->template_adult + unflatten3(set->shape_dirs * params.beta);
  const Eigen::MatrixXd rest_joints = set->joint_regressor_skel * shaped;

  std::vector<Eigen::Matrix3d> A(Js);
  std::vector<Eigen::Vector3d> t(Js);
  A[0] = local[0];
  t[0] = rest_joints.row(0).transpose();
  for (int j = 1; j < Js; ++j) {
    const int p = set->kinematic_parents[j];
    A[j] = A[p] * local[j];
    t[j] = A[p] * (rest_joints.row(j) - rest_joints.row(p)).transpose() + t[p];
  }

  BodyModelJacobian out;
  out.d_vertices = Eigen::MatrixXd::Zero(3 * V, n_params);

  std::vector<Eigen::Matrix3d> dA(Js);
  std::vector<Eigen::Vector3d> dt(Js);
  std::vector<Eigen::MatrixXd> djr(BodyParams::kBetaDim);

  // theta columns: the perturbed joint's local rotation affects its subtree
  // through the kinematic chain, plus the pose blend shape of the posed template.
  for (int p = 0; p < Js; ++p) {
    for (int k = 0; k < 6; ++k) {
      const int col = 6 * p + k;
      const Eigen::Matrix3d& dR = local_jac[p][k];
      Eigen::VectorXd dshape_flat;
      if (p >= 1) {
        Eigen::VectorXd dpose = Eigen::VectorXd::Zero(9 * (Js - 1));
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) dpose(9 * (p - 1) + 3 * r + c) = dR(r, c);
        dshape_flat = set->pose_dirs * dpose;
      }
      for (int j = 0; j < Js; ++j) {
        dA[j].setZero();
        dt[j].setZero();
      }
      if (p == 0) {
        dA[0] = dR;
      }
      for (int j = 1; j < Js; ++j) {
        const int par = set->kinematic_parents[j];
        dA[j] = dA[par] * local[j];
        if (j == p) dA[j] += A[par] * dR;
        dt[j] = dA[par] * (rest_joints.row(j) - rest_joints.row(par)).transpose() + dt[par];
      }
      for (int v = 0; v < V; ++v) {
        Eigen::Vector3d acc = Eigen::Vector3d::Zero();
        const Eigen::Vector3d x = t_posed.row(v).transpose();
        for (int j = 0; j < Js; ++j) {
          const double wt = set->skin_weights(v, j);
          if (wt == 0.0) continue;
          acc += wt * (dA[j] * (x - rest_joints.row(j).transpose()) + dt[j]);
          if (p >= 1) acc += wt * (A[j] * dshape_flat.segment<3>(3 * v));
        }
        out.d_vertices.block<3, 1>(3 * v, col) = acc;
      }
    }
  }

  // beta columns: templates and rest joints move linearly; rotations fixed.
  for (int k = 0; k < BodyParams::kBetaDim; ++k) {
    const int col = BodyParams::kThetaDim + k;
    const Eigen::MatrixXd djoints =
        set->joint_regressor_skel * unflatten3(set->shape_dirs.col(k));
    for (int j = 0; j < Js; ++j) dt[j].setZero();
    dt[0] = djoints.row(0).transpose();
    for (int j = 1; j < Js; ++j) {
      const int par = set->kinematic_parents[j];
      dt[j] = A[par] * (djoints.row(j) - djoints.row(par)).transpose() + dt[par];
    }
    for (int v = 0; v < V; ++v) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      const Eigen::Vector3d dx = set->shape_dirs.col(k).segment<3>(3 * v);
      for (int j = 0; j < Js; ++j) {
        const double wt = set->skin_weights(v, j);
        if (wt == 0.0) continue;
        acc += wt * (A[j] * (dx - djoints.row(j).transpose()) + dt[j]);
      }
      out.d_vertices.block<3, 1>(3 * v, col) = acc;
    }
  }

  // alpha column: template blend only; zero on the infant branch
  // (piecewise constant above t_alpha).
  if (!infant_branch) {
    const int col = n_params - 1;
    for (int v = 0; v < V; ++v) {
      const Eigen::Vector3d dx =
          (set->template_infant.row(v) - set->template_adult.row(v)).transpose();
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      for (int j = 0; j < Js; ++j) {
        const double wt = set->skin_weights(v, j);
        if (wt == 0.0) continue;
        acc += wt * (A[j] * dx);
      }
      out.d_vertices.block<3, 1>(3 * v, col) = acc;
    }
  }

  const int K = set->num_eval_joints();
  out.d_joints = Eigen::MatrixXd::Zero(3 * K, n_params);
  for (int col = 0; col < n_params; ++col) {
    const Eigen::MatrixXd dverts = unflatten3(out.d_vertices.col(col));
    const Eigen::MatrixXd dj = set->joint_regressor_eval * dverts;
    out.d_joints.col(col) = flatten3(dj);
  }
  return out;
}

BodyModelAssets make_toy_assets(int num_vertices, std::uint64_t seed) {
  if (num_vertices < 8) throw Error("make_toy_assets: need at least 8 vertices");
  const int V = num_vertices;
  const int Js = BodyParams::kNumJoints;
  const int K = 24;
  constexpr double kHeight = 1.7;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto jitter = [&](double scale) { return (unit(rng) * 2.0 - 1.0) * scale; };

  // Vertices on a jittered 4-segment cylinder, extra vertices stacked on top.
  const int segs = 4;
  const int rings = V / segs;
  const int leftover = V - rings * segs;

  BodyModelAssets a;
  a.template_adult.resize(V, 3);
  for (int i = 0; i < rings; ++i) {
    const double y = (rings > 1) ? kHeight * i / (rings - 1) : 0.0;
    for (int s = 0; s < segs; ++s) {
      const double ang = 2.0 * M_PI * s / segs + jitter(0.1);
      const double r = 0.15 + jitter(0.02);
      a.template_adult.row(i * segs + s) << r * std::cos(ang), y + jitter(0.01),
          r * std::sin(ang);
    }
  }
  for (int k = 0; k < leftover; ++k) {
    a.template_adult.row(rings * segs + k) << jitter(0.03),
        kHeight + 0.02 * (k + 1), jitter(0.03);
  }

  // Grid triangulation over the cylinder plus a fan to the stacked vertices.
  std::vector<Eigen::Vector3i> faces;
  for (int i = 0; i + 1 < rings; ++i) {
    for (int s = 0; s < segs; ++s) {
      const int s1 = (s + 1) % segs;
      faces.emplace_back(i * segs + s, i * segs + s1, (i + 1) * segs + s);
      faces.emplace_back(i * segs + s1, (i + 1) * segs + s1, (i + 1) * segs + s);
    }
  }
  for (int k = 0; k < leftover; ++k) {
    const int apex = rings * segs + k;
    const int base = (k == 0) ? (rings - 1) * segs : apex - 1;
    faces.emplace_back(base, (k == 0) ? base + 1 : (rings - 1) * segs, apex);
  }
  a.faces.resize(static_cast<int>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) a.faces.row(static_cast<int>(f)) = faces[f];

  a.kinematic_parents.resize(Js);
  a.kinematic_parents[0] = -1;
  for (int j = 1; j < Js; ++j) a.kinematic_parents[j] = j - 1;

  // Gaussian-in-height regressors; normalized rows are affine combinations.
  auto height_regressor = [&](int rows, double sigma, bool randomized) {
    Eigen::MatrixXd reg(rows, V);
    for (int j = 0; j < rows; ++j) {
      const double target = randomized ? unit(rng) * kHeight
                                       : kHeight * j / (rows - 1);
      for (int v = 0; v < V; ++v) {
        const double dy = a.template_adult(v, 1) - target;
        reg(j, v) = std::exp(-dy * dy / (2.0 * sigma * sigma)) + 1e-9;
      }
      reg.row(j) /= reg.row(j).sum();
    }
    return reg;
  };
  a.joint_regressor_skel = height_regressor(Js, 0.12, false);
  a.joint_regressor_eval = height_regressor(K, 0.15, true);

  a.skin_weights = Eigen::MatrixXd::Zero(V, Js);
  for (int v = 0; v < V; ++v) {
    const double y = a.template_adult(v, 1);
    for (int j = 0; j < Js; ++j) {
      const double jy = kHeight * j / (Js - 1);
      const double dy = y - jy;
      a.skin_weights(v, j) = std::exp(-dy * dy / (2.0 * 0.1 * 0.1));
    }
    // keep only the 3 strongest influences
    for (int drop = 0; drop < Js - 3; ++drop) {
      int arg = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < Js; ++j) {
        if (a.skin_weights(v, j) > 0.0 && a.skin_weights(v, j) < best) {
          best = a.skin_weights(v, j);
          arg = j;
        }
      }
      a.skin_weights(v, arg) = 0.0;
    }
    a.skin_weights.row(v) /= a.skin_weights.row(v).sum();
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  a.shape_dirs.resize(3 * V, BodyParams::kBetaDim);
  for (int i = 0; i < a.shape_dirs.size(); ++i) a.shape_dirs(i) = 0.01 * gauss(rng);
  a.pose_dirs.resize(3 * V, 9 * (Js - 1));
  for (int i = 0; i < a.pose_dirs.size(); ++i) a.pose_dirs(i) = 0.001 * gauss(rng);

  // Root-center the template: the skeleton root regresses to the origin.
  const Eigen::RowVector3d root = a.joint_regressor_skel.row(0) * a.template_adult;
  a.template_adult.rowwise() -= root;

  a.template_infant = 0.5 * a.template_adult;

  auto infant = std::make_shared<BodyModelAssets>();
  infant->template_adult = a.template_infant;
  infant->template_infant = a.template_infant;
  infant->shape_dirs = 0.5 * a.shape_dirs;
  infant->pose_dirs = 0.5 * a.pose_dirs;
  infant->skin_weights = a.skin_weights;
  infant->joint_regressor_skel = a.joint_regressor_skel;
  infant->joint_regressor_eval = a.joint_regressor_eval;
  infant->kinematic_parents = a.kinematic_parents;
  infant->faces = a.faces;
  a.infant_assets = std::move(infant);

  a.validate();
  return a;
}

}  // namespace bev
