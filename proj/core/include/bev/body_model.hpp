#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "bev/common.hpp"
#include "bev/rotation.hpp"

namespace bev {

/// Regression target of the age-blended body model: per-joint 6D rotations,
/// shape PCA coefficients, and the age offset alpha in [0,1].
struct BodyParams {
  static constexpr int kNumJoints = 22;
  static constexpr int kThetaDim = 6 * kNumJoints;
  static constexpr int kBetaDim = 10;

  Eigen::VectorXd theta;  // kThetaDim, 6 values per joint
  Eigen::VectorXd beta;   // kBetaDim
  double alpha = 0.0;

  BodyParams();
  BodyParams(Eigen::VectorXd theta_in, Eigen::VectorXd beta_in, double alpha_in);

  /// Identity rotations, zero shape, alpha 0.
  static BodyParams rest();

  Vector6d joint_rot(int j) const { return theta.segment<6>(6 * j); }
  void set_joint_rot(int j, const Vector6d& r) { theta.segment<6>(6 * j) = r; }

  /// Axis-angle of the 21 non-root joints, concatenated (63 values).
  /// This is the pose representation the mixture prior operates on.
  Eigen::VectorXd body_axis_angle() const;
};

/// One complete asset set defining the blend-skinned model function.
/// For the nested infant set both templates hold the infant mesh, so the
/// blend is inert and the set evaluates to the pure infant model.
struct BodyModelAssets {
  Eigen::MatrixXd template_adult;        // V x 3 (meters, root at origin)
  Eigen::MatrixXd template_infant;       // V x 3
  Eigen::MatrixXd shape_dirs;            // 3V x 10, row 3v+axis
  Eigen::MatrixXd pose_dirs;             // 3V x 9*(Js-1)
  Eigen::MatrixXd skin_weights;          // V x Js, rows sum to 1
  Eigen::MatrixXd joint_regressor_skel;  // Js x V
  Eigen::MatrixXd joint_regressor_eval;  // K x V, rows sum to 1
  std::vector<int> kinematic_parents;    // Js entries, parents[0] == -1
  Eigen::MatrixXi faces;                 // F x 3, may be empty

  std::shared_ptr<const BodyModelAssets> infant_assets;

  int num_vertices() const { return static_cast<int>(template_adult.rows()); }
  int num_skel_joints() const { return static_cast<int>(skin_weights.cols()); }
  int num_eval_joints() const { return static_cast<int>(joint_regressor_eval.rows()); }

  /// Throws AssetMismatch on dimension disagreement or invariant violation.
  void validate() const;
};

/// Output mesh, root-relative. joints == joint_regressor_eval * vertices.
struct BodyMesh {
  Eigen::MatrixXd vertices;  // V x 3
  Eigen::MatrixXd joints;    // K x 3
};

/// Evaluates the piecewise age-blended model. Above t_alpha the infant
/// asset set is used; otherwise the blended template plus shape/pose blend
/// shapes is skinned around the shape-regressed skeleton.
BodyMesh smpl_plus_a(const BodyParams& params, const BodyModelAssets& assets,
                     double t_alpha);

/// Jacobians of the model output w.r.t. the full parameter vector
/// [theta(132), beta(10), alpha(1)]. Vertex row layout is 3v+axis.
struct BodyModelJacobian {
  Eigen::MatrixXd d_vertices;  // 3V x 143
  Eigen::MatrixXd d_joints;    // 3K x 143
};

BodyModelJacobian smpl_plus_a_jacobian(const BodyParams& params,
                                       const BodyModelAssets& assets,
                                       double t_alpha);

/// Deterministic synthetic asset set for testing: a jittered cylinder body
/// with a 22-joint chain skeleton and a half-scale infant set.
/// num_vertices >= 8.
BodyModelAssets make_toy_assets(int num_vertices, std::uint64_t seed);

}  // namespace bev
