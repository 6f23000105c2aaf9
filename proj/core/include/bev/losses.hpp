#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <utility>
#include <vector>

#include "bev/body_model.hpp"
#include "bev/camera.hpp"
#include "bev/common.hpp"
#include "bev/dataio.hpp"

namespace bev {

/// Per-class (lower, middle, upper) bounds of the age offset.
struct AgeRange {
  double lower, mid, upper;
};

struct AgeRanges {
  std::array<AgeRange, kNumAgeClasses> ranges;

  static AgeRanges defaults();
  const AgeRange& of(AgeClass c) const { return ranges[static_cast<int>(c)]; }
  void validate() const;
};

struct LossWeights {
  double cm = 1.0, cm3d = 1.0, theta = 1.0, beta = 1.0, prior = 1.0;
  double mpj = 1.0, pmpj = 1.0, pj2d = 1.0, depth = 1.0, age = 1.0;
  void validate() const;
};

struct DepthLayerPair {
  double d_i, d_j;  // predicted depths, meters
  int r_i, r_j;     // depth-layer indices, 0 = nearest
  double gamma = 0.3;
};

/// ln(1 + e^x), overflow-safe.
double softplus(double x);

struct DepthLayerLossResult {
  double loss;
  double d_di, d_dj;
};

/// Piecewise depth-layer loss. Same layer: squared depth difference.
/// Different layers: softplus penalty gated by whether the predicted gap
/// violates the gamma-scaled layer margin; exact margin satisfaction is
/// lossless. Gradients are one-sided at piece boundaries.
DepthLayerLossResult depth_layer_loss(const DepthLayerPair& pair);

struct SceneDepthLossResult {
  double loss;
  std::vector<double> grad;  // per person depth
};

/// Average of depth_layer_loss over all unordered person pairs.
SceneDepthLossResult scene_depth_layer_loss(const std::vector<double>& depths,
                                            const std::vector<int>& layers, double gamma);

struct AgeLossResult {
  double loss;
  double grad;
};

/// Zero on (lower, upper] of the annotated class, squared distance to the
/// class midpoint elsewhere.
AgeLossResult age_loss(double alpha, AgeClass k, const AgeRanges& ranges);

struct FocalLossResult {
  double loss;
  Array grad;
};

/// Penalty-reduced focal loss over all cells, normalized by the number of
/// positive (gt == 1) cells. Predictions are clamped to [1e-6, 1-1e-6];
/// the gradient is zero where the clamp is active.
FocalLossResult focal_loss(const Array& pred, const Array& gt, double a = 2.0,
                           double b = 4.0);
FocalLossResult focal_loss_2d(const Array& pred, const Array& gt, double a = 2.0,
                              double b = 4.0);
FocalLossResult focal_loss_3d(const Array& pred, const Array& gt, double a = 2.0,
                              double b = 4.0);

/// Similarity transform g ~ scale * rotation * p + translation fitted by SVD.
struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::MatrixXd apply(const Eigen::MatrixXd& points) const;
};

/// Least-squares similarity alignment of pred onto gt over joints with
/// nonzero visibility. Throws TooFewJoints below 3 visible joints.
SimilarityTransform procrustes_similarity(const Eigen::MatrixXd& pred,
                                          const Eigen::MatrixXd& gt,
                                          const std::vector<int>& vis);

struct JointLossResult {
  double mpj = 0.0;
  double pmpj = 0.0;
  bool pmpj_valid = false;  // false when < 3 visible joints
  Eigen::MatrixXd d_mpj;    // K x 3, w.r.t. pred
  Eigen::MatrixXd d_pmpj;   // K x 3, alignment held fixed at its optimum
};

JointLossResult joint_losses(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt,
                             const std::vector<int>& vis);

struct ProjectionLossResult {
  double loss = 0.0;
  bool any_visible = false;
  Eigen::MatrixXd d_joints;          // K x 3
  Eigen::Vector3d d_translation = Eigen::Vector3d::Zero();
};

/// Mean squared pixel error of the projected translated joints against 2D
/// keypoints (u, v, visibility), pixels normalized by image height.
ProjectionLossResult projection_loss(const Eigen::MatrixXd& pred_joints,
                                     const Eigen::Vector3d& translation,
                                     const Eigen::MatrixXd& gt_kp2d,
                                     const CameraIntrinsics& cam);

/// Mixture-of-Gaussians pose prior parameters, loadable from the array
/// container format (weights[M], means[MxP], precisions[MxPxP], constants[M]).
struct MixturePrior {
  Eigen::VectorXd weights;
  Eigen::MatrixXd means;                     // M x P
  std::vector<Eigen::MatrixXd> precisions;   // M of P x P
  Eigen::VectorXd constants;

  static MixturePrior load(const std::string& path);
};

struct PosePriorResult {
  double loss;
  Eigen::VectorXd grad;  // w.r.t. the 63-dim axis-angle body pose
};

/// min over components of (0.5 (x-mu)' Lambda (x-mu) + constant) on the
/// axis-angle body pose; without a mixture, 0.5 ||x||^2.
PosePriorResult pose_prior(const BodyParams& params, const MixturePrior* prior = nullptr);

struct ParamLossResult {
  double theta_loss, beta_loss;
  Eigen::VectorXd d_theta, d_beta;  // w.r.t. pred
};

/// Mean squared parameter differences.
ParamLossResult param_losses(const BodyParams& pred, const BodyParams& gt);

struct LossValues {
  double cm = 0, cm3d = 0, theta = 0, beta = 0, prior = 0;
  double mpj = 0, pmpj = 0, pj2d = 0, depth = 0, age = 0;
};

struct TotalLoss {
  double total;
  std::vector<std::pair<std::string, double>> breakdown;  // weighted terms
};

TotalLoss total_loss(const LossValues& values, const LossWeights& weights);

}  // namespace bev
