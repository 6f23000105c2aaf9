#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "bev/camera.hpp"
#include "bev/dataio.hpp"

namespace bev {

/// Minimum-cost row-to-column assignment (Hungarian algorithm, O(n^3)).
/// Returns, per row, the assigned column (every row is assigned when
/// rows <= cols; otherwise unassigned rows carry -1).
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

struct MatchPair {
  int gt_index;
  int pred_index;
  double distance_px;
};

/// Per-scene matching outcome.
struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<int> misses;        // unmatched gt
  std::vector<int> false_alarms;  // unmatched predictions
};

/// Hungarian matching on projected-center pixel distance; assigned pairs
/// farther than threshold_px are discarded into misses/false alarms.
/// GT centers come from gt_translation when present, else the visible
/// keypoint centroid. Throws SceneCountMismatch.
std::vector<MatchResult> match_detections(const std::vector<SceneAnnotation>& gt,
                                          const std::vector<ScenePredictions>& pred,
                                          const CameraIntrinsics& cam,
                                          double threshold_px);

struct PcdrResult {
  double overall_pct = 0.0;
  std::array<double, kNumAgeClasses> per_class_pct{};
  std::array<std::size_t, kNumAgeClasses> per_class_pairs{};
  std::size_t pairs_total = 0;
  std::size_t pairs_correct = 0;
};

/// Percentage of correct depth relations over all unordered gt pairs per
/// scene. Same layer: correct iff the predicted depth gap is below
/// eq_threshold; different layers: correct iff the predicted order matches
/// the layer order. Pairs touching a missed person count incorrect. A pair
/// is attributed to each member's age class (once per distinct class).
PcdrResult pcdr(const std::vector<SceneAnnotation>& gt,
                const std::vector<ScenePredictions>& pred,
                const std::vector<MatchResult>& matches, double eq_threshold);

struct PckConfig {
  double head_factor = 0.6;
  // head segment keypoint indices; -1 enables the bbox-diagonal fallback
  int head_top_index = -1;
  int neck_index = -1;
};

/// Mean per-person percentage of correct keypoints, threshold
/// head_factor * head length (fallback 0.25 * bbox diagonal). Predicted
/// 2D keypoints are the projections of the predicted joints plus
/// translation. Missed people contribute 0; people without visible
/// keypoints are skipped and counted in skipped_people.
struct MpckResult {
  double mpck = 0.0;
  std::size_t skipped_people = 0;
};

MpckResult mpck_h(const std::vector<SceneAnnotation>& gt,
                  const std::vector<ScenePredictions>& pred,
                  const std::vector<MatchResult>& matches, const CameraIntrinsics& cam,
                  const PckConfig& cfg);

struct MeshErrors {
  double mpjpe_mm = 0.0;
  double mve_mm = 0.0;
  double pa_mpjpe_mm = 0.0;
  bool has_vertices = false;
};

/// Mean per-joint / per-vertex errors over matched people, root-joint
/// aligned; the PA variant after similarity Procrustes on the joints.
/// Vertex lists may be empty. Throws TopologyMismatch.
MeshErrors mesh_errors(const std::vector<Eigen::MatrixXd>& gt_joints,
                       const std::vector<Eigen::MatrixXd>& pred_joints,
                       const std::vector<Eigen::MatrixXd>& gt_vertices = {},
                       const std::vector<Eigen::MatrixXd>& pred_vertices = {});

struct NormalizedErrors {
  double nmje;
  double nmve;
};

/// NMJE = MPJPE / F1, NMVE = MVE / F1. Throws ZeroF1 unless f1 in (0, 1].
NormalizedErrors normalized_errors(double mpjpe, double mve, double f1);

struct MetricsConfig {
  double match_threshold_frac = 0.1;  // of image height
  double eq_depth_threshold = 0.2;
  PckConfig pck;
};

struct MetricsReport {
  PcdrResult pcdr;
  double mpck = 0.0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  MeshErrors mesh;
  double nmje_mm = 0.0, nmve_mm = 0.0;
  std::size_t gt_count = 0, matched = 0, missed = 0, false_alarms = 0;
  std::string config_echo;  // resolved run configuration, embedded verbatim
};

/// Full evaluation of predictions against annotations. When an asset set is
/// given, gt joints are rebuilt from annotated parameters for the mesh
/// errors; otherwise those stay zero.
MetricsReport evaluate(const std::vector<SceneAnnotation>& gt,
                       const std::vector<ScenePredictions>& pred,
                       const CameraIntrinsics& cam, const MetricsConfig& cfg,
                       const BodyModelAssets* assets = nullptr, double t_alpha = 0.8);

/// Human-readable report and the machine-readable key=value record.
std::string render_report(const MetricsReport& report);
std::string render_record(const MetricsReport& report);

}  // namespace bev
