#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bev/body_model.hpp"
#include "bev/common.hpp"

namespace bev {

enum class AgeClass { Adult = 0, Teen = 1, Child = 2, Infant = 3 };
constexpr int kNumAgeClasses = 4;

std::string to_string(AgeClass c);
AgeClass age_class_from_string(const std::string& s);

/// Weak-annotation unit: 2D keypoints, depth-layer index (0 = nearest),
/// age class. Synthetic data may carry metric ground truth alongside.
struct PersonAnnotation {
  Eigen::MatrixXd keypoints;  // K x 3: u px, v px, visibility in {0,1}
  int depth_layer = 0;
  AgeClass age_class = AgeClass::Adult;
  std::optional<double> gt_depth;                  // meters
  std::optional<Eigen::Vector3d> gt_translation;   // camera-space meters
  std::optional<BodyParams> gt_params;
};

struct SceneAnnotation {
  std::string id;
  int width = 0;
  int height = 0;
  std::vector<PersonAnnotation> people;
};

std::vector<SceneAnnotation> load_annotations(const std::string& path);
void save_annotations(const std::vector<SceneAnnotation>& scenes, const std::string& path);

/// One parsed/predicted person in the prediction record format.
struct PredictedPerson {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // (x, y, d) meters
  double confidence = 1.0;
  std::optional<Eigen::MatrixXd> joints;  // K x 3, camera-space meters
  std::optional<BodyParams> params;
};

struct ScenePredictions {
  std::string id;
  std::vector<PredictedPerson> people;
};

std::vector<ScenePredictions> load_predictions(const std::string& path);
void save_predictions(const std::vector<ScenePredictions>& scenes, const std::string& path);

/// Named-array container: text manifest followed by raw little-endian
/// float64 payloads. std::map keeps serialization byte-deterministic.
using ArrayContainer = std::map<std::string, Array>;

ArrayContainer load_arrays(const std::string& path);
void save_arrays(const ArrayContainer& arrays, const std::string& path);

/// Greedy nearest-anchored depth-layer clustering: sorted by depth, a person
/// joins the current layer iff its depth is within gamma of the layer's
/// nearest member, else opens the next layer. Output indexed to input order.
std::vector<int> derive_depth_layers(const std::vector<double>& depths, double gamma = 0.3);

/// Enumerates every schema-invariant violation; empty means clean.
std::vector<std::string> validate(const std::vector<SceneAnnotation>& scenes);

struct AnnotationStats {
  std::size_t scenes = 0;
  std::size_t people = 0;
  std::array<std::size_t, kNumAgeClasses> per_age{};
  std::map<int, std::size_t> layer_histogram;
};

AnnotationStats stats(const std::vector<SceneAnnotation>& scenes);

}  // namespace bev
