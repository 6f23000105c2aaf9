#pragma once

#include <string>

#include "bev/camera.hpp"
#include "bev/losses.hpp"
#include "bev/metrics.hpp"

namespace bev {

/// Resolved run configuration. Every report embeds the echo() of the
/// configuration it was produced under, so results are self-describing.
struct RunConfig {
  CameraIntrinsics camera;
  VoxelGrid grid;

  struct Maps {
    double sigma = 2.0;            // center kernel std, cells
    double parse_threshold = 0.2;  // local-maximum acceptance
    int max_people = 64;
    int encoding_dim = 128;
  } maps;

  struct Body {
    double t_alpha = 0.8;  // infant branch threshold
    int toy_vertices = 64;
    std::uint64_t toy_seed = 7;
  } body;

  struct Loss {
    double gamma = 0.3;  // depth-layer margin scale, meters
    double focal_a = 2.0;
    double focal_b = 4.0;
    LossWeights weights;
    AgeRanges age_ranges = AgeRanges::defaults();
  } loss;

  MetricsConfig metrics;

  struct Paths {
    std::string assets;         // array container, empty = toy assets
    std::string prior;          // mixture prior container, optional
    std::string encoder_table;  // depth encoder substitution table, optional
  } paths;

  void validate() const;

  /// Full key = value rendering, one line per key, byte-deterministic.
  std::string echo() const;

  /// Applies one dotted-key assignment. Throws SchemaViolation for unknown
  /// keys, ParseError for malformed values.
  void set(const std::string& key, const std::string& value);

  static RunConfig from_text(const std::string& text, const std::string& origin = "<text>");
  static RunConfig load(const std::string& path);
};

/// Value of BEV_CONFIG, or empty when unset.
std::string default_config_path();

}  // namespace bev
