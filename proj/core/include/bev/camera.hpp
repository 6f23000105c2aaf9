#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "bev/common.hpp"

namespace bev {

/// Pinhole camera with principal point at the image center and focal length
/// derived from a vertical field of view.
struct CameraIntrinsics {
  int width = 512;
  int height = 512;
  double fov_deg = 60.0;

  static CameraIntrinsics make(int width, int height, double fov_deg);

  double focal() const;
  double cx() const { return 0.5 * width; }
  double cy() const { return 0.5 * height; }
};

/// (u, v) = (f X/Z + cx, f Y/Z + cy). Throws BehindCamera for Z <= 1e-6.
Eigen::Vector2d project(const Eigen::Vector3d& point, const CameraIntrinsics& cam);

/// Inverse of project at a known depth.
Eigen::Vector3d back_project(const Eigen::Vector2d& pixel, double depth,
                             const CameraIntrinsics& cam);

enum class DepthSpacing { Uniform, InverseUniform };

std::string to_string(DepthSpacing s);
DepthSpacing depth_spacing_from_string(const std::string& s);

/// Voxelization of camera space: depth bins x map rows x map columns.
struct VoxelGrid {
  int depth_bins = 64;   // D
  int map_height = 128;  // H
  int map_width = 128;   // W
  double d_min = 0.5;
  double d_max = 50.0;
  DepthSpacing spacing = DepthSpacing::Uniform;

  void validate() const;

  /// Metric depth of a (possibly fractional) bin index.
  double depth_of_bin(double bin) const;
  /// Fractional bin index of a metric depth.
  double bin_of_depth(double depth) const;
  /// Local metric depth step around an integer bin.
  double depth_step_at(int bin) const;

  /// Pixel center of map cell column w / row h at image resolution.
  double pixel_u(double w, const CameraIntrinsics& cam) const {
    return (w + 0.5) * cam.width / map_width;
  }
  double pixel_v(double h, const CameraIntrinsics& cam) const {
    return (h + 0.5) * cam.height / map_height;
  }
  /// Fractional map cell coordinates of an image pixel.
  double cell_w(double u, const CameraIntrinsics& cam) const {
    return u * map_width / cam.width - 0.5;
  }
  double cell_h(double v, const CameraIntrinsics& cam) const {
    return v * map_height / cam.height - 0.5;
  }
};

/// Camera-space coordinates of every voxel center.
class AnchorMaps {
 public:
  AnchorMaps(const VoxelGrid& grid, const CameraIntrinsics& cam);

  const Eigen::Vector3d& at(int d, int h, int w) const {
    return anchors_[(static_cast<std::size_t>(d) * grid_.map_height + h) * grid_.map_width + w];
  }
  const VoxelGrid& grid() const { return grid_; }
  const CameraIntrinsics& camera() const { return cam_; }

 private:
  VoxelGrid grid_;
  CameraIntrinsics cam_;
  std::vector<Eigen::Vector3d> anchors_;
};

inline AnchorMaps build_anchor_maps(const VoxelGrid& grid, const CameraIntrinsics& cam) {
  return AnchorMaps(grid, cam);
}

struct DepthEncoding {
  Eigen::VectorXd values;
  bool clamped = false;
};

/// Deterministic sinusoidal encoding of the normalized depth position.
/// Frequencies are geometrically spaced from 1 to pi*D so neighboring
/// depth bins stay distinguishable while sub-bin changes stay close.
DepthEncoding depth_encoding(double depth, const VoxelGrid& grid, int dim = 128);

/// Depth-to-vector encoder with an optional substitution table of
/// externally trained embeddings (rows indexed by depth bin; linear
/// interpolation between rows).
class DepthEncoder {
 public:
  DepthEncoder(const VoxelGrid& grid, int dim) : grid_(grid), dim_(dim) {}

  /// table must have D rows and dim columns.
  void load_table(Eigen::MatrixXd table);

  DepthEncoding encode(double depth) const;
  int dim() const { return dim_; }

 private:
  VoxelGrid grid_;
  int dim_;
  std::optional<Eigen::MatrixXd> table_;
};

}  // namespace bev
