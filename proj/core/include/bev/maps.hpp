#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "bev/body_model.hpp"
#include "bev/camera.hpp"
#include "bev/common.hpp"

namespace bev {

/// Front-view and bird's-eye-view center/offset maps plus the derived 3D
/// maps and the pixel-aligned mesh feature map.
struct MapSet {
  Array front_center;  // 1 x H x W
  Array front_offset;  // 3 x H x W  (cell units: dw, dh, dd-bins)
  Array bev_center;    // 1 x D x W
  Array bev_offset;    // 1 x D x W  (bin units)
  Array mesh_feature;  // F x H x W
  Array center3d;      // 1 x D x H x W
  Array offset3d;      // 3 x D x H x W (cell units: dw, dh, dd-bins)
};

/// A parsed person: camera-space translation, confidence, source voxel,
/// optionally regressed parameters.
struct Detection {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // (x, y, d) meters
  double confidence = 0.0;
  int cell_d = 0, cell_h = 0, cell_w = 0;
  std::optional<BodyParams> params;
};

/// Renders ground-truth maps for people at the given camera-space centers.
/// Gaussian kernels (std sigma cells) peak at 1 at each person's nearest
/// cell; overlaps merge by elementwise max. Offset maps store the sub-cell
/// residual (continuous cell position minus integer cell) at each person's
/// cell, so cell + offset maps back to the exact continuous center.
/// Throws OutOfFrustum listing people outside the image or depth range.
MapSet render_gt_maps(const std::vector<Eigen::Vector3d>& people, const VoxelGrid& grid,
                      const CameraIntrinsics& cam, double sigma,
                      int feature_channels = 128);

using RefineHook = std::function<Array(const Array&)>;

/// center3d[d,h,w] = front_center[h,w] * bev_center[d,w]. An optional hook
/// post-processes the composed volume (stand-in for a learned refinement).
Array compose_3d(const Array& front_center, const Array& bev_center,
                 const RefineHook& refine = nullptr);

/// Extracts detections: strict 3x3x3 local maxima of center3d at or above
/// threshold, top max_people by confidence, sorted by descending confidence
/// with (d,h,w) lexicographic tie-breaking. Translations come from the
/// offset-corrected continuous voxel position mapped through the grid.
std::vector<Detection> parse_detections(const Array& center3d, const Array& offset3d,
                                        const AnchorMaps& anchors, double threshold,
                                        int max_people);

/// Bilinear sample of the mesh feature map at the projected detection
/// center, plus the depth encoding of its depth. Feature map nodes sit at
/// map cell centers. Throws OutOfBounds when the projection leaves the map.
Eigen::VectorXd sample_mesh_features(const Array& mesh_feature, const Detection& det,
                                     const VoxelGrid& grid, const CameraIntrinsics& cam,
                                     const DepthEncoder& encoder);

}  // namespace bev
