#include "bev/camera.hpp"

#include <cmath>

namespace bev {

CameraIntrinsics CameraIntrinsics::make(int width, int height, double fov_deg) {
  CameraIntrinsics cam;
  cam.width = width;
  cam.height = height;
  cam.fov_deg = fov_deg;
  if (width <= 0 || height <= 0) throw Error("camera: image dimensions must be positive");
  if (!(fov_deg > 10.0 && fov_deg < 170.0)) {
    throw Error("camera: fov must lie in (10, 170) degrees");
  }
  return cam;
}

double CameraIntrinsics::focal() const {
  return (height / 2.0) / std::tan(fov_deg * M_PI / 360.0);
}

Eigen::Vector2d project(const Eigen::Vector3d& point, const CameraIntrinsics& cam) {
  if (point.z() <= 1e-6) throw BehindCamera("project: point depth <= 1e-6");
  const double f = cam.focal();
  return {f * point.x() / point.z() + cam.cx(), f * point.y() / point.z() + cam.cy()};
}

Eigen::Vector3d back_project(const Eigen::Vector2d& pixel, double depth,
                             const CameraIntrinsics& cam) {
  const double f = cam.focal();
  return {(pixel.x() - cam.cx()) * depth / f, (pixel.y() - cam.cy()) * depth / f, depth};
}

std::string to_string(DepthSpacing s) {
  return s == DepthSpacing::Uniform ? "uniform" : "inverse";
}

DepthSpacing depth_spacing_from_string(const std::string& s) {
  if (s == "uniform") return DepthSpacing::Uniform;
  if (s == "inverse") return DepthSpacing::InverseUniform;
  throw Error("unknown depth spacing '" + s + "' (expected uniform|inverse)");
}

void VoxelGrid::validate() const {
  if (depth_bins < 2 || map_height < 2 || map_width < 2) {
    throw Error("grid: resolutions must be >= 2");
  }
  if (!(d_min > 0.0 && d_min < d_max)) throw Error("grid: need 0 < d_min < d_max");
}

double VoxelGrid::depth_of_bin(double bin) const {
  const double t = bin / (depth_bins - 1);
  if (spacing == DepthSpacing::Uniform) return d_min + t * (d_max - d_min);
  const double inv = 1.0 / d_min + t * (1.0 / d_max - 1.0 / d_min);
  return 1.0 / inv;
}

double VoxelGrid::bin_of_depth(double depth) const {
  if (spacing == DepthSpacing::Uniform) {
    return (depth - d_min) / (d_max - d_min) * (depth_bins - 1);
  }
  return (1.0 / depth - 1.0 / d_min) / (1.0 / d_max - 1.0 / d_min) * (depth_bins - 1);
}

double VoxelGrid::depth_step_at(int bin) const {
  const int hi = std::min(bin + 1, depth_bins - 1);
  const int lo = hi - 1;
  return depth_of_bin(hi) - depth_of_bin(lo);
}

AnchorMaps::AnchorMaps(const VoxelGrid& grid, const CameraIntrinsics& cam)
    : grid_(grid), cam_(cam) {
  grid.validate();
  const double f = cam.focal();
  anchors_.resize(static_cast<std::size_t>(grid.depth_bins) * grid.map_height *
                  grid.map_width);
  std::size_t i = 0;
  for (int d = 0; d < grid.depth_bins; ++d) {
    const double db = grid.depth_of_bin(d);
    for (int h = 0; h < grid.map_height; ++h) {
      const double v = grid.pixel_v(h, cam);
      const double y = (v - cam.cy()) * db / f;
      for (int w = 0; w < grid.map_width; ++w) {
        const double u = grid.pixel_u(w, cam);
        anchors_[i++] = {(u - cam.cx()) * db / f, y, db};
      }
    }
  }
}

DepthEncoding depth_encoding(double depth, const VoxelGrid& grid, int dim) {
  if (dim < 2 || dim % 2 != 0) throw Error("depth_encoding: dim must be even and >= 2");
  DepthEncoding out;
  double d = depth;
  if (d < grid.d_min) {
    d = grid.d_min;
    out.clamped = true;
  } else if (d > grid.d_max) {
    d = grid.d_max;
    out.clamped = true;
  }
  const double t = grid.bin_of_depth(d) / (grid.depth_bins - 1);  // in [0,1]
  const int pairs = dim / 2;
  const double w_max = M_PI * grid.depth_bins;
  out.values.resize(dim);
  for (int i = 0; i < pairs; ++i) {
    const double frac = (pairs > 1) ? static_cast<double>(i) / (pairs - 1) : 1.0;
    const double w = std::pow(w_max, frac);
    out.values(2 * i) = std::sin(w * t);
    out.values(2 * i + 1) = std::cos(w * t);
  }
  return out;
}

void DepthEncoder::load_table(Eigen::MatrixXd table) {
  if (table.rows() != grid_.depth_bins || table.cols() != dim_) {
    throw ShapeMismatch("depth encoder table must be D x dim");
  }
  table_ = std::move(table);
}

DepthEncoding DepthEncoder::encode(double depth) const {
  if (!table_) return depth_encoding(depth, grid_, dim_);
  DepthEncoding out;
  double d = depth;
  if (d < grid_.d_min) {
    d = grid_.d_min;
    out.clamped = true;
  } else if (d > grid_.d_max) {
    d = grid_.d_max;
    out.clamped = true;
  }
  const double bin = grid_.bin_of_depth(d);
  const int lo = std::min(static_cast<int>(std::floor(bin)), grid_.depth_bins - 2);
  const double frac = bin - lo;
  out.values = (1.0 - frac) * table_->row(lo).transpose() +
               frac * table_->row(lo + 1).transpose();
  return out;
}

}  // namespace bev
