#include "bev/maps.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bev {

namespace {

struct CellPos {
  double wc, hc, dc;  // continuous cell coordinates
  int w0, h0, d0;     // nearest integer cell
};

CellPos locate(const Eigen::Vector3d& p, const VoxelGrid& grid,
               const CameraIntrinsics& cam) {
  const Eigen::Vector2d px = project(p, cam);
  CellPos c;
  c.wc = grid.cell_w(px.x(), cam);
  c.hc = grid.cell_h(px.y(), cam);
  c.dc = grid.bin_of_depth(p.z());
  c.w0 = static_cast<int>(std::lround(c.wc));
  c.h0 = static_cast<int>(std::lround(c.hc));
  c.d0 = static_cast<int>(std::lround(c.dc));
  return c;
}

bool in_grid(const CellPos& c, const VoxelGrid& g) {
  return c.w0 >= 0 && c.w0 < g.map_width && c.h0 >= 0 && c.h0 < g.map_height &&
         c.d0 >= 0 && c.d0 < g.depth_bins;
}

void splat_max(Array& m, std::size_t plane, int ci, int cj, double sigma, int ni, int nj) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  for (int i = std::max(0, ci - radius); i <= std::min(ni - 1, ci + radius); ++i) {
    for (int j = std::max(0, cj - radius); j <= std::min(nj - 1, cj + radius); ++j) {
      const double di = i - ci, dj = j - cj;
      const double g = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
      double& cell = m(plane, i, j);
      cell = std::max(cell, g);
    }
  }
}

}  // namespace

MapSet render_gt_maps(const std::vector<Eigen::Vector3d>& people, const VoxelGrid& grid,
                      const CameraIntrinsics& cam, double sigma, int feature_channels) {
  grid.validate();
  const std::size_t D = grid.depth_bins, H = grid.map_height, W = grid.map_width;

  MapSet maps;
  maps.front_center = Array({1, H, W});
  maps.front_offset = Array({3, H, W});
  maps.bev_center = Array({1, D, W});
  maps.bev_offset = Array({1, D, W});
  maps.mesh_feature = Array({static_cast<std::size_t>(feature_channels), H, W});
  maps.center3d = Array({1, D, H, W});
  maps.offset3d = Array({3, D, H, W});

  std::vector<CellPos> cells(people.size());
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < people.size(); ++i) {
    bool inside = false;
    if (people[i].z() >= grid.d_min && people[i].z() <= grid.d_max) {
      try {
        cells[i] = locate(people[i], grid, cam);
        inside = in_grid(cells[i], grid);
      } catch (const BehindCamera&) {
      }
    }
    if (!inside) bad.push_back(i);
  }
  if (!bad.empty()) {
    std::string msg = "people outside the frustum or depth range:";
    for (std::size_t i : bad) msg += " " + std::to_string(i);
    throw OutOfFrustum(msg);
  }

  // Process nearest-first so that offset ownership of a shared cell is
  // independent of the input order.
  std::vector<std::size_t> order(people.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = people[a];
    const auto& pb = people[b];
    if (pa.z() != pb.z()) return pa.z() < pb.z();
    if (pa.y() != pb.y()) return pa.y() < pb.y();
    return pa.x() < pb.x();
  });

  std::vector<char> front_owned(H * W, 0), bev_owned(D * W, 0), vox_owned(D * H * W, 0);

  for (std::size_t idx : order) {
    const CellPos& c = cells[idx];

    splat_max(maps.front_center, 0, c.h0, c.w0, sigma, (int)H, (int)W);
    splat_max(maps.bev_center, 0, c.d0, c.w0, sigma, (int)D, (int)W);

    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    for (int d = std::max(0, c.d0 - radius); d <= std::min((int)D - 1, c.d0 + radius); ++d) {
      for (int h = std::max(0, c.h0 - radius); h <= std::min((int)H - 1, c.h0 + radius); ++h) {
        for (int w = std::max(0, c.w0 - radius); w <= std::min((int)W - 1, c.w0 + radius); ++w) {
          const double dd = d - c.d0, dh = h - c.h0, dw = w - c.w0;
          const double g = std::exp(-(dd * dd + dh * dh + dw * dw) / (2.0 * sigma * sigma));
          double& cell = maps.center3d(0, d, h, w);
          cell = std::max(cell, g);
        }
      }
    }

    const double ow = c.wc - c.w0, oh = c.hc - c.h0, od = c.dc - c.d0;
    if (char& owned = front_owned[c.h0 * W + c.w0]; !owned) {
      owned = 1;
      maps.front_offset(0, c.h0, c.w0) = ow;
      maps.front_offset(1, c.h0, c.w0) = oh;
      maps.front_offset(2, c.h0, c.w0) = od;
    }
    if (char& owned = bev_owned[c.d0 * W + c.w0]; !owned) {
      owned = 1;
      maps.bev_offset(0, c.d0, c.w0) = od;
    }
    if (char& owned = vox_owned[(c.d0 * H + c.h0) * W + c.w0]; !owned) {
      owned = 1;
      maps.offset3d(0, c.d0, c.h0, c.w0) = ow;
      maps.offset3d(1, c.d0, c.h0, c.w0) = oh;
      maps.offset3d(2, c.d0, c.h0, c.w0) = od;
    }
  }
  return maps;
}

Array compose_3d(const Array& front_center, const Array& bev_center,
                 const RefineHook& refine) {
  if (front_center.ndim() != 3 || bev_center.ndim() != 3 || front_center.dim(0) != 1 ||
      bev_center.dim(0) != 1 || front_center.dim(2) != bev_center.dim(2)) {
    throw ShapeMismatch("compose_3d: expected 1xHxW and 1xDxW with matching W");
  }
  const std::size_t H = front_center.dim(1), W = front_center.dim(2);
  const std::size_t D = bev_center.dim(1);
  Array out({1, D, H, W});
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t w = 0; w < W; ++w) {
        out(0, d, h, w) = front_center(0, h, w) * bev_center(0, d, w);
      }
    }
  }
  if (refine) {
    Array refined = refine(out);
    if (!refined.same_shape(out)) throw ShapeMismatch("refine hook changed map shape");
    return refined;
  }
  return out;
}

std::vector<Detection> parse_detections(const Array& center3d, const Array& offset3d,
                                        const AnchorMaps& anchors, double threshold,
                                        int max_people) {
  const VoxelGrid& grid = anchors.grid();
  const std::size_t D = grid.depth_bins, H = grid.map_height, W = grid.map_width;
  if (center3d.ndim() != 4 || center3d.dim(0) != 1 || center3d.dim(1) != D ||
      center3d.dim(2) != H || center3d.dim(3) != W) {
    throw ShapeMismatch("parse_detections: center3d does not match the grid");
  }
  if (offset3d.ndim() != 4 || offset3d.dim(0) != 3 || offset3d.dim(1) != D ||
      offset3d.dim(2) != H || offset3d.dim(3) != W) {
    throw ShapeMismatch("parse_detections: offset3d does not match the grid");
  }

  std::vector<Detection> found;
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t w = 0; w < W; ++w) {
        const double v = center3d(0, d, h, w);
        if (v < threshold) continue;
        bool is_peak = true;
        for (int dd = -1; dd <= 1 && is_peak; ++dd) {
          for (int dh = -1; dh <= 1 && is_peak; ++dh) {
            for (int dw = -1; dw <= 1; ++dw) {
              if (dd == 0 && dh == 0 && dw == 0) continue;
              const long nd = (long)d + dd, nh = (long)h + dh, nw = (long)w + dw;
              if (nd < 0 || nd >= (long)D || nh < 0 || nh >= (long)H || nw < 0 ||
                  nw >= (long)W) {
                continue;
              }
              if (center3d(0, nd, nh, nw) >= v) {
                is_peak = false;
                break;
              }
            }
          }
        }
        if (!is_peak) continue;

        Detection det;
        det.confidence = v;
        det.cell_d = (int)d;
        det.cell_h = (int)h;
        det.cell_w = (int)w;
        const double wc = w + offset3d(0, d, h, w);
        const double hc = h + offset3d(1, d, h, w);
        const double dc = d + offset3d(2, d, h, w);
        const double depth = grid.depth_of_bin(dc);
        const Eigen::Vector2d px(grid.pixel_u(wc, anchors.camera()),
                                 grid.pixel_v(hc, anchors.camera()));
        det.translation = back_project(px, depth, anchors.camera());
        found.push_back(det);
      }
    }
  }

  std::sort(found.begin(), found.end(), [](const Detection& a, const Detection& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return std::tie(a.cell_d, a.cell_h, a.cell_w) < std::tie(b.cell_d, b.cell_h, b.cell_w);
  });
  if ((int)found.size() > max_people) found.resize(max_people);
  return found;
}

Eigen::VectorXd sample_mesh_features(const Array& mesh_feature, const Detection& det,
                                     const VoxelGrid& grid, const CameraIntrinsics& cam,
                                     const DepthEncoder& encoder) {
  if (mesh_feature.ndim() != 3) throw ShapeMismatch("mesh feature map must be CxHxW");
  const std::size_t C = mesh_feature.dim(0), H = mesh_feature.dim(1), W = mesh_feature.dim(2);
  if ((int)C != encoder.dim()) {
    throw ShapeMismatch("mesh feature channels must match the encoding dim");
  }

  const Eigen::Vector2d px = project(det.translation, cam);
  const double wc = grid.cell_w(px.x(), cam);
  const double hc = grid.cell_h(px.y(), cam);
  if (wc < 0.0 || wc > W - 1.0 || hc < 0.0 || hc > H - 1.0) {
    throw OutOfBounds("sample_mesh_features: projection outside the feature map");
  }

  const int w0 = std::min((int)std::floor(wc), (int)W - 2);
  const int h0 = std::min((int)std::floor(hc), (int)H - 2);
  const double fw = wc - w0, fh = hc - h0;

  Eigen::VectorXd out(C);
  for (std::size_t c = 0; c < C; ++c) {
    const double v00 = mesh_feature(c, h0, w0);
    const double v01 = mesh_feature(c, h0, w0 + 1);
    const double v10 = mesh_feature(c, h0 + 1, w0);
    const double v11 = mesh_feature(c, h0 + 1, w0 + 1);
    out((int)c) = (1 - fh) * ((1 - fw) * v00 + fw * v01) + fh * ((1 - fw) * v10 + fw * v11);
  }
  out += encoder.encode(det.translation.z()).values;
  return out;
}

}  // namespace bev
