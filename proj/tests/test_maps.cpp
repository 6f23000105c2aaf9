#include <doctest.h>

#include <algorithm>
#include <random>

#include "bev/maps.hpp"

using namespace bev;

namespace {

const CameraIntrinsics kCam = CameraIntrinsics::make(512, 512, 60.0);

VoxelGrid small_grid() {
  VoxelGrid g;
  g.depth_bins = 32;
  g.map_height = 32;
  g.map_width = 32;
  g.d_min = 1.0;
  g.d_max = 17.0;
  return g;
}

/// Camera-space point whose projection and depth land exactly on cell
/// (d, h, w) of the grid.
Eigen::Vector3d at_cell(const VoxelGrid& g, int d, int h, int w) {
  const Eigen::Vector2d px(g.pixel_u(w, kCam), g.pixel_v(h, kCam));
  return back_project(px, g.depth_of_bin(d), kCam);
}

int count_local_maxima(const Array& m) {
  const long D = m.dim(1), H = m.dim(2), W = m.dim(3);
  int count = 0;
  for (long d = 0; d < D; ++d) {
    for (long h = 0; h < H; ++h) {
      for (long w = 0; w < W; ++w) {
        const double v = m(0, d, h, w);
        if (v < 0.5) continue;
        bool peak = true;
        for (long nd = std::max(0L, d - 1); nd <= std::min(D - 1, d + 1) && peak; ++nd) {
          for (long nh = std::max(0L, h - 1); nh <= std::min(H - 1, h + 1) && peak; ++nh) {
            for (long nw = std::max(0L, w - 1); nw <= std::min(W - 1, w + 1); ++nw) {
              if (nd == d && nh == h && nw == w) continue;
              if (m(0, nd, nh, nw) >= v) {
                peak = false;
                break;
              }
            }
          }
        }
        if (peak) ++count;
      }
    }
  }
  return count;
}

int count_local_maxima_2d(const Array& m) {
  const long H = m.dim(1), W = m.dim(2);
  int count = 0;
  for (long h = 0; h < H; ++h) {
    for (long w = 0; w < W; ++w) {
      const double v = m(0, h, w);
      if (v < 0.5) continue;
      bool peak = true;
      for (long nh = std::max(0L, h - 1); nh <= std::min(H - 1, h + 1) && peak; ++nh) {
        for (long nw = std::max(0L, w - 1); nw <= std::min(W - 1, w + 1); ++nw) {
          if (nh == h && nw == w) continue;
          if (m(0, nh, nw) >= v) {
            peak = false;
            break;
          }
        }
      }
      if (peak) ++count;
    }
  }
  return count;
}

}  // namespace

TEST_CASE("kernel peaks at exactly 1 with zero offsets at a cell center") {
  const VoxelGrid g = small_grid();
  const Eigen::Vector3d p = at_cell(g, 10, 16, 20);
  const MapSet maps = render_gt_maps({p}, g, kCam, 2.0, 8);

  CHECK(maps.center3d(0, 10, 16, 20) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(maps.front_center(0, 16, 20) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(maps.bev_center(0, 10, 20) == doctest::Approx(1.0).epsilon(1e-12));
  for (int c = 0; c < 3; ++c) {
    CHECK(std::abs(maps.offset3d(c, 10, 16, 20)) < 1e-9);
  }
  CHECK(std::abs(maps.bev_offset(0, 10, 20)) < 1e-9);
}

TEST_CASE("center values stay within [0,1] and offsets within half a cell") {
  const VoxelGrid g = small_grid();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::Vector3d> people;
  for (int i = 0; i < 12; ++i) {
    people.push_back(at_cell(g, 2 + static_cast<int>(unit(rng) * 28),
                             2 + static_cast<int>(unit(rng) * 28),
                             2 + static_cast<int>(unit(rng) * 28)) +
                     Eigen::Vector3d(0.01 * unit(rng), 0.01 * unit(rng), 0.1 * unit(rng)));
  }
  const MapSet maps = render_gt_maps(people, g, kCam, 2.0, 8);
  for (double v : maps.center3d.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  for (double v : maps.offset3d.data) CHECK(std::abs(v) <= 0.5 + 1e-12);
  for (double v : maps.front_offset.data) CHECK(std::abs(v) <= 0.5 + 1e-12);
}

TEST_CASE("depth-separated people at the same pixel merge in front view only") {
  const VoxelGrid g = small_grid();
  const Eigen::Vector3d a = at_cell(g, 8, 16, 16);
  const Eigen::Vector3d b = at_cell(g, 18, 16, 16);  // 10 bins apart, same pixel
  const MapSet maps = render_gt_maps({a, b}, g, kCam, 2.0, 8);
  CHECK(count_local_maxima_2d(maps.front_center) == 1);
  CHECK(count_local_maxima(maps.center3d) == 2);
}

TEST_CASE("empty people list renders all-zero maps") {
  const VoxelGrid g = small_grid();
  const MapSet maps = render_gt_maps({}, g, kCam, 2.0, 8);
  for (double v : maps.center3d.data) CHECK(v == 0.0);
  for (double v : maps.front_center.data) CHECK(v == 0.0);
  for (double v : maps.bev_center.data) CHECK(v == 0.0);
}

TEST_CASE("out-of-frustum people are reported with their indices") {
  const VoxelGrid g = small_grid();
  const Eigen::Vector3d good = at_cell(g, 8, 16, 16);
  const Eigen::Vector3d too_deep(0.0, 0.0, g.d_max + 5.0);
  try {
    render_gt_maps({good, too_deep}, g, kCam, 2.0, 8);
    FAIL("expected OutOfFrustum");
  } catch (const OutOfFrustum& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("composition algebra") {
  const VoxelGrid g = small_grid();
  const Eigen::Vector3d p = at_cell(g, 9, 14, 21);
  const MapSet maps = render_gt_maps({p}, g, kCam, 2.0, 8);

  const Array composed = compose_3d(maps.front_center, maps.bev_center);

  SUBCASE("argmax of the composite sits at the person's voxel") {
    std::size_t best = 0;
    for (std::size_t i = 1; i < composed.size(); ++i) {
      if (composed(i) > composed(best)) best = i;
    }
    const std::size_t W = g.map_width, H = g.map_height;
    CHECK(best == (9 * H + 14) * W + 21);
  }

  SUBCASE("all-zero input is absorbing") {
    Array zero({1, (std::size_t)g.map_height, (std::size_t)g.map_width});
    const Array out = compose_3d(zero, maps.bev_center);
    for (double v : out.data) CHECK(v == 0.0);
  }

  SUBCASE("all-one front view reproduces the bev map at every row") {
    Array ones({1, (std::size_t)g.map_height, (std::size_t)g.map_width});
    for (double& v : ones.data) v = 1.0;
    const Array out = compose_3d(ones, maps.bev_center);
    for (int d = 0; d < g.depth_bins; ++d) {
      for (int h = 0; h < g.map_height; ++h) {
        for (int w = 0; w < g.map_width; ++w) {
          CHECK(out(0, d, h, w) == maps.bev_center(0, d, w));
        }
      }
    }
  }

  SUBCASE("refine hook output replaces the composite") {
    const Array refined = compose_3d(maps.front_center, maps.bev_center, [](const Array& a) {
      Array out = a;
      for (double& v : out.data) v *= 0.5;
      return out;
    });
    for (std::size_t i = 0; i < composed.size(); ++i) {
      CHECK(refined(i) == doctest::Approx(0.5 * composed(i)).epsilon(1e-12));
    }
  }

  SUBCASE("mismatched widths throw") {
    Array narrow({1, (std::size_t)g.map_height, 8});
    CHECK_THROWS_AS(compose_3d(narrow, maps.bev_center), ShapeMismatch);
  }
}

TEST_CASE("parse recovers exact translations from gt maps") {
  const VoxelGrid g = small_grid();
  const AnchorMaps anchors(g, kCam);
  std::vector<Eigen::Vector3d> people = {
      at_cell(g, 6, 10, 8) + Eigen::Vector3d(0.02, -0.01, 0.12),
      at_cell(g, 15, 20, 24) + Eigen::Vector3d(-0.03, 0.02, -0.2),
      at_cell(g, 25, 6, 16),
  };
  const MapSet maps = render_gt_maps(people, g, kCam, 2.0, 8);
  const auto dets = parse_detections(maps.center3d, maps.offset3d, anchors, 0.2, 64);
  REQUIRE(dets.size() == 3);
  for (const auto& person : people) {
    double best = 1e9;
    for (const auto& det : dets) best = std::min(best, (det.translation - person).norm());
    CHECK(best < 1e-9);
  }
  for (std::size_t i = 1; i < dets.size(); ++i) {
    CHECK(dets[i].confidence <= dets[i - 1].confidence);
  }
}

TEST_CASE("threshold above 1 yields no detections") {
  const VoxelGrid g = small_grid();
  const AnchorMaps anchors(g, kCam);
  const MapSet maps = render_gt_maps({at_cell(g, 6, 10, 8)}, g, kCam, 2.0, 8);
  CHECK(parse_detections(maps.center3d, maps.offset3d, anchors, 1.1, 64).empty());
}

TEST_CASE("max_people caps the detection count") {
  const VoxelGrid g = small_grid();
  const AnchorMaps anchors(g, kCam);
  std::vector<Eigen::Vector3d> people;
  for (int i = 0; i < 5; ++i) people.push_back(at_cell(g, 4 + 5 * i, 6 + 4 * i, 5 + 5 * i));
  const MapSet maps = render_gt_maps(people, g, kCam, 2.0, 8);
  CHECK(parse_detections(maps.center3d, maps.offset3d, anchors, 0.2, 2).size() == 2);
}

TEST_CASE("rendering is invariant to the input permutation") {
  const VoxelGrid g = small_grid();
  std::vector<Eigen::Vector3d> people = {
      at_cell(g, 6, 10, 8) + Eigen::Vector3d(0.02, 0.01, 0.05),
      at_cell(g, 6, 10, 8) + Eigen::Vector3d(0.0, 0.0, 0.15),  // same voxel, deeper
      at_cell(g, 20, 20, 24),
  };
  std::vector<Eigen::Vector3d> shuffled = {people[2], people[0], people[1]};
  std::vector<Eigen::Vector3d> shuffled2 = {people[1], people[2], people[0]};
  const MapSet a = render_gt_maps(people, g, kCam, 2.0, 8);
  const MapSet b = render_gt_maps(shuffled, g, kCam, 2.0, 8);
  const MapSet c = render_gt_maps(shuffled2, g, kCam, 2.0, 8);
  CHECK(a.center3d.data == b.center3d.data);
  CHECK(a.offset3d.data == b.offset3d.data);
  CHECK(a.front_offset.data == b.front_offset.data);
  CHECK(a.center3d.data == c.center3d.data);
  CHECK(a.offset3d.data == c.offset3d.data);
}

TEST_CASE("composition consistency for a single person") {
  const VoxelGrid g = small_grid();
  const AnchorMaps anchors(g, kCam);
  const MapSet maps = render_gt_maps({at_cell(g, 12, 18, 9)}, g, kCam, 2.0, 8);
  const Array composed = compose_3d(maps.front_center, maps.bev_center);
  const auto direct = parse_detections(maps.center3d, maps.offset3d, anchors, 0.2, 64);
  const auto via_compose = parse_detections(composed, maps.offset3d, anchors, 0.2, 64);
  REQUIRE(direct.size() == 1);
  REQUIRE(!via_compose.empty());
  CHECK(via_compose[0].cell_d == direct[0].cell_d);
  CHECK(via_compose[0].cell_h == direct[0].cell_h);
  CHECK(via_compose[0].cell_w == direct[0].cell_w);
}

TEST_CASE("mesh feature sampling") {
  const VoxelGrid g = small_grid();
  const DepthEncoder encoder(g, 8);

  SUBCASE("constant map at a cell center adds the encoding") {
    Array feat({8, (std::size_t)g.map_height, (std::size_t)g.map_width});
    for (double& v : feat.data) v = 3.25;
    Detection det;
    det.translation = at_cell(g, 10, 16, 20);
    const Eigen::VectorXd out = sample_mesh_features(feat, det, g, kCam, encoder);
    const Eigen::VectorXd enc = encoder.encode(det.translation.z()).values;
    for (int c = 0; c < 8; ++c) {
      CHECK(out(c) == doctest::Approx(3.25 + enc(c)).epsilon(1e-12));
    }
  }

  SUBCASE("same pixel, different depth differ by the encoding difference") {
    Array feat({8, (std::size_t)g.map_height, (std::size_t)g.map_width});
    for (std::size_t i = 0; i < feat.size(); ++i) feat(i) = 0.001 * i;
    Detection near, far;
    near.translation = at_cell(g, 8, 16, 16);
    far.translation = at_cell(g, 18, 16, 16);
    const Eigen::VectorXd a = sample_mesh_features(feat, near, g, kCam, encoder);
    const Eigen::VectorXd b = sample_mesh_features(feat, far, g, kCam, encoder);
    const Eigen::VectorXd diff = encoder.encode(near.translation.z()).values -
                                 encoder.encode(far.translation.z()).values;
    CHECK((a - b - diff).norm() < 1e-9);
  }

  SUBCASE("bilinear midpoint of a ramp equals the 4-neighbor mean") {
    Array feat({8, (std::size_t)g.map_height, (std::size_t)g.map_width});
    for (std::size_t c = 0; c < 8; ++c) {
      for (int h = 0; h < g.map_height; ++h) {
        for (int w = 0; w < g.map_width; ++w) feat(c, h, w) = 2.0 * h + 3.0 * w;
      }
    }
    Detection det;
    const Eigen::Vector2d px(g.pixel_u(10.5, kCam), g.pixel_v(12.5, kCam));
    det.translation = back_project(px, g.depth_of_bin(9), kCam);
    const Eigen::VectorXd out = sample_mesh_features(feat, det, g, kCam, encoder);
    const double mean =
        (feat(0, 12, 10) + feat(0, 12, 11) + feat(0, 13, 10) + feat(0, 13, 11)) / 4.0;
    const Eigen::VectorXd enc = encoder.encode(det.translation.z()).values;
    CHECK(out(0) == doctest::Approx(mean + enc(0)).epsilon(1e-12));
  }

  SUBCASE("projection outside the map throws") {
    Array feat({8, (std::size_t)g.map_height, (std::size_t)g.map_width});
    Detection det;
    det.translation = Eigen::Vector3d(50.0, 0.0, 5.0);
    CHECK_THROWS_AS(sample_mesh_features(feat, det, g, kCam, encoder), OutOfBounds);
  }
}
