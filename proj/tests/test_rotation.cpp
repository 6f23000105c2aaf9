#include <doctest.h>

#include <random>

#include "bev/rotation.hpp"

using namespace bev;

namespace {
Vector6d make6(double a, double b, double c, double d, double e, double f) {
  Vector6d r;
  r << a, b, c, d, e, f;
  return r;
}
}  // namespace

TEST_CASE("identity 6d decodes to the identity matrix") {
  const Eigen::Matrix3d m = rot6d_to_matrix(make6(1, 0, 0, 0, 1, 0));
  CHECK((m - Eigen::Matrix3d::Identity()).norm() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK((rot6d_to_matrix(rot6d_identity()) - Eigen::Matrix3d::Identity()).norm() <
        1e-12);
}

TEST_CASE("90 degree rotation about z") {
  const Eigen::Matrix3d m = rot6d_to_matrix(make6(0, 1, 0, -1, 0, 0));
  Eigen::Matrix3d expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK((m - expected).norm() < 1e-12);
}

TEST_CASE("unnormalized, non-orthogonal input is normalized and orthogonalized") {
  const Eigen::Matrix3d m = rot6d_to_matrix(make6(2, 0, 0, 1, 1, 0));
  CHECK((m - Eigen::Matrix3d::Identity()).norm() < 1e-12);
}

TEST_CASE("output is special orthogonal for random inputs") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Vector6d r;
    for (int k = 0; k < 6; ++k) r(k) = gauss(rng);
    const Eigen::Matrix3d m = rot6d_to_matrix(r);
    CHECK((m.transpose() * m - Eigen::Matrix3d::Identity()).norm() < 1e-9);
    CHECK(m.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("degenerate inputs throw") {
  CHECK_THROWS_AS(rot6d_to_matrix(make6(0, 0, 0, 0, 1, 0)), DegenerateRotation);
  CHECK_THROWS_AS(rot6d_to_matrix(make6(1, 0, 0, 2, 0, 0)), DegenerateRotation);
}

TEST_CASE("encode/decode round trip") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Vector6d r;
    for (int k = 0; k < 6; ++k) r(k) = gauss(rng);
    const Eigen::Matrix3d m = rot6d_to_matrix(r);
    const Eigen::Matrix3d m2 = rot6d_to_matrix(matrix_to_rot6d(m));
    CHECK((m - m2).norm() < 1e-9);
  }
}

TEST_CASE("analytic jacobian matches finite differences") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double h = 1e-6;
  for (int i = 0; i < 50; ++i) {
    Vector6d r;
    for (int k = 0; k < 6; ++k) r(k) = gauss(rng);
    if (r.head<3>().norm() < 0.1) continue;
    std::array<Eigen::Matrix3d, 6> jac;
    rot6d_to_matrix_jacobian(r, jac);
    for (int k = 0; k < 6; ++k) {
      Vector6d up = r, dn = r;
      up(k) += h;
      dn(k) -= h;
      const Eigen::Matrix3d fd = (rot6d_to_matrix(up) - rot6d_to_matrix(dn)) / (2 * h);
      CHECK((jac[k] - fd).norm() < 1e-5);
    }
  }
}

TEST_CASE("axis-angle of small rotations") {
  const Eigen::Matrix3d m = rot6d_to_matrix(make6(0, 1, 0, -1, 0, 0));
  const Eigen::Vector3d aa = matrix_to_axis_angle(m);
  CHECK(aa.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(aa.y() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(aa.z() == doctest::Approx(M_PI / 2).epsilon(1e-12));
}
