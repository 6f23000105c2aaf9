#include "bev/rotation.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "bev/common.hpp"

namespace bev {

namespace {
constexpr double kDegenerateNorm = 1e-8;
}

Eigen::Matrix3d rot6d_to_matrix(const Vector6d& r) {
  const Eigen::Vector3d a1 = r.head<3>();
  const Eigen::Vector3d a2 = r.tail<3>();
  const double n1 = a1.norm();
  if (n1 <= kDegenerateNorm) {
    throw DegenerateRotation("rot6d: first 3-vector has near-zero norm");
  }
  const Eigen::Vector3d b1 = a1 / n1;
  const Eigen::Vector3d u = a2 - b1.dot(a2) * b1;
  const double nu = u.norm();
  if (nu <= kDegenerateNorm) {
    throw DegenerateRotation("rot6d: second 3-vector near parallel to first");
  }
  const Eigen::Vector3d b2 = u / nu;
  Eigen::Matrix3d m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b1.cross(b2);
  return m;
}

Eigen::Matrix3d rot6d_to_matrix_jacobian(const Vector6d& r,
                                         std::array<Eigen::Matrix3d, 6>& jac) {
  const Eigen::Vector3d a1 = r.head<3>();
  const Eigen::Vector3d a2 = r.tail<3>();
  const double n1 = a1.norm();
  if (n1 <= kDegenerateNorm) {
    throw DegenerateRotation("rot6d: first 3-vector has near-zero norm");
  }
  const Eigen::Vector3d b1 = a1 / n1;
  const Eigen::Vector3d u = a2 - b1.dot(a2) * b1;
  const double nu = u.norm();
  if (nu <= kDegenerateNorm) {
    throw DegenerateRotation("rot6d: second 3-vector near parallel to first");
  }
  const Eigen::Vector3d b2 = u / nu;
  const Eigen::Vector3d b3 = b1.cross(b2);

  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  // db1/da1, db2/du are projections onto the unit-sphere tangent.
  const Eigen::Matrix3d db1_da1 = (I - b1 * b1.transpose()) / n1;
  const Eigen::Matrix3d db2_du = (I - b2 * b2.transpose()) / nu;
  // u = a2 - (b1.a2) b1
  const Eigen::Matrix3d du_db1 = -(b1 * a2.transpose() + b1.dot(a2) * I);
  const Eigen::Matrix3d du_da2 = I - b1 * b1.transpose();

  const Eigen::Matrix3d db2_da1 = db2_du * du_db1 * db1_da1;
  const Eigen::Matrix3d db2_da2 = db2_du * du_da2;

  for (int k = 0; k < 6; ++k) {
    Eigen::Vector3d db1 = Eigen::Vector3d::Zero();
    Eigen::Vector3d db2;
    if (k < 3) {
      db1 = db1_da1.col(k);
      db2 = db2_da1.col(k);
    } else {
      db2 = db2_da2.col(k - 3);
    }
    const Eigen::Vector3d db3 = db1.cross(b2) + b1.cross(db2);
    jac[k].col(0) = db1;
    jac[k].col(1) = db2;
    jac[k].col(2) = db3;
  }

  Eigen::Matrix3d m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b3;
  return m;
}

Vector6d matrix_to_rot6d(const Eigen::Matrix3d& m) {
  Vector6d r;
  r.head<3>() = m.col(0);
  r.tail<3>() = m.col(1);
  return r;
}

Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& m) {
  const Eigen::AngleAxisd aa(m);
  return aa.angle() * aa.axis();
}

Vector6d rot6d_identity() {
  Vector6d r;
  r << 1, 0, 0, 0, 1, 0;
  return r;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace bev
