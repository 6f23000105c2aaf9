#pragma once

#include <Eigen/Dense>
#include <array>

#include "bev/common.hpp"

namespace bev {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Decodes a continuous 6D rotation representation into a rotation matrix.
/// The 6 values are read as two 3-vectors (a1, a2); the matrix columns are
/// b1 = a1/|a1|, b2 = Gram-Schmidt of a2 against b1, b3 = b1 x b2.
/// Throws DegenerateRotation when a1 is near zero or a2 is near parallel to a1.
Eigen::Matrix3d rot6d_to_matrix(const Vector6d& r);

/// Same decode, also returning dR/dr_k for k = 0..5.
Eigen::Matrix3d rot6d_to_matrix_jacobian(const Vector6d& r,
                                         std::array<Eigen::Matrix3d, 6>& jac);

/// Encodes a rotation matrix as 6D (first two columns).
Vector6d matrix_to_rot6d(const Eigen::Matrix3d& m);

/// Axis-angle vector (angle * unit axis) of a rotation matrix.
Eigen::Vector3d matrix_to_axis_angle(const Eigen::Matrix3d& m);

/// 6D representation of the identity rotation.
Vector6d rot6d_identity();

}  // namespace bev
