#pragma once

#include <Eigen/Core>

namespace pssba {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Rigid sensor-to-world transform: p_world = R * p_sensor + t.
struct Pose {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    static Pose identity() { return {}; }
    Pose inverse() const { return Pose{R.transpose(), -(R.transpose() * t)}; }
};

// Antisymmetric matrix with skew(v) * w == v x w.
Mat3 skew(const Vec3& v);

// Rodrigues rotation from an axis-angle vector. Near theta = 0 the
// sin/(1-cos) coefficients switch to their second-order Taylor expansions.
Mat3 exp_map(const Vec3& axis_angle);

// Angle of a rotation matrix in [0, pi].
double rotation_angle(const Mat3& R);

Vec3 project_point(const Pose& pose, const Vec3& p_sensor);

// Orthonormal in-plane directions [n0 n1] of a unit normal, as columns.
// Shared with the tangent-frame construction so the two always agree.
// Throws std::invalid_argument if |n| deviates from 1 by more than 1e-6.
Eigen::Matrix<double, 3, 2> normal_tangent_basis(const Vec3& n);

// Applies a 2-DOF update in the tangent plane of n and renormalizes.
Vec3 perturb_normal(const Vec3& n, const Vec2& dphi);

bool is_rotation(const Mat3& R, double tol = 1e-9);

}  // namespace pssba
