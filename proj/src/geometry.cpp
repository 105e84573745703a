#include "pssba/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace pssba {

Mat3 skew(const Vec3& v)
{
    Mat3 S;
    S <<    0, -v(2),  v(1),
         v(2),     0, -v(0),
        -v(1),  v(0),     0;
    return S;
}

Mat3 exp_map(const Vec3& axis_angle)
{
    const double theta = axis_angle.norm();
    const Mat3 S = skew(axis_angle);

    double a;  // sin(theta)/theta
    double b;  // (1 - cos(theta))/theta^2
    if (theta < 1e-8) {
        const double t2 = theta * theta;
        a = 1.0 - t2 / 6.0;
        b = 0.5 - t2 / 24.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / (theta * theta);
    }
    return Mat3::Identity() + a * S + b * S * S;
}

double rotation_angle(const Mat3& R)
{
    const double c = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c);
}

Vec3 project_point(const Pose& pose, const Vec3& p_sensor)
{
    return pose.R * p_sensor + pose.t;
}

Eigen::Matrix<double, 3, 2> normal_tangent_basis(const Vec3& n)
{
    if (std::abs(n.norm() - 1.0) > 1e-6) {
        throw std::invalid_argument("normal_tangent_basis: input normal is not unit length");
    }
    Vec3 n1;
    const double xy2 = n(0) * n(0) + n(1) * n(1);
    if (xy2 < 1e-12) {
        n1 = Vec3(0, 1, 0);  // normal ~ +-z, the generic rule degenerates
    } else {
        n1 = Vec3(n(1), -n(0), 0).normalized();
    }
    const Vec3 n0 = n1.cross(n);
    Eigen::Matrix<double, 3, 2> basis;
    basis.col(0) = n0;
    basis.col(1) = n1;
    return basis;
}

Vec3 perturb_normal(const Vec3& n, const Vec2& dphi)
{
    const auto basis = normal_tangent_basis(n);
    return (n + basis * dphi).normalized();
}

bool is_rotation(const Mat3& R, double tol)
{
    const Mat3 err = R * R.transpose() - Mat3::Identity();
    return err.cwiseAbs().maxCoeff() <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

}  // namespace pssba
