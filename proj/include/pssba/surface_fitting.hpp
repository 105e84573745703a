#pragma once

#include "pssba/cloud.hpp"
#include "pssba/geometry.hpp"

#include <vector>

namespace pssba {

// Local frame of a smoothing kernel. Rows of M are the two tangent axes
// followed by the kernel normal; origin is the kernel center in world
// coordinates.
struct TangentFrame {
    Mat3 M = Mat3::Identity();
    Vec3 origin = Vec3::Zero();
};

// Rows: n1 x n, n1, n with n1 = normalize([n_y, -n_x, 0]) and a fixed
// fallback axis when n is within 1e-6 of +-z. Right-handed, det +1.
Mat3 basis_of_normal(const Vec3& n);

inline TangentFrame make_tangent_frame(const Vec3& n, const Vec3& origin)
{
    return {basis_of_normal(n), origin};
}

// M * (p_world - origin); z is the signed offset along the kernel normal.
Vec3 to_tangent(const TangentFrame& frame, const Vec3& p_world);

// Inverse of to_tangent: M^T * p_tangent + origin.
Vec3 from_tangent(const TangentFrame& frame, const Vec3& p_tangent);

// Gaussian falloff exp(-d^2 / gamma^2). Requires gamma > 0.
double radial_weight(double d, double gamma);

// Coefficients of f(x, y) = a0 x^2 + a1 y^2 + a2 xy + a3 x + a4 y.
using Alpha = Eigen::Matrix<double, 5, 1>;

double surface_eval(const Alpha& alpha, double x, double y);

// Gradient of f: (2 a0 x + a2 y + a3, 2 a1 y + a2 x + a4).
Vec2 surface_gradient(const Alpha& alpha, double x, double y);

struct FitOptions {
    int min_fit_points = 8;
    double cond_max = 1e8;
};

struct FitResult {
    Alpha alpha = Alpha::Zero();
    double rms = 0.0;  // weighted residual RMS in meters
    bool ok = false;
};

// Weighted least squares over the kernel's tangent-space points: minimizes
// sum_j ((f(x_j, y_j) - z_j) * w_j)^2 with w_j the radial weight of the full
// 3D tangent distance. Fails (ok=false) on too few points or a normal-equation
// condition number above cond_max.
FitResult fit_surface(const std::vector<Vec3>& tangent_points,
                      double gamma,
                      const FitOptions& options = {});

struct SmoothingKernel {
    int kernel_point_index = -1;   // index of the kernel point in the world cloud
    int frame_index = -1;          // frame owning the kernel point
    Vec3 sensor_point = Vec3::Zero();  // kernel point in its frame's sensor coords
    TangentFrame tangent;
    Alpha alpha = Alpha::Zero();
    std::vector<int> neighbors;    // world-cloud indices, kernel point excluded
    double fit_rms = 0.0;
    bool valid = false;
};

// Projects each tangent-space point onto the fitted surface (z := f(x, y))
// and maps the result back to world coordinates. Inputs are not modified.
std::vector<Vec3> smooth_points(const SmoothingKernel& kernel,
                                const std::vector<Vec3>& tangent_points);

// One residual pairing a kernel surface with one neighboring point.
struct SurfaceFactor {
    int kernel_id = -1;     // index into the kernel list
    int point_index = -1;   // world-cloud index of the paired point
    int frame_i = -1;       // kernel's frame
    int frame_j = -1;       // paired point's frame
    Vec3 point_sensor = Vec3::Zero();  // paired point in frame_j sensor coords
};

// One factor per (valid kernel, neighbor) pair in deterministic order.
// Self-pairings are dropped: the kernel point sits at the tangent origin where
// the residual is identically zero.
std::vector<SurfaceFactor> build_factors(const std::vector<SmoothingKernel>& kernels,
                                         const std::vector<MapPoint>& cloud);

}  // namespace pssba
