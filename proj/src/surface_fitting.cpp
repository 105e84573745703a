#include "pssba/surface_fitting.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace pssba {

Mat3 basis_of_normal(const Vec3& n)
{
    const auto tangent = normal_tangent_basis(n);  // columns: axis0, axis1
    Mat3 M;
    M.row(0) = tangent.col(0).transpose();
    M.row(1) = tangent.col(1).transpose();
    M.row(2) = n.normalized().transpose();
    return M;
}

Vec3 to_tangent(const TangentFrame& frame, const Vec3& p_world)
{
    return frame.M * (p_world - frame.origin);
}

Vec3 from_tangent(const TangentFrame& frame, const Vec3& p_tangent)
{
    return frame.M.transpose() * p_tangent + frame.origin;
}

double radial_weight(double d, double gamma)
{
    if (!(gamma > 0.0)) {
        throw std::invalid_argument("radial_weight: gamma must be positive");
    }
    return std::exp(-(d * d) / (gamma * gamma));
}

double surface_eval(const Alpha& alpha, double x, double y)
{
    return alpha[0] * x * x + alpha[1] * y * y + alpha[2] * x * y + alpha[3] * x + alpha[4] * y;
}

Vec2 surface_gradient(const Alpha& alpha, double x, double y)
{
    return {2.0 * alpha[0] * x + alpha[2] * y + alpha[3],
            2.0 * alpha[1] * y + alpha[2] * x + alpha[4]};
}

FitResult fit_surface(const std::vector<Vec3>& tangent_points,
                      double gamma,
                      const FitOptions& options)
{
    FitResult result;
    if (static_cast<int>(tangent_points.size()) < options.min_fit_points) return result;

    Eigen::Matrix<double, 5, 5> A = Eigen::Matrix<double, 5, 5>::Zero();
    Eigen::Matrix<double, 5, 1> b = Eigen::Matrix<double, 5, 1>::Zero();
    for (const auto& p : tangent_points) {
        const double w = radial_weight(p.norm(), gamma);
        const double w2 = w * w;
        Eigen::Matrix<double, 5, 1> a;
        a << p.x() * p.x(), p.y() * p.y(), p.x() * p.y(), p.x(), p.y();
        A.noalias() += w2 * a * a.transpose();
        b.noalias() += w2 * a * p.z();
    }

    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 5, 5>> eig(A);
    const double emin = eig.eigenvalues()(0);
    const double emax = eig.eigenvalues()(4);
    if (!(emin > 0.0) || emax > options.cond_max * emin) return result;

    result.alpha = A.ldlt().solve(b);

    double weighted_sq = 0.0;
    double weight_sq = 0.0;
    for (const auto& p : tangent_points) {
        const double w = radial_weight(p.norm(), gamma);
        const double r = surface_eval(result.alpha, p.x(), p.y()) - p.z();
        weighted_sq += (r * w) * (r * w);
        weight_sq += w * w;
    }
    result.rms = weight_sq > 0.0 ? std::sqrt(weighted_sq / weight_sq) : 0.0;
    result.ok = true;
    return result;
}

std::vector<Vec3> smooth_points(const SmoothingKernel& kernel,
                                const std::vector<Vec3>& tangent_points)
{
    std::vector<Vec3> out;
    out.reserve(tangent_points.size());
    for (const auto& p : tangent_points) {
        const double f = surface_eval(kernel.alpha, p.x(), p.y());
        out.push_back(from_tangent(kernel.tangent, Vec3(p.x(), p.y(), f)));
    }
    return out;
}

std::vector<SurfaceFactor> build_factors(const std::vector<SmoothingKernel>& kernels,
                                         const std::vector<MapPoint>& cloud)
{
    std::vector<SurfaceFactor> factors;
    for (int k = 0; k < static_cast<int>(kernels.size()); ++k) {
        const auto& kernel = kernels[k];
        if (!kernel.valid) continue;
        for (int idx : kernel.neighbors) {
            if (idx == kernel.kernel_point_index) continue;
            const auto& point = cloud.at(static_cast<std::size_t>(idx));
            factors.push_back({k, idx, kernel.frame_index, point.frame_index, point.sensor});
        }
    }
    return factors;
}

}  // namespace pssba
