#include "pssba/normal_smoothing.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace pssba {

std::vector<double> differentials(const Vec3& n, const std::vector<Vec3>& neighbor_normals)
{
    std::vector<double> D;
    D.reserve(neighbor_normals.size());
    for (const auto& nb : neighbor_normals) D.push_back(1.0 - n.dot(nb));
    return D;
}

std::vector<double> threshold_step(const std::vector<double>& D, double mu, double beta)
{
    if (beta <= 0.0) {
        throw std::invalid_argument("threshold_step: beta must be positive");
    }
    std::vector<double> Xi(D.size());
    for (std::size_t j = 0; j < D.size(); ++j) {
        Xi[j] = (mu / beta > D[j] * D[j]) ? 0.0 : D[j];
    }
    return Xi;
}

double auxiliary_objective(const NormalProblem& problem,
                           const std::vector<double>& Xi,
                           double beta,
                           const Vec3& n)
{
    double smooth = 0.0;
    for (std::size_t j = 0; j < problem.neighbor_normals.size(); ++j) {
        const double r = (1.0 - n.dot(problem.neighbor_normals[j])) - Xi[j];
        smooth += r * r;
    }
    return (1.0 - n.dot(problem.kernel_normal)) + beta * smooth;
}

QuadraticStepResult quadratic_step(const NormalProblem& problem,
                                   const std::vector<double>& Xi,
                                   double beta,
                                   const Vec3& n_current)
{
    const std::size_t count = problem.neighbor_normals.size();
    if (Xi.size() != count) {
        throw std::invalid_argument("quadratic_step: Xi length must match the neighbor count");
    }

    const auto basis = normal_tangent_basis(n_current);  // 3x2

    // Data term as the residual (n - kernel_normal)/sqrt(2), whose squared
    // norm equals 1 - n.dot(kernel_normal) on the unit sphere. This gives the
    // Gauss-Newton system the spherical curvature of the data term.
    Eigen::Matrix2d H = 0.5 * Eigen::Matrix2d::Identity();
    Vec2 g = 0.5 * basis.transpose() * (n_current - problem.kernel_normal);

    for (std::size_t j = 0; j < count; ++j) {
        const Vec2 a = basis.transpose() * problem.neighbor_normals[j];
        const double r = (1.0 - n_current.dot(problem.neighbor_normals[j])) - Xi[j];
        H += beta * a * a.transpose();
        g -= beta * a * r;  // J_j = -a^T
    }

    const double det = H.determinant();
    if (!(std::abs(det) > 1e-300)) {
        return {n_current, true};
    }
    Vec2 dphi = -H.inverse() * g;

    // Halve the step until the objective does not increase.
    const double before = auxiliary_objective(problem, Xi, beta, n_current);
    for (int halvings = 0; halvings < 24; ++halvings) {
        const Vec3 candidate = perturb_normal(n_current, dphi);
        if (auxiliary_objective(problem, Xi, beta, candidate) <= before) {
            return {candidate, false};
        }
        dphi *= 0.5;
    }
    return {n_current, false};
}

Vec3 smooth_normal(const NormalProblem& problem)
{
    if (problem.neighbor_normals.empty()) return problem.kernel_normal;
    if (problem.beta_init <= 0.0 || problem.beta_scale <= 1.0) {
        throw std::invalid_argument("smooth_normal: need beta_init > 0 and beta_scale > 1");
    }

    Vec3 n = problem.kernel_normal;
    double beta = problem.beta_init;
    while (beta <= problem.beta_max) {
        const auto D = differentials(n, problem.neighbor_normals);
        const auto Xi = threshold_step(D, problem.mu, beta);
        const auto step = quadratic_step(problem, Xi, beta, n);
        const double moved = std::acos(std::clamp(n.dot(step.normal), -1.0, 1.0));
        n = step.normal;
        if (moved < 1e-4) break;
        beta *= problem.beta_scale;
    }
    return n;
}

}  // namespace pssba
