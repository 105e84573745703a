#pragma once

#include <vector>

#include "pssba/geometry.hpp"

namespace pssba {

// One kernel's L0-regularized normal refinement problem. The data term pins
// the estimate to the kernel's initial normal while the sparsity term zeroes
// small differentials against the neighbor normals and leaves large ones
// (creases, outliers) untouched.
struct NormalProblem {
    Vec3 kernel_normal = Vec3::UnitZ();
    std::vector<Vec3> neighbor_normals;
    double mu = 0.05;
    double beta_init = 0.01;
    double beta_scale = 2.0;
    double beta_max = 1e4;
};

// Differentials D_j = 1 - n.dot(neighbor_j).
std::vector<double> differentials(const Vec3& n, const std::vector<Vec3>& neighbor_normals);

// Closed-form solve of the sparsity subproblem: entry j becomes 0 when
// mu/beta > D_j^2, otherwise it keeps D_j.
std::vector<double> threshold_step(const std::vector<double>& D, double mu, double beta);

// Auxiliary objective at fixed sparsity targets Xi:
//   (1 - n.dot(kernel_normal)) + beta * sum_j (D_j(n) - Xi_j)^2
double auxiliary_objective(const NormalProblem& problem,
                           const std::vector<double>& Xi,
                           double beta,
                           const Vec3& n);

struct QuadraticStepResult {
    Vec3 normal;
    bool degenerate = false;
};

// One Gauss-Newton step (with step halving so the objective never increases)
// on auxiliary_objective over the 2-DOF tangent perturbation of n_current.
QuadraticStepResult quadratic_step(const NormalProblem& problem,
                                   const std::vector<double>& Xi,
                                   double beta,
                                   const Vec3& n_current);

// Alternates threshold_step and quadratic_step from n = kernel_normal with
// beta growing by beta_scale each round, until beta exceeds beta_max or a
// round moves the normal by less than 1e-4 rad.
Vec3 smooth_normal(const NormalProblem& problem);

}  // namespace pssba
