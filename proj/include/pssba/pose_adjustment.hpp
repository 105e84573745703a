#pragma once

#include "pssba/geometry.hpp"
#include "pssba/surface_fitting.hpp"

#include <vector>

namespace pssba {

using RowVec3 = Eigen::Matrix<double, 1, 3>;

// Residual of one factor plus its four Jacobian blocks. Blocks belonging to
// the gauge frame are zeroed.
struct ResidualEvaluation {
    double sigma = 0.0;
    RowVec3 J_ti = RowVec3::Zero();
    RowVec3 J_thetai = RowVec3::Zero();
    RowVec3 J_tj = RowVec3::Zero();
    RowVec3 J_thetaj = RowVec3::Zero();
};

enum class ResidualMode { polynomial, point2plane };

// Distance from the paired point to the kernel's fitted surface, measured
// along the kernel normal: sigma = f(x, y) - z in tangent coordinates. The
// kernel origin is recomputed from the current pose of frame_i; M and alpha
// stay fixed at their fitted values.
ResidualEvaluation evaluate_residual(const SurfaceFactor& factor,
                                     const std::vector<Pose>& poses,
                                     const SmoothingKernel& kernel,
                                     int gauge_index = 0);

// Plane specialization: sigma = n_i . (p_j^W - p_i^W), the tangent z itself.
// Equals evaluate_residual with alpha = 0 and the sign flipped.
ResidualEvaluation evaluate_point2plane(const SurfaceFactor& factor,
                                        const std::vector<Pose>& poses,
                                        const SmoothingKernel& kernel,
                                        int gauge_index = 0);

struct SolverOptions {
    int max_iterations = 10;
    double lambda_init = 1e-4;
    double lambda_up = 10.0;
    double lambda_down = 0.5;
    double rel_tol = 1e-6;
    int gauge_index = 0;
    ResidualMode mode = ResidualMode::polynomial;
    double huber_delta = 0.0;  // robust loss threshold in meters; <= 0 disables
};

struct FrameUpdate {
    double translation = 0.0;  // |t_out - t_in| in meters
    double rotation = 0.0;     // angle of R_out * R_in^T in radians
};

struct SolverState {
    std::vector<Pose> poses;
    double lambda = 0.0;
    double residual_rms = 0.0;
    std::vector<FrameUpdate> update_norms;  // per frame, total change this solve
    std::vector<int> frozen_frames;         // non-gauge frames in no usable factor
    int iterations = 0;
};

// Levenberg-Marquardt over all frame poses with the gauge frame held fixed.
// Builds the blocked normal equations from the factor Jacobians, damps with
// lambda * I, and retries rejected steps with increased damping. Non-gauge
// frames that no factor touches are frozen and reported; if every non-gauge
// frame is frozen the system is unsolvable and an exception is thrown.
SolverState solve_poses(const std::vector<SurfaceFactor>& factors,
                        const std::vector<SmoothingKernel>& kernels,
                        const std::vector<Pose>& poses,
                        const SolverOptions& options = {});

}  // namespace pssba
