#include "pssba/pose_adjustment.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace pssba {
namespace {

ResidualEvaluation evaluate_with_alpha(const SurfaceFactor& factor,
                                       const std::vector<Pose>& poses,
                                       const SmoothingKernel& kernel,
                                       const Alpha& alpha,
                                       int gauge_index)
{
    if (!kernel.valid) {
        throw std::invalid_argument("evaluate_residual: kernel is not valid");
    }
    const auto& pose_i = poses.at(static_cast<std::size_t>(factor.frame_i));
    const auto& pose_j = poses.at(static_cast<std::size_t>(factor.frame_j));

    const Vec3 rotated_i = pose_i.R * kernel.sensor_point;
    const Vec3 rotated_j = pose_j.R * factor.point_sensor;
    const Vec3 world_i = rotated_i + pose_i.t;
    const Vec3 world_j = rotated_j + pose_j.t;

    const Mat3& M = kernel.tangent.M;
    const Vec3 s = M * (world_j - world_i);

    ResidualEvaluation eval;
    eval.sigma = surface_eval(alpha, s.x(), s.y()) - s.z();

    const Vec2 grad = surface_gradient(alpha, s.x(), s.y());
    RowVec3 g;
    g << grad.x(), grad.y(), -1.0;
    const RowVec3 gM = g * M;

    if (factor.frame_j != gauge_index) {
        eval.J_tj = gM;
        eval.J_thetaj = -gM * skew(rotated_j);
    }
    if (factor.frame_i != gauge_index) {
        eval.J_ti = -gM;
        eval.J_thetai = gM * skew(rotated_i);
    }
    return eval;
}

}  // namespace

ResidualEvaluation evaluate_residual(const SurfaceFactor& factor,
                                     const std::vector<Pose>& poses,
                                     const SmoothingKernel& kernel,
                                     int gauge_index)
{
    return evaluate_with_alpha(factor, poses, kernel, kernel.alpha, gauge_index);
}

ResidualEvaluation evaluate_point2plane(const SurfaceFactor& factor,
                                        const std::vector<Pose>& poses,
                                        const SmoothingKernel& kernel,
                                        int gauge_index)
{
    auto eval = evaluate_with_alpha(factor, poses, kernel, Alpha::Zero(), gauge_index);
    eval.sigma = -eval.sigma;
    eval.J_ti = -eval.J_ti;
    eval.J_thetai = -eval.J_thetai;
    eval.J_tj = -eval.J_tj;
    eval.J_thetaj = -eval.J_thetaj;
    return eval;
}

SolverState solve_poses(const std::vector<SurfaceFactor>& factors,
                        const std::vector<SmoothingKernel>& kernels,
                        const std::vector<Pose>& poses,
                        const SolverOptions& options)
{
    const int n_frames = static_cast<int>(poses.size());
    if (n_frames == 0) throw std::invalid_argument("solve_poses: pose list is empty");
    if (options.gauge_index < 0 || options.gauge_index >= n_frames) {
        throw std::invalid_argument("solve_poses: gauge index out of range");
    }

    std::vector<const SurfaceFactor*> usable;
    usable.reserve(factors.size());
    std::vector<char> touched(static_cast<std::size_t>(n_frames), 0);
    for (const auto& f : factors) {
        if (f.kernel_id < 0 || f.kernel_id >= static_cast<int>(kernels.size())) continue;
        if (!kernels[static_cast<std::size_t>(f.kernel_id)].valid) continue;
        if (f.frame_i < 0 || f.frame_i >= n_frames || f.frame_j < 0 || f.frame_j >= n_frames) {
            throw std::out_of_range("solve_poses: factor frame index out of range");
        }
        usable.push_back(&f);
        touched[static_cast<std::size_t>(f.frame_i)] = 1;
        touched[static_cast<std::size_t>(f.frame_j)] = 1;
    }

    SolverState state;
    state.poses = poses;
    state.lambda = options.lambda_init;
    state.update_norms.assign(static_cast<std::size_t>(n_frames), {});

    std::vector<int> block_of(static_cast<std::size_t>(n_frames), -1);
    int n_free = 0;
    for (int fr = 0; fr < n_frames; ++fr) {
        if (fr == options.gauge_index) continue;
        if (!touched[static_cast<std::size_t>(fr)]) {
            state.frozen_frames.push_back(fr);
            continue;
        }
        block_of[static_cast<std::size_t>(fr)] = n_free++;
    }
    if (n_free == 0) {
        throw std::runtime_error("solve_poses: no factor touches an adjustable frame");
    }

    const bool plane_mode = options.mode == ResidualMode::point2plane;
    auto evaluate = [&](const SurfaceFactor& f, const std::vector<Pose>& p) {
        const auto& kernel = kernels[static_cast<std::size_t>(f.kernel_id)];
        return plane_mode ? evaluate_point2plane(f, p, kernel, options.gauge_index)
                          : evaluate_residual(f, p, kernel, options.gauge_index);
    };
    auto robust_cost = [&](double sigma) {
        const double d = options.huber_delta;
        if (d > 0.0 && std::abs(sigma) > d) return 2.0 * d * std::abs(sigma) - d * d;
        return sigma * sigma;
    };
    auto robust_weight = [&](double sigma) {
        const double d = options.huber_delta;
        if (d > 0.0 && std::abs(sigma) > d) return d / std::abs(sigma);
        return 1.0;
    };
    auto total_cost = [&](const std::vector<Pose>& p) {
        double c = 0.0;
        for (const auto* f : usable) c += robust_cost(evaluate(*f, p).sigma);
        return c;
    };

    const int nv = 6 * n_free;
    Eigen::MatrixXd H(nv, nv);
    Eigen::VectorXd g(nv);

    double cost = total_cost(state.poses);
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        H.setZero();
        g.setZero();
        for (const auto* f : usable) {
            const auto eval = evaluate(*f, state.poses);
            const double w = robust_weight(eval.sigma);
            Eigen::Matrix<double, 1, 6> Ji;
            Eigen::Matrix<double, 1, 6> Jj;
            Ji << eval.J_thetai, eval.J_ti;
            Jj << eval.J_thetaj, eval.J_tj;
            const int bi = block_of[static_cast<std::size_t>(f->frame_i)];
            const int bj = block_of[static_cast<std::size_t>(f->frame_j)];
            if (f->frame_i == f->frame_j) {
                if (bi >= 0) {
                    const Eigen::Matrix<double, 1, 6> J = Ji + Jj;
                    H.block<6, 6>(6 * bi, 6 * bi).noalias() += w * J.transpose() * J;
                    g.segment<6>(6 * bi).noalias() += w * J.transpose() * eval.sigma;
                }
                continue;
            }
            if (bi >= 0) {
                H.block<6, 6>(6 * bi, 6 * bi).noalias() += w * Ji.transpose() * Ji;
                g.segment<6>(6 * bi).noalias() += w * Ji.transpose() * eval.sigma;
            }
            if (bj >= 0) {
                H.block<6, 6>(6 * bj, 6 * bj).noalias() += w * Jj.transpose() * Jj;
                g.segment<6>(6 * bj).noalias() += w * Jj.transpose() * eval.sigma;
            }
            if (bi >= 0 && bj >= 0) {
                H.block<6, 6>(6 * bi, 6 * bj).noalias() += w * Ji.transpose() * Jj;
                H.block<6, 6>(6 * bj, 6 * bi).noalias() += w * Jj.transpose() * Ji;
            }
        }

        state.iterations = iter + 1;
        bool accepted = false;
        double new_cost = cost;
        while (true) {
            Eigen::MatrixXd damped = H;
            damped.diagonal().array() += state.lambda;
            const Eigen::VectorXd delta = damped.ldlt().solve(-g);
            if (delta.allFinite()) {
                std::vector<Pose> candidate = state.poses;
                for (int fr = 0; fr < n_frames; ++fr) {
                    const int b = block_of[static_cast<std::size_t>(fr)];
                    if (b < 0) continue;
                    auto& pose = candidate[static_cast<std::size_t>(fr)];
                    pose.R = exp_map(delta.segment<3>(6 * b)) * pose.R;
                    pose.t += delta.segment<3>(6 * b + 3);
                }
                new_cost = total_cost(candidate);
                if (std::isfinite(new_cost) && new_cost <= cost) {
                    state.poses = std::move(candidate);
                    state.lambda *= options.lambda_down;
                    accepted = true;
                    break;
                }
            }
            state.lambda *= options.lambda_up;
            if (state.lambda > 1e12) break;
        }
        if (!accepted) break;

        const double rel = (cost - new_cost) / std::max(cost, 1e-300);
        cost = new_cost;
        if (rel < options.rel_tol) break;
    }

    for (int fr = 0; fr < n_frames; ++fr) {
        const auto idx = static_cast<std::size_t>(fr);
        state.update_norms[idx].translation = (state.poses[idx].t - poses[idx].t).norm();
        state.update_norms[idx].rotation =
            rotation_angle(state.poses[idx].R * poses[idx].R.transpose());
    }
    state.residual_rms =
        usable.empty() ? 0.0 : std::sqrt(cost / static_cast<double>(usable.size()));
    return state;
}

}  // namespace pssba
