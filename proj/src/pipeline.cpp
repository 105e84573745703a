#include "pssba/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace pssba {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// One fully prepared smoothing scale: world cloud, fitted kernels, factors.
struct Stage {
    std::vector<MapPoint> cloud;
    std::vector<SmoothingKernel> kernels;
    std::vector<SurfaceFactor> factors;
    int valid_kernel_count = 0;
};

Stage build_stage(const std::vector<Frame>& frames,
                  const std::vector<Pose>& poses,
                  double gamma,
                  const PipelineConfig& config)
{
    Stage stage;
    stage.cloud = build_world_cloud(frames, poses);
    const NeighborIndex index(stage.cloud, gamma);
    const auto kernel_points = sample_kernels(stage.cloud, gamma);
    pca_normals(stage.cloud, index, poses, gamma, config.pca_min_pts);

    stage.kernels.reserve(kernel_points.size());
    for (int ki : kernel_points) {
        const auto& center = stage.cloud[static_cast<std::size_t>(ki)];
        SmoothingKernel kernel;
        kernel.kernel_point_index = ki;
        kernel.frame_index = center.frame_index;
        kernel.sensor_point = center.sensor;
        if (!center.normal_valid) {
            stage.kernels.push_back(std::move(kernel));
            continue;
        }
        kernel.neighbors = index.radius_neighbors_of(ki, gamma);

        NormalProblem problem;
        problem.kernel_normal = center.initial_normal;
        problem.mu = config.mu;
        problem.beta_init = config.l0.beta_init;
        problem.beta_scale = config.l0.beta_scale;
        problem.beta_max = config.l0.beta_max;
        problem.neighbor_normals.reserve(kernel.neighbors.size());
        for (int j : kernel.neighbors) {
            const auto& neighbor = stage.cloud[static_cast<std::size_t>(j)];
            if (neighbor.normal_valid) problem.neighbor_normals.push_back(neighbor.initial_normal);
        }
        kernel.tangent = make_tangent_frame(smooth_normal(problem), center.world);

        std::vector<Vec3> tangent_points;
        tangent_points.reserve(kernel.neighbors.size());
        for (int j : kernel.neighbors) {
            tangent_points.push_back(
                to_tangent(kernel.tangent, stage.cloud[static_cast<std::size_t>(j)].world));
        }
        const auto fit = fit_surface(tangent_points, gamma, config.fit);
        kernel.alpha = fit.alpha;
        kernel.fit_rms = fit.rms;
        kernel.valid = fit.ok;
        if (kernel.valid) ++stage.valid_kernel_count;
        stage.kernels.push_back(std::move(kernel));
    }
    stage.factors = build_factors(stage.kernels, stage.cloud);
    return stage;
}

double stacked_rms(const Stage& stage,
                   const std::vector<Pose>& poses,
                   const PipelineConfig& config)
{
    if (stage.factors.empty()) return 0.0;
    const bool plane_mode = config.residual_mode == ResidualMode::point2plane;
    double sum_sq = 0.0;
    for (const auto& f : stage.factors) {
        const auto& kernel = stage.kernels[static_cast<std::size_t>(f.kernel_id)];
        const auto eval = plane_mode
                              ? evaluate_point2plane(f, poses, kernel, config.solver.gauge_index)
                              : evaluate_residual(f, poses, kernel, config.solver.gauge_index);
        sum_sq += eval.sigma * eval.sigma;
    }
    return std::sqrt(sum_sq / static_cast<double>(stage.factors.size()));
}

// Projects every covered point onto the surface of its nearest valid kernel.
// Points outside every valid kernel's radius pass through unchanged.
std::vector<MapPoint> smooth_stage_cloud(const Stage& stage)
{
    std::vector<MapPoint> smoothed = stage.cloud;
    const std::size_t n = smoothed.size();
    std::vector<double> best_d2(n, std::numeric_limits<double>::infinity());
    std::vector<int> best_kernel(n, -1);
    for (int k = 0; k < static_cast<int>(stage.kernels.size()); ++k) {
        const auto& kernel = stage.kernels[static_cast<std::size_t>(k)];
        if (!kernel.valid) continue;
        const auto center = static_cast<std::size_t>(kernel.kernel_point_index);
        if (0.0 < best_d2[center]) {
            best_d2[center] = 0.0;
            best_kernel[center] = k;
        }
        for (int j : kernel.neighbors) {
            const auto idx = static_cast<std::size_t>(j);
            const double d2 = (stage.cloud[idx].world - kernel.tangent.origin).squaredNorm();
            if (d2 < best_d2[idx]) {
                best_d2[idx] = d2;
                best_kernel[idx] = k;
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (best_kernel[i] < 0) continue;
        const auto& kernel = stage.kernels[static_cast<std::size_t>(best_kernel[i])];
        const Vec3 s = to_tangent(kernel.tangent, stage.cloud[i].world);
        const double f = surface_eval(kernel.alpha, s.x(), s.y());
        smoothed[i].world = from_tangent(kernel.tangent, Vec3(s.x(), s.y(), f));
    }
    return smoothed;
}

void validate(const std::vector<Frame>& frames,
              const std::vector<Pose>& initial_poses,
              const PipelineConfig& config)
{
    if (frames.empty()) throw std::invalid_argument("run_pipeline: no frames");
    if (frames.size() != initial_poses.size()) {
        throw std::invalid_argument("run_pipeline: pose count does not match frame count");
    }
    if (static_cast<int>(frames.size()) > config.max_frames) {
        throw std::invalid_argument("run_pipeline: frame count exceeds max_frames");
    }
    if (!(config.gamma_init > 0.0)) {
        throw std::invalid_argument("run_pipeline: gamma_init must be positive");
    }
    if (config.schedule == Schedule::progressive && !(config.shrink_k > 1.0)) {
        throw std::invalid_argument(
            "run_pipeline: shrink_k must exceed 1 under the progressive schedule");
    }
    if (config.mu < 0.0) throw std::invalid_argument("run_pipeline: mu must be non-negative");
    if (!(config.t_conv > 0.0)) throw std::invalid_argument("run_pipeline: t_conv must be positive");
    if (config.max_outer_iters < 1) {
        throw std::invalid_argument("run_pipeline: max_outer_iters must be at least 1");
    }
}

}  // namespace

const char* stop_reason_name(StopReason reason)
{
    switch (reason) {
        case StopReason::converged: return "converged";
        case StopReason::gamma_floor: return "gamma_floor";
        case StopReason::max_iterations: return "max_iterations";
        case StopReason::no_factors: return "no_factors";
    }
    return "unknown";
}

double convergence_metric(const std::vector<FrameUpdate>& updates,
                          int gauge_index,
                          double rot_weight)
{
    double worst = 0.0;
    for (int i = 0; i < static_cast<int>(updates.size()); ++i) {
        if (i == gauge_index) continue;
        const auto& u = updates[static_cast<std::size_t>(i)];
        worst = std::max(worst, u.translation + rot_weight * u.rotation);
    }
    return worst;
}

PipelineReport run_pipeline(const std::vector<Frame>& frames,
                            const std::vector<Pose>& initial_poses,
                            const PipelineConfig& config,
                            const IterationLogger& logger)
{
    const auto t_start = Clock::now();
    validate(frames, initial_poses, config);

    PipelineReport report;
    report.final_poses = initial_poses;

    double gamma_min = config.gamma_min;
    if (!(gamma_min > 0.0)) {
        const auto cloud0 = build_world_cloud(frames, initial_poses);
        gamma_min = std::max(4.0 * median_nn_spacing(cloud0), 1e-6);
    }

    double gamma = config.gamma_init;
    // Once the ladder reaches the floor the loop keeps iterating at the last
    // admissible scale; refinement is only done when the pose updates settle,
    // not when the schedule runs out of scales.
    bool floor_reached = false;
    StopReason reason = StopReason::max_iterations;
    for (int iter = 0; iter < config.max_outer_iters; ++iter) {
        if (iter > 0 && config.schedule == Schedule::progressive) {
            const double next = gamma / config.shrink_k;
            if (next < gamma_min) {
                floor_reached = true;
            } else {
                gamma = next;
            }
        }

        const auto t_iter = Clock::now();
        Stage stage = build_stage(frames, report.final_poses, gamma, config);
        if (stage.factors.empty()) {
            if (iter == 0) {
                throw std::runtime_error(
                    "run_pipeline: no usable surface factors at the initial kernel radius "
                    "(scene too sparse for gamma_init)");
            }
            reason = StopReason::no_factors;
            break;
        }

        IterationRecord rec;
        rec.iteration = iter + 1;
        rec.gamma = gamma;
        rec.kernel_count = static_cast<int>(stage.kernels.size());
        rec.valid_kernel_count = stage.valid_kernel_count;
        rec.factor_count = static_cast<int>(stage.factors.size());
        rec.rms_before = stacked_rms(stage, report.final_poses, config);

        SolverOptions solver = config.solver;
        solver.mode = config.residual_mode;
        auto state = solve_poses(stage.factors, stage.kernels, report.final_poses, solver);
        report.final_poses = std::move(state.poses);
        rec.rms_after = state.residual_rms;
        rec.frozen_frames = std::move(state.frozen_frames);
        rec.max_update =
            convergence_metric(state.update_norms, solver.gauge_index, config.conv_rot_weight);
        rec.wall_time_s = seconds_since(t_iter);
        report.iterations.push_back(std::move(rec));
        if (logger) logger(report.iterations.back());

        if (report.iterations.back().max_update < config.t_conv) {
            reason = StopReason::converged;
            break;
        }
    }
    if (reason == StopReason::max_iterations && floor_reached) {
        reason = StopReason::gamma_floor;
    }

    report.stop_reason = reason;
    report.converged = reason == StopReason::converged;
    report.final_gamma = gamma;

    Stage final_stage = build_stage(frames, report.final_poses, gamma, config);
    report.smoothed_cloud = smooth_stage_cloud(final_stage);
    report.surfaces = std::move(final_stage.kernels);
    report.total_wall_time_s = seconds_since(t_start);
    return report;
}

}  // namespace pssba
