#pragma once

#include "pssba/cloud.hpp"
#include "pssba/normal_smoothing.hpp"
#include "pssba/pose_adjustment.hpp"
#include "pssba/surface_fitting.hpp"

#include <functional>
#include <string>
#include <vector>

namespace pssba {

enum class Schedule { progressive, fixed };

// Parameters of the L0 auxiliary-variable schedule, excluding mu which lives
// at the top level of PipelineConfig.
struct L0Schedule {
    double beta_init = 0.01;
    double beta_scale = 2.0;
    double beta_max = 1e4;
};

struct PipelineConfig {
    double gamma_init = 3.0;   // initial kernel radius in meters
    double shrink_k = 1.4;     // per-round kernel shrink factor (progressive)
    double mu = 0.05;          // L0 balance weight
    double t_conv = 0.01;      // convergence threshold on the pose-update metric
    int max_frames = 100;
    double gamma_min = 0.0;    // kernel radius floor; <= 0 selects 4x median point spacing
    int max_outer_iters = 15;
    double conv_rot_weight = 1.0;  // radians-to-meters weight in the update metric
    int pca_min_pts = 5;
    Schedule schedule = Schedule::progressive;
    ResidualMode residual_mode = ResidualMode::polynomial;
    L0Schedule l0;
    FitOptions fit;
    SolverOptions solver;
};

struct IterationRecord {
    int iteration = 0;  // 1-based
    double gamma = 0.0;
    int kernel_count = 0;
    int valid_kernel_count = 0;
    int factor_count = 0;
    double rms_before = 0.0;
    double rms_after = 0.0;
    double max_update = 0.0;  // convergence metric for this round
    double wall_time_s = 0.0;
    std::vector<int> frozen_frames;
};

enum class StopReason { converged, gamma_floor, max_iterations, no_factors };

const char* stop_reason_name(StopReason reason);

struct PipelineReport {
    std::vector<IterationRecord> iterations;
    std::vector<Pose> final_poses;
    std::vector<MapPoint> smoothed_cloud;     // world positions projected onto surfaces
    std::vector<SmoothingKernel> surfaces;    // final-scale kernels (export the valid ones)
    double final_gamma = 0.0;
    StopReason stop_reason = StopReason::max_iterations;
    bool converged = false;
    double total_wall_time_s = 0.0;
};

// Max over non-gauge frames of |dt| + rot_weight * |dtheta|.
double convergence_metric(const std::vector<FrameUpdate>& updates,
                          int gauge_index = 0,
                          double rot_weight = 1.0);

using IterationLogger = std::function<void(const IterationRecord&)>;

// Coarse-to-fine surface smoothing and pose adjustment. Each round rebuilds
// the world cloud from raw frames and current poses, samples kernels at the
// current radius, estimates and L0-smooths kernel normals, fits a quadratic
// surface per kernel, and solves for all poses with frame 0 fixed. The radius
// shrinks by shrink_k between rounds (progressive schedule); once another
// shrink would cross gamma_min the loop keeps iterating at the last
// admissible radius. It stops when the pose update falls below t_conv or
// max_outer_iters is exhausted; stop_reason is gamma_floor when the run ends
// unconverged after bottoming out the schedule. A final pass at the last
// radius produces the smoothed cloud and exported surfaces.
PipelineReport run_pipeline(const std::vector<Frame>& frames,
                            const std::vector<Pose>& initial_poses,
                            const PipelineConfig& config,
                            const IterationLogger& logger = {});

}  // namespace pssba
