#pragma once

#include "pssba/cloud.hpp"
#include "pssba/geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace pssba {

// Analytic surface patches. All are closed-form: exact ray intersections
// (the sine sheet via bracketing plus bisection), exact membership residuals,
// and exact normals, so generated scans can be checked against ground truth.

struct PlanePatch {
    Vec3 center = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();   // unit
    double half_u = 1.0;           // extent along the plane's first tangent axis
    double half_v = 1.0;
};

struct SpherePatch {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;
};

struct CylinderPatch {
    Vec3 center = Vec3::Zero();
    Vec3 axis = Vec3::UnitX();     // unit
    double radius = 1.0;
    double half_length = 1.0;      // lateral surface only, no end caps
};

// z = center.z + a (x - center.x)^2 + b (y - center.y)^2, axis-aligned bowl.
struct ParaboloidPatch {
    Vec3 center = Vec3::Zero();    // apex
    double a = 0.1;
    double b = 0.1;
    double r_max = 5.0;            // radial extent around the apex
};

// z = center.z + amplitude sin(freq_x (x - center.x)) sin(freq_y (y - center.y)).
struct SinePatch {
    Vec3 center = Vec3::Zero();
    double amplitude = 1.0;
    double freq_x = 1.0;
    double freq_y = 1.0;
    double half_x = 5.0;
    double half_y = 5.0;
};

using SurfacePatch =
    std::variant<PlanePatch, SpherePatch, CylinderPatch, ParaboloidPatch, SinePatch>;

struct Scene {
    std::vector<SurfacePatch> patches;
};

// Distance of the first intersection of ray origin + t * dir (dir unit) with
// the patch, within (0, max_range]. Empty when the ray misses.
std::optional<double> raycast(const SurfacePatch& patch,
                              const Vec3& origin,
                              const Vec3& dir,
                              double max_range);

struct SceneHit {
    double range = 0.0;
    int patch_index = -1;
};

// Nearest hit across all patches.
std::optional<SceneHit> raycast(const Scene& scene,
                                const Vec3& origin,
                                const Vec3& dir,
                                double max_range);

// How far p sits from the patch's surface equation, ignoring extents. Zero
// exactly on the surface.
double membership_residual(const SurfacePatch& patch, const Vec3& p);

// Outward analytic normal at a point on (or near) the patch surface.
Vec3 patch_normal(const SurfacePatch& patch, const Vec3& p);

struct ScanConfig {
    int points_per_frame = 1000;   // rays cast per pose; misses yield fewer points
    double fov_deg = 360.0;        // full cone angle about the sensor +x axis
    double max_range = 50.0;
    double range_noise_sigma = 0.0;  // per-point range noise in meters
    std::uint64_t seed = 0;
};

// Simulated scan per trajectory pose: random directions inside the field of
// view, nearest analytic hit recorded in sensor coordinates. Timestamps run
// at 10 Hz. Deterministic for a fixed seed; each frame draws from its own
// seeded stream.
std::vector<Frame> generate_frames(const Scene& scene,
                                   const std::vector<Pose>& trajectory,
                                   const ScanConfig& config);

enum class NoiseMode { independent, random_walk };

struct NoiseSpec {
    double trans_sigma = 0.2;      // per-axis translation std dev, meters
    double rot_sigma_deg = 1.0;    // rotation angle std dev, degrees
    NoiseMode mode = NoiseMode::independent;
    std::uint64_t seed = 0;
};

// Gaussian pose noise: per-axis translation offsets and uniform-axis /
// Gaussian-angle rotation offsets, left-applied. Frame 0 stays untouched so
// the gauge matches the solver's. random_walk accumulates the increments.
std::vector<Pose> perturb_poses(const std::vector<Pose>& poses, const NoiseSpec& spec);

struct ApeStats {
    double rmse = 0.0;
    double mean = 0.0;
    double max = 0.0;
};

// Per-frame translation error statistics, no alignment step. Both
// trajectories share frame 0 as gauge, so frame 0 carries no information and
// the statistics cover frames 1..n-1.
ApeStats ape(const std::vector<Pose>& estimated, const std::vector<Pose>& truth);

// Number of distinct voxel_m-sized axis-aligned voxels occupied by the cloud,
// grid anchored at the origin with floor binning.
std::size_t occupancy_count(const std::vector<MapPoint>& cloud, double voxel_m);

// Line-oriented scene file: one patch per line, `#` comments. Formats:
//   plane cx cy cz nx ny nz half_u half_v
//   sphere cx cy cz radius
//   cylinder cx cy cz ax ay az radius half_length
//   paraboloid cx cy cz a b r_max
//   sine cx cy cz amplitude freq_x freq_y half_x half_y
// Malformed lines raise with the file name and line number.
Scene read_scene(const std::string& path);

}  // namespace pssba
