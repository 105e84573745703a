#include "pssba/simbench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace pssba {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRayEps = 1e-9;

bool in_range(double t, double max_range)
{
    return t > kRayEps && t <= max_range;
}

// Smallest acceptable root of A t^2 + B t + C = 0 within (0, max_range].
template <typename Accept>
std::optional<double> first_quadratic_root(double A, double B, double C,
                                           double max_range, Accept accept)
{
    double roots[2];
    int count = 0;
    if (std::abs(A) < 1e-15) {
        if (std::abs(B) < 1e-15) return std::nullopt;
        roots[count++] = -C / B;
    } else {
        const double disc = B * B - 4.0 * A * C;
        if (disc < 0.0) return std::nullopt;
        const double sq = std::sqrt(disc);
        roots[count++] = (-B - sq) / (2.0 * A);
        roots[count++] = (-B + sq) / (2.0 * A);
        if (roots[0] > roots[1]) std::swap(roots[0], roots[1]);
    }
    for (int i = 0; i < count; ++i) {
        if (in_range(roots[i], max_range) && accept(roots[i])) return roots[i];
    }
    return std::nullopt;
}

std::optional<double> raycast_impl(const PlanePatch& patch, const Vec3& o,
                                    const Vec3& d, double max_range)
{
    const Vec3 n = patch.normal.normalized();
    const double denom = d.dot(n);
    if (std::abs(denom) < 1e-15) return std::nullopt;
    const double t = (patch.center - o).dot(n) / denom;
    if (!in_range(t, max_range)) return std::nullopt;
    const auto basis = normal_tangent_basis(n);
    const Vec3 rel = o + t * d - patch.center;
    if (std::abs(rel.dot(basis.col(0))) > patch.half_u) return std::nullopt;
    if (std::abs(rel.dot(basis.col(1))) > patch.half_v) return std::nullopt;
    return t;
}

std::optional<double> raycast_impl(const SpherePatch& patch, const Vec3& o,
                                     const Vec3& d, double max_range)
{
    const Vec3 w = o - patch.center;
    return first_quadratic_root(1.0, 2.0 * w.dot(d),
                                w.squaredNorm() - patch.radius * patch.radius,
                                max_range, [](double) { return true; });
}

std::optional<double> raycast_impl(const CylinderPatch& patch, const Vec3& o,
                                       const Vec3& d, double max_range)
{
    const Vec3 a = patch.axis.normalized();
    const Vec3 w = o - patch.center;
    const Vec3 w_perp = w - w.dot(a) * a;
    const Vec3 d_perp = d - d.dot(a) * a;
    return first_quadratic_root(
        d_perp.squaredNorm(), 2.0 * w_perp.dot(d_perp),
        w_perp.squaredNorm() - patch.radius * patch.radius, max_range,
        [&](double t) { return std::abs((o + t * d - patch.center).dot(a)) <= patch.half_length; });
}

std::optional<double> raycast_impl(const ParaboloidPatch& patch, const Vec3& o,
                                         const Vec3& d, double max_range)
{
    const Vec3 rel = o - patch.center;
    const double A = patch.a * d.x() * d.x() + patch.b * d.y() * d.y();
    const double B = 2.0 * (patch.a * rel.x() * d.x() + patch.b * rel.y() * d.y()) - d.z();
    const double C = patch.a * rel.x() * rel.x() + patch.b * rel.y() * rel.y() - rel.z();
    return first_quadratic_root(A, B, C, max_range, [&](double t) {
        const Vec3 p = rel + t * d;
        return p.x() * p.x() + p.y() * p.y() <= patch.r_max * patch.r_max;
    });
}

bool clip_ray_to_box(const Vec3& o, const Vec3& d, const Vec3& bmin, const Vec3& bmax,
                     double& t0, double& t1)
{
    for (int k = 0; k < 3; ++k) {
        if (std::abs(d[k]) < 1e-15) {
            if (o[k] < bmin[k] || o[k] > bmax[k]) return false;
            continue;
        }
        double ta = (bmin[k] - o[k]) / d[k];
        double tb = (bmax[k] - o[k]) / d[k];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

double sine_height(const SinePatch& patch, double x, double y)
{
    return patch.center.z() +
           patch.amplitude * std::sin(patch.freq_x * (x - patch.center.x())) *
               std::sin(patch.freq_y * (y - patch.center.y()));
}

std::optional<double> raycast_impl(const SinePatch& patch, const Vec3& o,
                                   const Vec3& d, double max_range)
{
    const Vec3 bmin(patch.center.x() - patch.half_x, patch.center.y() - patch.half_y,
                    patch.center.z() - patch.amplitude);
    const Vec3 bmax(patch.center.x() + patch.half_x, patch.center.y() + patch.half_y,
                    patch.center.z() + patch.amplitude);
    double t0 = kRayEps;
    double t1 = max_range;
    if (!clip_ray_to_box(o, d, bmin, bmax, t0, t1) || t0 > t1) return std::nullopt;

    auto height_gap = [&](double t) {
        const Vec3 p = o + t * d;
        return p.z() - sine_height(patch, p.x(), p.y());
    };

    // March for a sign change, then bisect. The surface slope is bounded by
    // amplitude * max frequency, so a small fixed step cannot skip a crossing
    // unless the ray grazes tangentially.
    const double step = 0.02;
    double prev_t = t0;
    double prev_f = height_gap(prev_t);
    for (double t = t0 + step; prev_t < t1; t += step) {
        const double tc = std::min(t, t1);
        const double fc = height_gap(tc);
        if ((prev_f <= 0.0) != (fc <= 0.0)) {
            double lo = prev_t;
            double hi = tc;
            double flo = prev_f;
            for (int i = 0; i < 60; ++i) {
                const double mid = 0.5 * (lo + hi);
                const double fm = height_gap(mid);
                if ((flo <= 0.0) != (fm <= 0.0)) {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            return 0.5 * (lo + hi);
        }
        prev_t = tc;
        prev_f = fc;
    }
    return std::nullopt;
}

}  // namespace

std::optional<double> raycast(const SurfacePatch& patch, const Vec3& origin,
                              const Vec3& dir, double max_range)
{
    return std::visit(
        [&](const auto& p) { return raycast_impl(p, origin, dir, max_range); }, patch);
}

std::optional<SceneHit> raycast(const Scene& scene, const Vec3& origin,
                                const Vec3& dir, double max_range)
{
    std::optional<SceneHit> best;
    for (int i = 0; i < static_cast<int>(scene.patches.size()); ++i) {
        const auto t = raycast(scene.patches[static_cast<std::size_t>(i)], origin, dir, max_range);
        if (t && (!best || *t < best->range)) best = SceneHit{*t, i};
    }
    return best;
}

double membership_residual(const SurfacePatch& patch, const Vec3& p)
{
    struct Visitor {
        const Vec3& p;
        double operator()(const PlanePatch& s) const
        {
            return std::abs((p - s.center).dot(s.normal.normalized()));
        }
        double operator()(const SpherePatch& s) const
        {
            return std::abs((p - s.center).norm() - s.radius);
        }
        double operator()(const CylinderPatch& s) const
        {
            const Vec3 a = s.axis.normalized();
            const Vec3 w = p - s.center;
            return std::abs((w - w.dot(a) * a).norm() - s.radius);
        }
        double operator()(const ParaboloidPatch& s) const
        {
            const Vec3 rel = p - s.center;
            return std::abs(rel.z() - s.a * rel.x() * rel.x() - s.b * rel.y() * rel.y());
        }
        double operator()(const SinePatch& s) const
        {
            return std::abs(p.z() - sine_height(s, p.x(), p.y()));
        }
    };
    return std::visit(Visitor{p}, patch);
}

Vec3 patch_normal(const SurfacePatch& patch, const Vec3& p)
{
    struct Visitor {
        const Vec3& p;
        Vec3 operator()(const PlanePatch& s) const { return s.normal.normalized(); }
        Vec3 operator()(const SpherePatch& s) const { return (p - s.center).normalized(); }
        Vec3 operator()(const CylinderPatch& s) const
        {
            const Vec3 a = s.axis.normalized();
            const Vec3 w = p - s.center;
            return (w - w.dot(a) * a).normalized();
        }
        Vec3 operator()(const ParaboloidPatch& s) const
        {
            const Vec3 rel = p - s.center;
            return Vec3(-2.0 * s.a * rel.x(), -2.0 * s.b * rel.y(), 1.0).normalized();
        }
        Vec3 operator()(const SinePatch& s) const
        {
            const double dx = s.amplitude * s.freq_x *
                              std::cos(s.freq_x * (p.x() - s.center.x())) *
                              std::sin(s.freq_y * (p.y() - s.center.y()));
            const double dy = s.amplitude * s.freq_y *
                              std::sin(s.freq_x * (p.x() - s.center.x())) *
                              std::cos(s.freq_y * (p.y() - s.center.y()));
            return Vec3(-dx, -dy, 1.0).normalized();
        }
    };
    return std::visit(Visitor{p}, patch);
}

std::vector<Frame> generate_frames(const Scene& scene,
                                   const std::vector<Pose>& trajectory,
                                   const ScanConfig& config)
{
    if (trajectory.empty()) {
        throw std::invalid_argument("generate_frames: trajectory is empty");
    }
    if (config.points_per_frame < 0 || !(config.max_range > 0.0) || !(config.fov_deg > 0.0)) {
        throw std::invalid_argument("generate_frames: invalid scan configuration");
    }

    const double cos_half_fov = std::cos(0.5 * std::min(config.fov_deg, 360.0) * kPi / 180.0);
    std::vector<Frame> frames;
    frames.reserve(trajectory.size());
    for (std::size_t k = 0; k < trajectory.size(); ++k) {
        Frame frame;
        frame.frame_index = static_cast<int>(k);
        frame.timestamp = 0.1 * static_cast<double>(k);
        frame.points.reserve(static_cast<std::size_t>(config.points_per_frame));

        std::mt19937_64 rng(config.seed + 0x9E3779B97F4A7C15ULL * (k + 1));
        // Separate stream for range noise so enabling it leaves the sampled
        // ray directions untouched.
        std::mt19937_64 noise_rng(config.seed ^ (0xBF58476D1CE4E5B9ULL * (k + 1)));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::normal_distribution<double> range_noise(0.0, 1.0);

        const auto& pose = trajectory[k];
        for (int ray = 0; ray < config.points_per_frame; ++ray) {
            const double cos_theta = cos_half_fov + (1.0 - cos_half_fov) * u01(rng);
            const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
            const double phi = 2.0 * kPi * u01(rng);
            const Vec3 d_sensor(cos_theta, sin_theta * std::cos(phi), sin_theta * std::sin(phi));
            const auto hit = raycast(scene, pose.t, pose.R * d_sensor, config.max_range);
            if (!hit) continue;
            double range = hit->range;
            if (config.range_noise_sigma > 0.0) {
                range += config.range_noise_sigma * range_noise(noise_rng);
            }
            if (range <= 0.0) continue;
            frame.points.push_back(d_sensor * range);
        }
        frames.push_back(std::move(frame));
    }
    return frames;
}

std::vector<Pose> perturb_poses(const std::vector<Pose>& poses, const NoiseSpec& spec)
{
    if (spec.trans_sigma < 0.0 || spec.rot_sigma_deg < 0.0) {
        throw std::invalid_argument("perturb_poses: sigmas must be non-negative");
    }
    std::vector<Pose> out = poses;
    if (poses.size() <= 1) return out;

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> norm01(0.0, 1.0);
    const double rot_sigma = spec.rot_sigma_deg * kPi / 180.0;

    Vec3 acc_t = Vec3::Zero();
    Mat3 acc_R = Mat3::Identity();
    for (std::size_t i = 1; i < poses.size(); ++i) {
        const Vec3 dt(spec.trans_sigma * norm01(rng), spec.trans_sigma * norm01(rng),
                      spec.trans_sigma * norm01(rng));
        Vec3 axis;
        do {
            axis = Vec3(norm01(rng), norm01(rng), norm01(rng));
        } while (axis.norm() < 1e-9);
        axis.normalize();
        const double angle = rot_sigma * norm01(rng);
        if (spec.mode == NoiseMode::independent) {
            out[i].t += dt;
            out[i].R = exp_map(angle * axis) * out[i].R;
        } else {
            acc_t += dt;
            acc_R = exp_map(angle * axis) * acc_R;
            out[i].t += acc_t;
            out[i].R = acc_R * out[i].R;
        }
    }
    return out;
}

ApeStats ape(const std::vector<Pose>& estimated, const std::vector<Pose>& truth)
{
    if (estimated.size() != truth.size()) {
        throw std::invalid_argument("ape: trajectory lengths differ");
    }
    ApeStats stats;
    if (estimated.size() <= 1) return stats;
    double sum_sq = 0.0;
    double sum = 0.0;
    // Frame 0 is the shared gauge with zero error by construction; statistics
    // cover the remaining frames.
    const std::size_t count = estimated.size() - 1;
    for (std::size_t i = 1; i < estimated.size(); ++i) {
        const double err = (estimated[i].t - truth[i].t).norm();
        sum_sq += err * err;
        sum += err;
        stats.max = std::max(stats.max, err);
    }
    stats.rmse = std::sqrt(sum_sq / static_cast<double>(count));
    stats.mean = sum / static_cast<double>(count);
    return stats;
}

std::size_t occupancy_count(const std::vector<MapPoint>& cloud, double voxel_m)
{
    if (!(voxel_m > 0.0)) {
        throw std::invalid_argument("occupancy_count: voxel size must be positive");
    }
    constexpr std::int64_t kOffset = std::int64_t{1} << 20;
    constexpr std::int64_t kSpan = std::int64_t{1} << 21;
    std::unordered_set<std::uint64_t> occupied;
    occupied.reserve(cloud.size());
    for (const auto& point : cloud) {
        std::uint64_t key = 0;
        for (int k = 0; k < 3; ++k) {
            const auto cell =
                static_cast<std::int64_t>(std::floor(point.world[k] / voxel_m)) + kOffset;
            if (cell < 0 || cell >= kSpan) {
                throw std::out_of_range("occupancy_count: point outside supported range");
            }
            key = (key << 21) | static_cast<std::uint64_t>(cell);
        }
        occupied.insert(key);
    }
    return occupied.size();
}

Scene read_scene(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open scene file");

    Scene scene;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string type;
        if (!(ss >> type)) continue;

        auto fail = [&](const std::string& msg) {
            return std::runtime_error(path + ":" + std::to_string(line_no) + ": " + msg);
        };
        auto numbers = [&](int count) {
            std::vector<double> v(static_cast<std::size_t>(count));
            for (auto& x : v) {
                if (!(ss >> x)) {
                    throw fail("expected " + std::to_string(count) +
                               " numeric parameters after '" + type + "'");
                }
            }
            double extra;
            if (ss >> extra) throw fail("too many parameters for '" + type + "'");
            return v;
        };

        if (type == "plane") {
            const auto v = numbers(8);
            PlanePatch p{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, v[6], v[7]};
            if (p.normal.norm() < 1e-9) throw fail("plane normal must be non-zero");
            if (p.half_u <= 0.0 || p.half_v <= 0.0) throw fail("plane extents must be positive");
            p.normal.normalize();
            scene.patches.emplace_back(p);
        } else if (type == "sphere") {
            const auto v = numbers(4);
            SpherePatch p{{v[0], v[1], v[2]}, v[3]};
            if (p.radius <= 0.0) throw fail("sphere radius must be positive");
            scene.patches.emplace_back(p);
        } else if (type == "cylinder") {
            const auto v = numbers(8);
            CylinderPatch p{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, v[6], v[7]};
            if (p.axis.norm() < 1e-9) throw fail("cylinder axis must be non-zero");
            if (p.radius <= 0.0 || p.half_length <= 0.0) {
                throw fail("cylinder radius and half length must be positive");
            }
            p.axis.normalize();
            scene.patches.emplace_back(p);
        } else if (type == "paraboloid") {
            const auto v = numbers(6);
            ParaboloidPatch p{{v[0], v[1], v[2]}, v[3], v[4], v[5]};
            if (p.r_max <= 0.0) throw fail("paraboloid extent must be positive");
            scene.patches.emplace_back(p);
        } else if (type == "sine") {
            const auto v = numbers(8);
            SinePatch p{{v[0], v[1], v[2]}, v[3], v[4], v[5], v[6], v[7]};
            if (p.amplitude <= 0.0) throw fail("sine amplitude must be positive");
            if (p.half_x <= 0.0 || p.half_y <= 0.0) throw fail("sine extents must be positive");
            scene.patches.emplace_back(p);
        } else {
            throw fail("unknown patch type '" + type + "'");
        }
    }
    return scene;
}

}  // namespace pssba
