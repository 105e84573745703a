#pragma once

#include "pssba/cloud.hpp"
#include "pssba/geometry.hpp"
#include "pssba/pose_adjustment.hpp"
#include "pssba/surface_fitting.hpp"

#include <Eigen/Geometry>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace support {

using namespace pssba;

inline Vec3 random_unit(std::mt19937_64& rng)
{
    std::normal_distribution<double> n01(0.0, 1.0);
    Vec3 v;
    do {
        v = Vec3(n01(rng), n01(rng), n01(rng));
    } while (v.norm() < 1e-6);
    return v.normalized();
}

inline Vec3 random_vec(std::mt19937_64& rng, double scale)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    return {u(rng), u(rng), u(rng)};
}

inline Mat3 random_rotation(std::mt19937_64& rng, double max_angle = 3.0)
{
    std::uniform_real_distribution<double> u(0.0, max_angle);
    return exp_map(u(rng) * random_unit(rng));
}

inline Pose random_pose(std::mt19937_64& rng, double t_scale = 2.0)
{
    return {random_rotation(rng), random_vec(rng, t_scale)};
}

// Rotates n by a Gaussian angle about a random axis orthogonal to n.
inline Vec3 noisy_normal(std::mt19937_64& rng, const Vec3& n, double sigma_rad)
{
    std::normal_distribution<double> n01(0.0, 1.0);
    const auto basis = normal_tangent_basis(n);
    std::uniform_real_distribution<double> u(0.0, 2.0 * 3.14159265358979323846);
    const double dir = u(rng);
    const Vec3 axis = std::cos(dir) * basis.col(0) + std::sin(dir) * basis.col(1);
    return exp_map(sigma_rad * n01(rng) * axis) * n;
}

inline double angle_between(const Vec3& a, const Vec3& b)
{
    return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0));
}

// Independent rotation-exponential oracle via Eigen's angle-axis machinery.
inline Mat3 quaternion_exp_oracle(const Vec3& v)
{
    const double theta = v.norm();
    if (theta < 1e-300) return Mat3::Identity();
    return Eigen::AngleAxisd(theta, v / theta).toRotationMatrix();
}

// Brute-force matrix power series. 30 terms pushes the truncation error below
// 1e-15 for |v| <= pi, far inside any comparison tolerance used here.
inline Mat3 series_exp_oracle(const Vec3& v)
{
    const Mat3 S = skew(v);
    Mat3 term = Mat3::Identity();
    Mat3 sum = Mat3::Identity();
    for (int k = 1; k <= 30; ++k) {
        term = (term * S) / static_cast<double>(k);
        sum += term;
    }
    return sum;
}

// O(n) reference for radius queries (closed ball).
inline std::vector<int> brute_force_radius(const std::vector<MapPoint>& cloud,
                                           const Vec3& center,
                                           double r,
                                           int exclude = -1)
{
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
        if (i == exclude) continue;
        if ((cloud[static_cast<std::size_t>(i)].world - center).norm() <= r) out.push_back(i);
    }
    return out;
}

// A pose-adjustment problem whose points lie exactly on the kernel surfaces,
// so the ground-truth poses are a zero-residual optimum.
struct SyntheticProblem {
    std::vector<Pose> poses;
    std::vector<SmoothingKernel> kernels;
    std::vector<SurfaceFactor> factors;
};

inline SyntheticProblem make_surface_problem(std::mt19937_64& rng,
                                             int n_frames,
                                             int n_kernels,
                                             int points_per_kernel,
                                             double alpha_scale = 0.3)
{
    SyntheticProblem problem;
    for (int f = 0; f < n_frames; ++f) problem.poses.push_back(random_pose(rng, 3.0));

    std::uniform_real_distribution<double> coeff(-alpha_scale, alpha_scale);
    std::uniform_real_distribution<double> xy(-1.0, 1.0);
    std::uniform_int_distribution<int> frame_pick(0, n_frames - 1);

    int next_point = n_kernels;  // kernel centers take ids 0..n_kernels-1
    for (int k = 0; k < n_kernels; ++k) {
        SmoothingKernel kernel;
        kernel.kernel_point_index = k;
        kernel.frame_index = k % n_frames;
        kernel.valid = true;

        const Vec3 origin = random_vec(rng, 5.0);
        kernel.tangent = make_tangent_frame(random_unit(rng), origin);
        for (int i = 0; i < 5; ++i) kernel.alpha[i] = coeff(rng);

        const auto& owner = problem.poses[static_cast<std::size_t>(kernel.frame_index)];
        kernel.sensor_point = owner.inverse().R * origin + owner.inverse().t;

        for (int p = 0; p < points_per_kernel; ++p) {
            const double x = xy(rng);
            const double y = xy(rng);
            const Vec3 world =
                from_tangent(kernel.tangent, Vec3(x, y, surface_eval(kernel.alpha, x, y)));
            const int frame_j = frame_pick(rng);
            const auto inv = problem.poses[static_cast<std::size_t>(frame_j)].inverse();
            SurfaceFactor factor;
            factor.kernel_id = k;
            factor.point_index = next_point++;
            factor.frame_i = kernel.frame_index;
            factor.frame_j = frame_j;
            factor.point_sensor = inv.R * world + inv.t;
            problem.factors.push_back(factor);
            kernel.neighbors.push_back(factor.point_index);
        }
        problem.kernels.push_back(std::move(kernel));
    }
    return problem;
}

inline double max_translation_gap(const std::vector<Pose>& a, const std::vector<Pose>& b)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, (a[i].t - b[i].t).norm());
    }
    return worst;
}

// Unique scratch file that removes itself.
class TempFile {
public:
    explicit TempFile(const std::string& stem)
    {
        static std::atomic<int> counter{0};
        path_ = (std::filesystem::temp_directory_path() /
                 (stem + "_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++) + ".txt"))
                    .string();
    }
    ~TempFile()
    {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;

    const std::string& path() const { return path_; }
    void write(const std::string& content) const
    {
        std::ofstream out(path_);
        out << content;
    }
    std::string read() const
    {
        std::ifstream in(path_);
        return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }

private:
    std::string path_;
};

}  // namespace support
