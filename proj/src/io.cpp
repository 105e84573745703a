#include "pssba/io.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pssba {
namespace {

std::runtime_error line_error(const std::string& path, int line_no, const std::string& msg)
{
    return std::runtime_error(path + ":" + std::to_string(line_no) + ": " + msg);
}

std::ifstream open_input(const std::string& path, const char* what)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open " + what);
    return in;
}

std::ofstream open_output(const std::string& path, const char* what)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot write " + what);
    return out;
}

// Strips `#` comments; returns false for blank lines.
bool payload_of(std::string& line)
{
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    return line.find_first_not_of(" \t\r\n") != std::string::npos;
}

// Shortest decimal form that parses back to the same double.
std::string format_double(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::vector<TrajectoryRecord> read_trajectory(const std::string& path)
{
    auto in = open_input(path, "trajectory file");
    std::vector<TrajectoryRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!payload_of(line)) continue;
        std::istringstream ss(line);
        double ts, tx, ty, tz, qx, qy, qz, qw;
        if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
            throw line_error(path, line_no,
                             "expected `timestamp tx ty tz qx qy qz qw`");
        }
        double extra;
        if (ss >> extra) throw line_error(path, line_no, "trailing fields after quaternion");

        Eigen::Quaterniond q(qw, qx, qy, qz);
        if (std::abs(q.norm() - 1.0) > 1e-6) {
            throw line_error(path, line_no, "quaternion is not unit length");
        }
        if (!records.empty() && !(ts > records.back().timestamp)) {
            throw line_error(path, line_no, "timestamps must be strictly increasing");
        }
        q.normalize();
        TrajectoryRecord rec;
        rec.timestamp = ts;
        rec.pose.R = q.toRotationMatrix();
        rec.pose.t = Vec3(tx, ty, tz);
        records.push_back(rec);
    }
    return records;
}

void write_trajectory(const std::string& path, const std::vector<TrajectoryRecord>& records)
{
    auto out = open_output(path, "trajectory file");
    out << "# timestamp tx ty tz qx qy qz qw\n";
    char buf[320];
    for (const auto& rec : records) {
        Eigen::Quaterniond q(rec.pose.R);
        q.normalize();
        if (q.w() < 0.0) q.coeffs() = -q.coeffs();
        std::snprintf(buf, sizeof(buf),
                      "%.9f %.12f %.12f %.12f %.12f %.12f %.12f %.12f\n",
                      rec.timestamp, rec.pose.t.x(), rec.pose.t.y(), rec.pose.t.z(),
                      q.x(), q.y(), q.z(), q.w());
        out << buf;
    }
}

std::vector<Pose> poses_of(const std::vector<TrajectoryRecord>& records)
{
    std::vector<Pose> poses;
    poses.reserve(records.size());
    for (const auto& rec : records) poses.push_back(rec.pose);
    return poses;
}

std::vector<TrajectoryRecord> timestamped(const std::vector<Pose>& poses)
{
    std::vector<TrajectoryRecord> records;
    records.reserve(poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i) {
        records.push_back({0.1 * static_cast<double>(i), poses[i]});
    }
    return records;
}

void write_cloud(const std::string& path, const std::vector<MapPoint>& cloud)
{
    auto out = open_output(path, "cloud file");
    out << "x y z frame\n";
    char buf[160];
    for (const auto& point : cloud) {
        std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %d\n", point.world.x(),
                      point.world.y(), point.world.z(), point.frame_index);
        out << buf;
    }
}

std::vector<MapPoint> read_cloud(const std::string& path)
{
    auto in = open_input(path, "cloud file");
    std::vector<MapPoint> cloud;
    std::string line;
    int line_no = 0;
    bool have_header = false;
    bool has_frame_column = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!payload_of(line)) continue;
        std::istringstream ss(line);
        if (!have_header) {
            std::string c0, c1, c2, c3, extra;
            ss >> c0 >> c1 >> c2;
            if (c0 != "x" || c1 != "y" || c2 != "z") {
                throw line_error(path, line_no, "expected header `x y z frame` or `x y z`");
            }
            if (ss >> c3) {
                if (c3 != "frame" || (ss >> extra)) {
                    throw line_error(path, line_no, "expected header `x y z frame` or `x y z`");
                }
                has_frame_column = true;
            }
            have_header = true;
            continue;
        }
        MapPoint point;
        if (!(ss >> point.world.x() >> point.world.y() >> point.world.z())) {
            throw line_error(path, line_no, "expected 3 coordinates");
        }
        if (has_frame_column) {
            if (!(ss >> point.frame_index)) {
                throw line_error(path, line_no, "expected a frame index column");
            }
            if (point.frame_index < 0) {
                throw line_error(path, line_no, "frame index must be non-negative");
            }
        }
        double extra;
        if (ss >> extra) throw line_error(path, line_no, "row has more columns than the header");
        point.sensor = point.world;
        cloud.push_back(point);
    }
    if (!have_header && line_no > 0) {
        throw line_error(path, 1, "missing header line");
    }
    return cloud;
}

void write_frames(const std::string& path, const std::vector<Frame>& frames)
{
    auto out = open_output(path, "frames file");
    out << "x y z frame\n";
    char buf[160];
    for (const auto& frame : frames) {
        for (const auto& p : frame.points) {
            std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %d\n", p.x(), p.y(), p.z(),
                          frame.frame_index);
            out << buf;
        }
    }
}

std::vector<Frame> read_frames(const std::string& path)
{
    const auto rows = read_cloud(path);
    int max_index = -1;
    for (const auto& row : rows) max_index = std::max(max_index, row.frame_index);

    std::vector<Frame> frames(static_cast<std::size_t>(max_index + 1));
    for (int k = 0; k <= max_index; ++k) {
        frames[static_cast<std::size_t>(k)].frame_index = k;
        frames[static_cast<std::size_t>(k)].timestamp = 0.1 * static_cast<double>(k);
    }
    for (const auto& row : rows) {
        frames[static_cast<std::size_t>(row.frame_index)].points.push_back(row.world);
    }
    return frames;
}

PipelineConfig read_config(const std::string& path)
{
    auto in = open_input(path, "config file");
    PipelineConfig config;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!payload_of(line)) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw line_error(path, line_no, "expected `key = value`");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r\n");
            const auto e = s.find_last_not_of(" \t\r\n");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw line_error(path, line_no, "expected `key = value`");
        }

        auto bad_value = [&](const char* why) {
            return line_error(path, line_no, "bad value for `" + key + "`: " + why);
        };
        auto as_double = [&]() {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(value, &used);
            } catch (const std::exception&) {
                throw bad_value("not a number");
            }
            if (used != value.size()) throw bad_value("not a number");
            return v;
        };
        auto as_int = [&]() {
            std::size_t used = 0;
            int v = 0;
            try {
                v = std::stoi(value, &used);
            } catch (const std::exception&) {
                throw bad_value("not an integer");
            }
            if (used != value.size()) throw bad_value("not an integer");
            return v;
        };

        if (key == "gamma_init") {
            config.gamma_init = as_double();
            if (!(config.gamma_init > 0.0)) throw bad_value("must be positive");
        } else if (key == "shrink_k") {
            config.shrink_k = as_double();
        } else if (key == "mu") {
            config.mu = as_double();
            if (config.mu < 0.0) throw bad_value("must be non-negative");
        } else if (key == "t_conv") {
            config.t_conv = as_double();
            if (!(config.t_conv > 0.0)) throw bad_value("must be positive");
        } else if (key == "max_frames") {
            config.max_frames = as_int();
            if (config.max_frames < 1) throw bad_value("must be at least 1");
        } else if (key == "gamma_min") {
            config.gamma_min = as_double();
        } else if (key == "max_outer_iters") {
            config.max_outer_iters = as_int();
            if (config.max_outer_iters < 1) throw bad_value("must be at least 1");
        } else if (key == "conv_rot_weight") {
            config.conv_rot_weight = as_double();
            if (config.conv_rot_weight < 0.0) throw bad_value("must be non-negative");
        } else if (key == "pca_min_pts") {
            config.pca_min_pts = as_int();
            if (config.pca_min_pts < 3) throw bad_value("must be at least 3");
        } else if (key == "schedule") {
            if (value == "progressive") {
                config.schedule = Schedule::progressive;
            } else if (value == "fixed") {
                config.schedule = Schedule::fixed;
            } else {
                throw bad_value("expected `progressive` or `fixed`");
            }
        } else if (key == "residual_mode") {
            if (value == "polynomial") {
                config.residual_mode = ResidualMode::polynomial;
            } else if (value == "point2plane") {
                config.residual_mode = ResidualMode::point2plane;
            } else {
                throw bad_value("expected `polynomial` or `point2plane`");
            }
        } else if (key == "beta_init") {
            config.l0.beta_init = as_double();
            if (!(config.l0.beta_init > 0.0)) throw bad_value("must be positive");
        } else if (key == "beta_scale") {
            config.l0.beta_scale = as_double();
            if (!(config.l0.beta_scale > 1.0)) throw bad_value("must exceed 1");
        } else if (key == "beta_max") {
            config.l0.beta_max = as_double();
            if (!(config.l0.beta_max > 0.0)) throw bad_value("must be positive");
        } else if (key == "min_fit_points") {
            config.fit.min_fit_points = as_int();
            if (config.fit.min_fit_points < 5) throw bad_value("must be at least 5");
        } else if (key == "cond_max") {
            config.fit.cond_max = as_double();
            if (!(config.fit.cond_max > 1.0)) throw bad_value("must exceed 1");
        } else if (key == "lm_max_iterations") {
            config.solver.max_iterations = as_int();
            if (config.solver.max_iterations < 1) throw bad_value("must be at least 1");
        } else if (key == "lm_lambda_init") {
            config.solver.lambda_init = as_double();
            if (!(config.solver.lambda_init > 0.0)) throw bad_value("must be positive");
        } else if (key == "lm_rel_tol") {
            config.solver.rel_tol = as_double();
            if (!(config.solver.rel_tol > 0.0)) throw bad_value("must be positive");
        } else if (key == "huber_delta") {
            config.solver.huber_delta = as_double();
            if (config.solver.huber_delta < 0.0) throw bad_value("must be non-negative");
        } else {
            throw line_error(path, line_no, "unknown key `" + key + "`");
        }
    }
    if (config.schedule == Schedule::progressive && !(config.shrink_k > 1.0)) {
        throw std::runtime_error(path +
                                 ": bad value for `shrink_k`: must exceed 1 under the "
                                 "progressive schedule");
    }
    return config;
}

void write_config(const std::string& path, const PipelineConfig& config)
{
    auto out = open_output(path, "config file");
    out << "gamma_init = " << format_double(config.gamma_init) << "\n";
    out << "shrink_k = " << format_double(config.shrink_k) << "\n";
    out << "mu = " << format_double(config.mu) << "\n";
    out << "t_conv = " << format_double(config.t_conv) << "\n";
    out << "max_frames = " << config.max_frames << "\n";
    out << "gamma_min = " << format_double(config.gamma_min) << "\n";
    out << "max_outer_iters = " << config.max_outer_iters << "\n";
    out << "conv_rot_weight = " << format_double(config.conv_rot_weight) << "\n";
    out << "pca_min_pts = " << config.pca_min_pts << "\n";
    out << "schedule = "
        << (config.schedule == Schedule::progressive ? "progressive" : "fixed") << "\n";
    out << "residual_mode = "
        << (config.residual_mode == ResidualMode::polynomial ? "polynomial" : "point2plane")
        << "\n";
    out << "beta_init = " << format_double(config.l0.beta_init) << "\n";
    out << "beta_scale = " << format_double(config.l0.beta_scale) << "\n";
    out << "beta_max = " << format_double(config.l0.beta_max) << "\n";
    out << "min_fit_points = " << config.fit.min_fit_points << "\n";
    out << "cond_max = " << format_double(config.fit.cond_max) << "\n";
    out << "lm_max_iterations = " << config.solver.max_iterations << "\n";
    out << "lm_lambda_init = " << format_double(config.solver.lambda_init) << "\n";
    out << "lm_rel_tol = " << format_double(config.solver.rel_tol) << "\n";
    out << "huber_delta = " << format_double(config.solver.huber_delta) << "\n";
}

void write_surfaces(const std::string& path,
                    const std::vector<SmoothingKernel>& kernels,
                    double gamma)
{
    auto out = open_output(path, "surface file");
    out << "ox oy oz m00 m01 m02 m10 m11 m12 m20 m21 m22 a0 a1 a2 a3 a4 gamma\n";
    for (const auto& kernel : kernels) {
        if (!kernel.valid) continue;
        const auto& frame = kernel.tangent;
        for (int i = 0; i < 3; ++i) out << format_double(frame.origin[i]) << ' ';
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) out << format_double(frame.M(r, c)) << ' ';
        }
        for (int i = 0; i < 5; ++i) out << format_double(kernel.alpha[i]) << ' ';
        out << format_double(gamma) << "\n";
    }
}

void write_report(const std::string& path, const PipelineReport& report)
{
    auto out = open_output(path, "report file");
    out << "converged: " << (report.converged ? "true" : "false") << "\n";
    out << "stop_reason: " << stop_reason_name(report.stop_reason) << "\n";
    out << "iterations: " << report.iterations.size() << "\n";
    out << "final_gamma: " << format_double(report.final_gamma) << "\n";
    out << "frames: " << report.final_poses.size() << "\n";
    out << "points: " << report.smoothed_cloud.size() << "\n";
    std::size_t valid = 0;
    for (const auto& kernel : report.surfaces) {
        if (kernel.valid) ++valid;
    }
    out << "surfaces: " << valid << "\n";
    out << "total_wall_time_s: " << format_double(report.total_wall_time_s) << "\n";
    for (const auto& it : report.iterations) {
        const std::string p = "iter_" + std::to_string(it.iteration) + "_";
        out << p << "gamma: " << format_double(it.gamma) << "\n";
        out << p << "kernels: " << it.kernel_count << "\n";
        out << p << "valid_kernels: " << it.valid_kernel_count << "\n";
        out << p << "factors: " << it.factor_count << "\n";
        out << p << "rms_before: " << format_double(it.rms_before) << "\n";
        out << p << "rms_after: " << format_double(it.rms_after) << "\n";
        out << p << "max_update: " << format_double(it.max_update) << "\n";
        out << p << "frozen_frames: " << it.frozen_frames.size() << "\n";
    }
}

}  // namespace pssba
