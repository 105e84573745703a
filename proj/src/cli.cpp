#include "pssba/cli.hpp"

#include "pssba/io.hpp"
#include "pssba/pipeline.hpp"
#include "pssba/simbench.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace pssba {
namespace {

struct SimGenArgs {
    std::string scene_path;
    std::string trajectory_path;
    std::string output_path;
    std::string poses_out;
    int points = 1000;
    double fov_deg = 360.0;
    double max_range = 50.0;
    double range_noise = 0.0;
    std::uint64_t seed = 0;
};

int cmd_sim_gen(const SimGenArgs& args)
{
    const Scene scene = read_scene(args.scene_path);
    const auto records = read_trajectory(args.trajectory_path);
    if (records.empty()) {
        throw std::runtime_error(args.trajectory_path + ": trajectory is empty");
    }

    ScanConfig scan;
    scan.points_per_frame = args.points;
    scan.fov_deg = args.fov_deg;
    scan.max_range = args.max_range;
    scan.range_noise_sigma = args.range_noise;
    scan.seed = args.seed;

    const auto frames = generate_frames(scene, poses_of(records), scan);
    for (const auto& frame : frames) {
        if (frame.points.empty()) {
            std::cerr << "warning: frame " << frame.frame_index << " has no hits\n";
        }
    }
    write_frames(args.output_path, frames);
    if (!args.poses_out.empty()) write_trajectory(args.poses_out, records);

    std::size_t total = 0;
    for (const auto& frame : frames) total += frame.points.size();
    std::cout << "frames: " << frames.size() << "\npoints: " << total << "\n";
    return 0;
}

struct PerturbArgs {
    std::string input_path;
    std::string output_path;
    double trans_sigma = 0.2;
    double rot_sigma_deg = 1.0;
    std::string mode = "independent";
    std::uint64_t seed = 0;
};

int cmd_perturb(const PerturbArgs& args)
{
    auto records = read_trajectory(args.input_path);
    NoiseSpec spec;
    spec.trans_sigma = args.trans_sigma;
    spec.rot_sigma_deg = args.rot_sigma_deg;
    spec.mode = args.mode == "random_walk" ? NoiseMode::random_walk : NoiseMode::independent;
    spec.seed = args.seed;

    const auto noisy = perturb_poses(poses_of(records), spec);
    for (std::size_t i = 0; i < records.size(); ++i) records[i].pose = noisy[i];
    write_trajectory(args.output_path, records);
    std::cout << "perturbed " << (records.empty() ? 0 : records.size() - 1)
              << " poses (frame 0 fixed)\n";
    return 0;
}

struct RunArgs {
    std::string frames_path;
    std::string poses_path;
    std::string output_dir;
    std::string config_path;
    std::string schedule;
    std::string residual;
    double gamma_init = 0.0;
    int max_outer_iters = 0;
};

int cmd_run(const RunArgs& args)
{
    auto frames = read_frames(args.frames_path);
    auto records = read_trajectory(args.poses_path);
    if (records.empty()) throw std::runtime_error(args.poses_path + ": trajectory is empty");
    if (frames.size() > records.size()) {
        throw std::runtime_error(args.frames_path + ": more frames than poses");
    }
    while (frames.size() < records.size()) {
        Frame frame;
        frame.frame_index = static_cast<int>(frames.size());
        frame.timestamp = 0.1 * static_cast<double>(frames.size());
        frames.push_back(std::move(frame));
    }

    PipelineConfig config =
        args.config_path.empty() ? PipelineConfig{} : read_config(args.config_path);
    if (!args.schedule.empty()) {
        config.schedule = args.schedule == "fixed" ? Schedule::fixed : Schedule::progressive;
    }
    if (!args.residual.empty()) {
        config.residual_mode = args.residual == "point2plane" ? ResidualMode::point2plane
                                                              : ResidualMode::polynomial;
    }
    if (args.gamma_init > 0.0) config.gamma_init = args.gamma_init;
    if (args.max_outer_iters > 0) config.max_outer_iters = args.max_outer_iters;

    std::filesystem::create_directories(args.output_dir);

    const auto logger = [](const IterationRecord& rec) {
        std::printf(
            "[iter %d] gamma=%.4f kernels=%d/%d factors=%d rms %.6f -> %.6f "
            "max_update=%.6f (%.2f s)\n",
            rec.iteration, rec.gamma, rec.valid_kernel_count, rec.kernel_count,
            rec.factor_count, rec.rms_before, rec.rms_after, rec.max_update, rec.wall_time_s);
        for (int frame : rec.frozen_frames) {
            std::printf("[iter %d] frame %d frozen (no factors)\n", rec.iteration, frame);
        }
        std::fflush(stdout);
    };

    const auto report = run_pipeline(frames, poses_of(records), config, logger);

    const std::filesystem::path dir(args.output_dir);
    for (std::size_t i = 0; i < records.size(); ++i) records[i].pose = report.final_poses[i];
    write_trajectory((dir / "poses.txt").string(), records);
    write_cloud((dir / "smoothed_cloud.txt").string(), report.smoothed_cloud);
    write_surfaces((dir / "surfaces.txt").string(), report.surfaces, report.final_gamma);
    write_report((dir / "report.txt").string(), report);

    std::printf("stop: %s after %zu iterations (%.2f s)\n", stop_reason_name(report.stop_reason),
                report.iterations.size(), report.total_wall_time_s);
    return report.converged ? 0 : 3;
}

int cmd_eval_ape(const std::string& estimated_path, const std::string& truth_path)
{
    const auto estimated = read_trajectory(estimated_path);
    const auto truth = read_trajectory(truth_path);
    const auto stats = ape(poses_of(estimated), poses_of(truth));
    std::printf("rmse: %.6f\nmean: %.6f\nmax: %.6f\n", stats.rmse, stats.mean, stats.max);
    return 0;
}

int cmd_eval_occupancy(const std::string& cloud_path, double voxel)
{
    const auto cloud = read_cloud(cloud_path);
    std::printf("voxels: %zu\n", occupancy_count(cloud, voxel));
    return 0;
}

int cmd_export_cloud(const std::string& frames_path, const std::string& poses_path,
                     const std::string& output_path)
{
    auto frames = read_frames(frames_path);
    const auto records = read_trajectory(poses_path);
    if (frames.size() > records.size()) {
        throw std::runtime_error(frames_path + ": more frames than poses");
    }
    while (frames.size() < records.size()) {
        Frame frame;
        frame.frame_index = static_cast<int>(frames.size());
        frames.push_back(std::move(frame));
    }
    const auto cloud = build_world_cloud(frames, poses_of(records));
    write_cloud(output_path, cloud);
    std::cout << "points: " << cloud.size() << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv)
{
    CLI::App app{"Progressive surface-smoothing bundle adjustment for LiDAR scans"};
    app.require_subcommand(1);

    SimGenArgs sim_args;
    auto* sim = app.add_subcommand("sim-gen", "Simulate scan frames from an analytic scene");
    sim->add_option("--scene", sim_args.scene_path, "Scene description file")->required();
    sim->add_option("--trajectory", sim_args.trajectory_path, "Scanner trajectory file")
        ->required();
    sim->add_option("--output", sim_args.output_path, "Output frames file")->required();
    sim->add_option("--poses-out", sim_args.poses_out, "Copy of the ground-truth trajectory");
    sim->add_option("--points", sim_args.points, "Rays per frame");
    sim->add_option("--fov", sim_args.fov_deg, "Field of view, degrees");
    sim->add_option("--max-range", sim_args.max_range, "Maximum range, meters");
    sim->add_option("--range-noise", sim_args.range_noise, "Per-point range noise sigma, meters");
    sim->add_option("--seed", sim_args.seed, "Random seed");

    PerturbArgs perturb_args;
    auto* perturb = app.add_subcommand("perturb", "Add Gaussian noise to a trajectory");
    perturb->add_option("--input", perturb_args.input_path, "Input trajectory")->required();
    perturb->add_option("--output", perturb_args.output_path, "Output trajectory")->required();
    perturb->add_option("--trans-sigma", perturb_args.trans_sigma,
                        "Per-axis translation sigma, meters");
    perturb->add_option("--rot-sigma-deg", perturb_args.rot_sigma_deg,
                        "Rotation angle sigma, degrees");
    perturb->add_option("--mode", perturb_args.mode, "independent or random_walk")
        ->check(CLI::IsMember({"independent", "random_walk"}));
    perturb->add_option("--seed", perturb_args.seed, "Random seed");

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Adjust poses with progressive surface smoothing");
    run->add_option("--frames", run_args.frames_path, "Input frames file")->required();
    run->add_option("--poses", run_args.poses_path, "Initial trajectory")->required();
    run->add_option("--output-dir", run_args.output_dir, "Directory for outputs")->required();
    run->add_option("--config", run_args.config_path, "Config file (key = value)");
    run->add_option("--schedule", run_args.schedule, "progressive or fixed")
        ->check(CLI::IsMember({"progressive", "fixed"}));
    run->add_option("--residual", run_args.residual, "polynomial or point2plane")
        ->check(CLI::IsMember({"polynomial", "point2plane"}));
    run->add_option("--gamma-init", run_args.gamma_init, "Initial kernel radius, meters");
    run->add_option("--max-outer-iters", run_args.max_outer_iters, "Outer iteration cap");

    std::string ape_estimated, ape_truth;
    auto* eval_ape = app.add_subcommand("eval-ape", "Absolute position error between trajectories");
    eval_ape->add_option("estimated", ape_estimated, "Estimated trajectory")->required();
    eval_ape->add_option("truth", ape_truth, "Ground-truth trajectory")->required();

    std::string occ_cloud;
    double occ_voxel = 0.1;
    auto* eval_occ = app.add_subcommand("eval-occupancy", "Occupied voxel count of a cloud");
    eval_occ->add_option("cloud", occ_cloud, "Cloud file")->required();
    eval_occ->add_option("--voxel", occ_voxel, "Voxel size, meters");

    std::string exp_frames, exp_poses, exp_output;
    auto* export_cloud = app.add_subcommand("export-cloud", "Merge frames into a world cloud");
    export_cloud->add_option("--frames", exp_frames, "Input frames file")->required();
    export_cloud->add_option("--poses", exp_poses, "Trajectory file")->required();
    export_cloud->add_option("--output", exp_output, "Output cloud file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) return cmd_sim_gen(sim_args);
        if (perturb->parsed()) return cmd_perturb(perturb_args);
        if (run->parsed()) return cmd_run(run_args);
        if (eval_ape->parsed()) return cmd_eval_ape(ape_estimated, ape_truth);
        if (eval_occ->parsed()) return cmd_eval_occupancy(occ_cloud, occ_voxel);
        if (export_cloud->parsed()) return cmd_export_cloud(exp_frames, exp_poses, exp_output);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace pssba
