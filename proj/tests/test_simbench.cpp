#include "pssba/simbench.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <tuple>

using namespace pssba;

namespace {
constexpr double kDeg = 3.14159265358979323846 / 180.0;

// Scan a single-patch scene and verify every return lies on the analytic
// surface.
void check_membership(const SurfacePatch& patch, const Pose& sensor, double tol = 1e-9)
{
    Scene scene;
    scene.patches.push_back(patch);
    ScanConfig cfg;
    cfg.points_per_frame = 400;
    cfg.seed = 7;
    const auto frames = generate_frames(scene, {sensor}, cfg);
    REQUIRE(frames.size() == 1);
    // Small patches subtend a small solid angle; just require a usable sample.
    CHECK(frames[0].points.size() > 10);
    for (const auto& p : frames[0].points) {
        const Vec3 world = project_point(sensor, p);
        CHECK(std::abs(membership_residual(patch, world)) < tol);
    }
}
}  // namespace

TEST_CASE("ray hits a wall one meter ahead at exactly range one")
{
    const PlanePatch wall{Vec3(1, 0, 0), Vec3(1, 0, 0), 2.0, 2.0};
    const auto hit = raycast(SurfacePatch{wall}, Vec3::Zero(), Vec3(1, 0, 0), 10.0);
    REQUIRE(hit.has_value());
    CHECK(*hit == doctest::Approx(1.0).epsilon(1e-12));

    // A parallel ray misses; a ray beyond the extent misses.
    CHECK_FALSE(raycast(SurfacePatch{wall}, Vec3::Zero(), Vec3(0, 1, 0), 10.0).has_value());
    const Vec3 oblique = Vec3(1.0, 3.0, 0.0).normalized();
    CHECK_FALSE(raycast(SurfacePatch{wall}, Vec3::Zero(), oblique, 10.0).has_value());
}

TEST_CASE("sphere raycast picks the near intersection")
{
    const SpherePatch ball{Vec3(5, 0, 0), 1.0};
    const auto hit = raycast(SurfacePatch{ball}, Vec3::Zero(), Vec3(1, 0, 0), 50.0);
    REQUIRE(hit.has_value());
    CHECK(*hit == doctest::Approx(4.0).epsilon(1e-12));

    // From inside, the far wall is the first positive root.
    const auto inside = raycast(SurfacePatch{ball}, Vec3(5, 0, 0), Vec3(1, 0, 0), 50.0);
    REQUIRE(inside.has_value());
    CHECK(*inside == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cylinder raycast respects the axial extent")
{
    const CylinderPatch tube{Vec3::Zero(), Vec3(1, 0, 0), 2.0, 3.0};
    const auto hit = raycast(SurfacePatch{tube}, Vec3::Zero(), Vec3(0, 1, 0), 50.0);
    REQUIRE(hit.has_value());
    CHECK(*hit == doctest::Approx(2.0).epsilon(1e-12));

    // Same lateral ray outside the axial extent misses.
    CHECK_FALSE(raycast(SurfacePatch{tube}, Vec3(4.0, 0, 0), Vec3(0, 1, 0), 50.0).has_value());
}

TEST_CASE("scene raycast returns the nearest patch")
{
    Scene scene;
    scene.patches.push_back(SpherePatch{Vec3(10, 0, 0), 1.0});
    scene.patches.push_back(SpherePatch{Vec3(5, 0, 0), 1.0});
    const auto hit = raycast(scene, Vec3::Zero(), Vec3(1, 0, 0), 50.0);
    REQUIRE(hit.has_value());
    CHECK(hit->patch_index == 1);
    CHECK(hit->range == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("scan returns lie exactly on each analytic surface")
{
    Pose sensor;
    sensor.t = Vec3(0.0, 0.0, 4.0);
    sensor.R = exp_map(Vec3(0.1, -0.2, 0.3));

    check_membership(SpherePatch{Vec3(1.0, -2.0, 1.0), 2.0}, sensor);
    check_membership(CylinderPatch{Vec3(0, 0, 0), Vec3(1, 0, 0), 3.0, 8.0}, sensor);
    check_membership(ParaboloidPatch{Vec3(0, 0, 0), 0.08, 0.08, 10.0}, sensor);
    check_membership(PlanePatch{Vec3(0, 0, 0), Vec3(0, 0, 1), 8.0, 8.0}, sensor);
    // The sine sheet intersection is iterative; its bisection converges far
    // below a micrometer.
    check_membership(SinePatch{Vec3(0, 0, 0), 0.8, 0.9, 0.7, 10.0, 10.0}, sensor, 1e-7);
}

TEST_CASE("patch normals are unit length and orthogonal to the surface")
{
    // Sphere: radial. Plane: the stored normal.
    const SpherePatch ball{Vec3(1, 2, 3), 2.0};
    const Vec3 on = ball.center + 2.0 * Vec3(0, 0, 1);
    CHECK((patch_normal(SurfacePatch{ball}, on) - Vec3(0, 0, 1)).norm() < 1e-12);

    const PlanePatch plane{Vec3::Zero(), Vec3(0, 1, 0), 1.0, 1.0};
    CHECK((patch_normal(SurfacePatch{plane}, Vec3(0.2, 0.0, 0.1)) - Vec3(0, 1, 0)).norm() <
          1e-12);
}

TEST_CASE("frame generation is deterministic and seed-sensitive")
{
    Scene scene;
    scene.patches.push_back(SpherePatch{Vec3(6, 0, 0), 2.0});
    scene.patches.push_back(PlanePatch{Vec3(0, 0, -2), Vec3(0, 0, 1), 10.0, 10.0});
    const std::vector<Pose> traj{Pose{}, Pose{Mat3::Identity(), Vec3(1, 0, 0)},
                                 Pose{Mat3::Identity(), Vec3(2, 0, 0)}};

    ScanConfig cfg;
    cfg.points_per_frame = 200;
    cfg.seed = 42;
    const auto a = generate_frames(scene, traj, cfg);
    const auto b = generate_frames(scene, traj, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        REQUIRE(a[k].points.size() == b[k].points.size());
        for (std::size_t i = 0; i < a[k].points.size(); ++i) {
            CHECK(a[k].points[i] == b[k].points[i]);
        }
        CHECK(a[k].timestamp == doctest::Approx(0.1 * static_cast<double>(k)));
        CHECK(a[k].frame_index == static_cast<int>(k));
    }

    cfg.seed = 43;
    const auto c = generate_frames(scene, traj, cfg);
    CHECK(a[0].points != c[0].points);

    // Each frame draws from its own stream: truncating the trajectory does
    // not change earlier frames.
    cfg.seed = 42;
    const auto head = generate_frames(scene, {traj[0]}, cfg);
    CHECK(head[0].points == a[0].points);
}

TEST_CASE("range noise perturbs ranges without changing directions")
{
    Scene scene;
    scene.patches.push_back(SpherePatch{Vec3(6, 0, 0), 2.0});
    const std::vector<Pose> traj{Pose{}};
    ScanConfig clean;
    clean.points_per_frame = 300;
    clean.seed = 9;
    ScanConfig noisy = clean;
    noisy.range_noise_sigma = 0.05;

    const auto a = generate_frames(scene, traj, clean);
    const auto b = generate_frames(scene, traj, noisy);
    REQUIRE(a[0].points.size() == b[0].points.size());
    for (std::size_t i = 0; i < a[0].points.size(); ++i) {
        const Vec3& pa = a[0].points[i];
        const Vec3& pb = b[0].points[i];
        // Same ray, different range: the two returns must stay parallel.  The
        // cross product measures sin(angle) without the acos precision floor.
        CHECK(pa.cross(pb).norm() < 1e-12 * pa.norm() * pb.norm());
        CHECK(pa != pb);  // sigma = 0.05 makes a zero offset measure-zero
    }
}

TEST_CASE("fov restricts rays to a forward cone")
{
    Scene scene;
    scene.patches.push_back(SpherePatch{Vec3(0, 0, 0), 20.0});  // surrounds the sensor
    ScanConfig cfg;
    cfg.points_per_frame = 500;
    cfg.fov_deg = 60.0;
    cfg.max_range = 50.0;
    cfg.seed = 5;
    const auto frames = generate_frames(scene, {Pose{}}, cfg);
    for (const auto& p : frames[0].points) {
        CHECK(support::angle_between(p, Vec3(1, 0, 0)) <= 30.0 * kDeg + 1e-9);
    }
}

TEST_CASE("pose noise has the requested translation spread")
{
    std::vector<Pose> traj(10001);
    NoiseSpec spec;
    spec.trans_sigma = 0.2;
    spec.rot_sigma_deg = 1.0;
    spec.seed = 77;
    const auto noisy = perturb_poses(traj, spec);

    CHECK(noisy[0].t == traj[0].t);
    CHECK(noisy[0].R == traj[0].R);

    for (int axis = 0; axis < 3; ++axis) {
        double sum = 0.0;
        double sum2 = 0.0;
        for (std::size_t k = 1; k < noisy.size(); ++k) {
            const double d = noisy[k].t(axis);
            sum += d;
            sum2 += d * d;
        }
        const double n = static_cast<double>(noisy.size() - 1);
        const double var = sum2 / n - (sum / n) * (sum / n);
        CHECK(std::sqrt(var) == doctest::Approx(0.2).epsilon(0.03));
    }

    // Rotation magnitudes follow |N(0, sigma)|; check the mean against the
    // half-normal expectation.
    double rot_sum = 0.0;
    for (std::size_t k = 1; k < noisy.size(); ++k) rot_sum += rotation_angle(noisy[k].R);
    const double mean = rot_sum / static_cast<double>(noisy.size() - 1);
    const double expected = (1.0 * kDeg) * std::sqrt(2.0 / 3.14159265358979323846);
    CHECK(mean == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("zero-sigma noise leaves poses bit-identical")
{
    std::mt19937_64 rng(83);
    std::vector<Pose> traj;
    for (int k = 0; k < 5; ++k) traj.push_back(support::random_pose(rng));
    NoiseSpec spec;
    spec.trans_sigma = 0.0;
    spec.rot_sigma_deg = 0.0;
    const auto out = perturb_poses(traj, spec);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        CHECK(out[k].t == traj[k].t);
        CHECK(out[k].R == traj[k].R);
    }
}

TEST_CASE("random walk accumulates the independent increments")
{
    std::mt19937_64 rng(89);
    std::vector<Pose> traj;
    for (int k = 0; k < 8; ++k) traj.push_back(support::random_pose(rng));

    NoiseSpec spec;
    spec.trans_sigma = 0.1;
    spec.rot_sigma_deg = 2.0;
    spec.seed = 31;
    spec.mode = NoiseMode::independent;
    const auto ind = perturb_poses(traj, spec);
    spec.mode = NoiseMode::random_walk;
    const auto walk = perturb_poses(traj, spec);

    Vec3 acc_t = Vec3::Zero();
    Mat3 acc_R = Mat3::Identity();
    for (std::size_t k = 1; k < traj.size(); ++k) {
        acc_t += ind[k].t - traj[k].t;
        acc_R = (ind[k].R * traj[k].R.transpose()) * acc_R;
        CHECK((walk[k].t - traj[k].t - acc_t).norm() < 1e-12);
        CHECK((walk[k].R * traj[k].R.transpose() - acc_R).norm() < 1e-12);
    }
}

TEST_CASE("trajectory error statistics")
{
    std::mt19937_64 rng(97);
    std::vector<Pose> truth;
    for (int k = 0; k < 6; ++k) truth.push_back(support::random_pose(rng));

    SUBCASE("identical trajectories score zero")
    {
        const auto s = ape(truth, truth);
        CHECK(s.rmse == 0.0);
        CHECK(s.mean == 0.0);
        CHECK(s.max == 0.0);
    }
    SUBCASE("a constant offset on the non-gauge frames is reported exactly")
    {
        auto est = truth;
        for (std::size_t k = 1; k < est.size(); ++k) est[k].t += Vec3(0.1, 0, 0);
        const auto s = ape(est, truth);
        CHECK(s.mean == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(s.rmse == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(s.max == doctest::Approx(0.1).epsilon(1e-12));
    }
    SUBCASE("statistics match a direct recomputation")
    {
        auto est = truth;
        for (std::size_t k = 1; k < est.size(); ++k) est[k].t += support::random_vec(rng, 0.3);
        const auto s = ape(est, truth);

        double sum = 0.0, sum2 = 0.0, worst = 0.0;
        for (std::size_t k = 1; k < est.size(); ++k) {
            const double e = (est[k].t - truth[k].t).norm();
            sum += e;
            sum2 += e * e;
            worst = std::max(worst, e);
        }
        const double n = static_cast<double>(est.size() - 1);
        CHECK(s.mean == doctest::Approx(sum / n).epsilon(1e-12));
        CHECK(s.rmse == doctest::Approx(std::sqrt(sum2 / n)).epsilon(1e-12));
        CHECK(s.max == doctest::Approx(worst).epsilon(1e-12));
    }
    SUBCASE("length mismatch is rejected")
    {
        CHECK_THROWS_AS(ape(truth, std::vector<Pose>(3)), std::invalid_argument);
    }
}

TEST_CASE("expected offset error matches a self-computed Monte-Carlo estimate")
{
    // Perturb a fixed trajectory many times and compare the mean APE against
    // the same statistic sampled directly from the noise model.
    std::vector<Pose> truth(4);
    for (int k = 0; k < 4; ++k) truth[static_cast<std::size_t>(k)].t = Vec3(k, 0, 0);

    NoiseSpec spec;
    spec.trans_sigma = 0.2;
    spec.rot_sigma_deg = 1.0;

    double mean_ape = 0.0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        spec.seed = static_cast<std::uint64_t>(t) + 1;
        mean_ape += ape(perturb_poses(truth, spec), truth).mean;
    }
    mean_ape /= trials;

    std::mt19937_64 rng(12345);
    std::normal_distribution<double> n01(0.0, 1.0);
    double mc = 0.0;
    const int samples = 200000;
    for (int s = 0; s < samples; ++s) {
        mc += Vec3(0.2 * n01(rng), 0.2 * n01(rng), 0.2 * n01(rng)).norm();
    }
    mc /= samples;

    CHECK(std::abs(mean_ape - mc) / mc < 0.05);
}

TEST_CASE("occupancy counts distinct voxels")
{
    std::vector<MapPoint> one(1);
    one[0].world = Vec3(0.01, 0.02, 0.03);
    CHECK(occupancy_count(one, 0.1) == 1);

    std::vector<MapPoint> two(2);
    two[0].world = Vec3(0.0, 0.0, 0.05);
    two[1].world = Vec3(0.0, 0.0, 0.15);
    CHECK(occupancy_count(two, 0.1) == 2);

    CHECK_THROWS_AS(occupancy_count(one, 0.0), std::invalid_argument);
}

TEST_CASE("occupancy matches a brute-force voxel set")
{
    std::mt19937_64 rng(211);
    std::vector<MapPoint> cloud(5000);
    for (auto& p : cloud) p.world = support::random_vec(rng, 3.0);

    const double voxel = 0.25;
    std::set<std::tuple<long, long, long>> bins;
    for (const auto& p : cloud) {
        bins.insert({static_cast<long>(std::floor(p.world.x() / voxel)),
                     static_cast<long>(std::floor(p.world.y() / voxel)),
                     static_cast<long>(std::floor(p.world.z() / voxel))});
    }
    CHECK(occupancy_count(cloud, voxel) == bins.size());
}

TEST_CASE("misregistration inflates the occupied-voxel count")
{
    Scene scene;
    scene.patches.push_back(PlanePatch{Vec3(0, 0, 0), Vec3(0, 0, 1), 8.0, 8.0});
    std::vector<Pose> traj;
    for (int k = 0; k < 10; ++k) {
        Pose p;
        p.t = Vec3(0.5 * k, 0, 3.0);
        traj.push_back(p);
    }
    ScanConfig cfg;
    cfg.points_per_frame = 500;
    cfg.seed = 3;
    const auto frames = generate_frames(scene, traj, cfg);

    NoiseSpec spec;
    spec.trans_sigma = 0.2;
    spec.rot_sigma_deg = 1.0;
    spec.seed = 17;
    const auto noisy = perturb_poses(traj, spec);

    const auto clean_cloud = build_world_cloud(frames, traj);
    const auto noisy_cloud = build_world_cloud(frames, noisy);
    CHECK(occupancy_count(clean_cloud, 0.1) < occupancy_count(noisy_cloud, 0.1));
}

TEST_CASE("scene files parse all patch types and report bad lines")
{
    support::TempFile file("scene");
    file.write(
        "# test scene\n"
        "plane 0 0 0  0 0 1  4 4\n"
        "sphere 1 2 3 0.5\n"
        "\n"
        "cylinder 0 0 0  2 0 0  1.5 6\n"
        "paraboloid 0 0 0 0.08 0.09 10\n"
        "sine 0 0 1  0.8 0.9 0.7  12 12\n");
    const auto scene = read_scene(file.path());
    REQUIRE(scene.patches.size() == 5);
    CHECK(std::holds_alternative<PlanePatch>(scene.patches[0]));
    CHECK(std::get<SpherePatch>(scene.patches[1]).radius == doctest::Approx(0.5));
    // Direction vectors are normalized on load.
    CHECK((std::get<CylinderPatch>(scene.patches[2]).axis - Vec3(1, 0, 0)).norm() < 1e-12);
    CHECK(std::get<SinePatch>(scene.patches[4]).center.z() == doctest::Approx(1.0));

    support::TempFile bad("scene_bad");
    bad.write("plane 0 0 0 0 0 1 4 4\nwedge 1 2 3\n");
    try {
        read_scene(bad.path());
        FAIL("expected a parse error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }

    support::TempFile invalid("scene_invalid");
    invalid.write("sphere 0 0 0 -1\n");
    CHECK_THROWS(read_scene(invalid.path()));

    CHECK_THROWS(read_scene("/nonexistent/scene.txt"));
}
