#pragma once

#include "pssba/cloud.hpp"
#include "pssba/geometry.hpp"
#include "pssba/pipeline.hpp"
#include "pssba/surface_fitting.hpp"

#include <string>
#include <vector>

namespace pssba {

struct TrajectoryRecord {
    double timestamp = 0.0;
    Pose pose;
};

// Trajectory files: `timestamp tx ty tz qx qy qz qw` per line, `#` comments.
// The reader enforces unit quaternions (1e-6) and strictly increasing
// timestamps, and reports violations with the line number.
std::vector<TrajectoryRecord> read_trajectory(const std::string& path);
void write_trajectory(const std::string& path, const std::vector<TrajectoryRecord>& records);

std::vector<Pose> poses_of(const std::vector<TrajectoryRecord>& records);

// Wraps poses with synthesized 10 Hz timestamps.
std::vector<TrajectoryRecord> timestamped(const std::vector<Pose>& poses);

// Cloud files: header line `x y z frame` (or `x y z`), then one point per
// line with exactly as many columns as the header declares. Reading fills
// world coordinates; sensor coordinates are set equal to world.
void write_cloud(const std::string& path, const std::vector<MapPoint>& cloud);
std::vector<MapPoint> read_cloud(const std::string& path);

// Frames on disk reuse the cloud format with sensor-frame coordinates plus
// the owning frame index. Reading regroups rows by frame (missing indices
// become empty frames) and synthesizes 10 Hz timestamps.
void write_frames(const std::string& path, const std::vector<Frame>& frames);
std::vector<Frame> read_frames(const std::string& path);

// Config files: `key = value` lines, `#` comments. Unknown keys are
// rejected with the line number; absent keys keep their defaults; bad values
// are reported with the key name. write_config emits every key, and reading
// it back reproduces the config exactly.
PipelineConfig read_config(const std::string& path);
void write_config(const std::string& path, const PipelineConfig& config);

// One line per valid kernel: origin (3), row-major frame matrix (9), surface
// coefficients (5), kernel radius (1); header line names the columns.
void write_surfaces(const std::string& path,
                    const std::vector<SmoothingKernel>& kernels,
                    double gamma);

// Run summary as `key: value` lines, including one block per iteration.
void write_report(const std::string& path, const PipelineReport& report);

}  // namespace pssba
