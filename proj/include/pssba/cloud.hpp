#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "pssba/geometry.hpp"

namespace pssba {

// One LiDAR scan. Points are in the sensor frame.
struct Frame {
    int frame_index = 0;
    double timestamp = 0.0;
    std::vector<Vec3> points;
};

// A sensor point projected into the world frame, remembering its owner.
// `world` is always recomputed from `sensor` and the current pose of the
// owning frame, never updated incrementally.
struct MapPoint {
    Vec3 world = Vec3::Zero();
    Vec3 sensor = Vec3::Zero();
    int frame_index = 0;
    Vec3 initial_normal = Vec3::Zero();
    bool normal_valid = false;
};

// Uniform hash grid over world coordinates supporting exact closed-ball
// radius queries. Immutable after construction; concurrent reads are safe.
class NeighborIndex {
public:
    NeighborIndex(const std::vector<MapPoint>& cloud, double cell_size);

    // Indices of all points with ||p - center|| <= r, sorted ascending.
    std::vector<int> radius_neighbors(const Vec3& center, double r) const;

    // Same query around a cloud member, excluding the member itself.
    std::vector<int> radius_neighbors_of(int center_index, double r) const;

    double cell_size() const { return cell_; }
    std::size_t size() const { return positions_.size(); }

private:
    std::uint64_t key_of(const Vec3& p) const;

    double cell_;
    std::vector<Vec3> positions_;
    std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

// Projects every frame into the world frame with its pose. Output order is
// frame-major with point order preserved. Requires frames[k].frame_index == k
// and one pose per frame.
std::vector<MapPoint> build_world_cloud(const std::vector<Frame>& frames,
                                        const std::vector<Pose>& poses);

// Voxel-grid subsampling at voxel size gamma, grid anchored at the origin.
// Keeps the point nearest each occupied voxel's centroid (ties: lowest
// index). Returns sorted point indices.
std::vector<int> sample_kernels(const std::vector<MapPoint>& cloud, double gamma);

// PCA plane normals over radius-r neighborhoods, oriented toward the sensor
// origin of each point's owning frame. Points with fewer than min_pts
// neighbors are left with normal_valid = false.
void pca_normals(std::vector<MapPoint>& cloud,
                 const NeighborIndex& index,
                 const std::vector<Pose>& poses,
                 double r,
                 int min_pts);

// Median of each point's nearest-neighbor distance. Used to derive the
// finest sensible smoothing scale for a cloud.
double median_nn_spacing(const std::vector<MapPoint>& cloud);

}  // namespace pssba
