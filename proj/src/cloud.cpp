#include "pssba/cloud.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pssba {

namespace {

constexpr std::int64_t kCellOffset = std::int64_t{1} << 20;

std::int64_t cell_coord(double x, double cell)
{
    const auto c = static_cast<std::int64_t>(std::floor(x / cell));
    if (c <= -kCellOffset || c >= kCellOffset) {
        throw std::invalid_argument("NeighborIndex: coordinate outside supported grid range");
    }
    return c;
}

std::uint64_t pack_cell(std::int64_t ix, std::int64_t iy, std::int64_t iz)
{
    return (static_cast<std::uint64_t>(ix + kCellOffset) << 42) |
           (static_cast<std::uint64_t>(iy + kCellOffset) << 21) |
           static_cast<std::uint64_t>(iz + kCellOffset);
}

}  // namespace

NeighborIndex::NeighborIndex(const std::vector<MapPoint>& cloud, double cell_size)
    : cell_(cell_size)
{
    if (cell_size <= 0.0) {
        throw std::invalid_argument("NeighborIndex: cell size must be positive");
    }
    positions_.reserve(cloud.size());
    for (const auto& p : cloud) positions_.push_back(p.world);
    for (int i = 0; i < static_cast<int>(positions_.size()); ++i) {
        cells_[key_of(positions_[i])].push_back(i);
    }
}

std::uint64_t NeighborIndex::key_of(const Vec3& p) const
{
    return pack_cell(cell_coord(p.x(), cell_), cell_coord(p.y(), cell_), cell_coord(p.z(), cell_));
}

std::vector<int> NeighborIndex::radius_neighbors(const Vec3& center, double r) const
{
    std::vector<int> result;
    if (r <= 0.0 || positions_.empty()) return result;

    const double r2 = r * r;
    std::int64_t lo[3];
    std::int64_t hi[3];
    for (int k = 0; k < 3; ++k) {
        lo[k] = cell_coord(center(k) - r, cell_);
        hi[k] = cell_coord(center(k) + r, cell_);
    }
    for (std::int64_t ix = lo[0]; ix <= hi[0]; ++ix) {
        for (std::int64_t iy = lo[1]; iy <= hi[1]; ++iy) {
            for (std::int64_t iz = lo[2]; iz <= hi[2]; ++iz) {
                const auto it = cells_.find(pack_cell(ix, iy, iz));
                if (it == cells_.end()) continue;
                for (int idx : it->second) {
                    if ((positions_[idx] - center).squaredNorm() <= r2) {
                        result.push_back(idx);
                    }
                }
            }
        }
    }
    std::sort(result.begin(), result.end());
    return result;
}

std::vector<int> NeighborIndex::radius_neighbors_of(int center_index, double r) const
{
    auto result = radius_neighbors(positions_.at(center_index), r);
    const auto it = std::find(result.begin(), result.end(), center_index);
    if (it != result.end()) result.erase(it);
    return result;
}

std::vector<MapPoint> build_world_cloud(const std::vector<Frame>& frames,
                                        const std::vector<Pose>& poses)
{
    if (frames.size() != poses.size()) {
        throw std::invalid_argument("build_world_cloud: pose count does not match frame count");
    }
    std::size_t total = 0;
    for (const auto& f : frames) total += f.points.size();

    std::vector<MapPoint> cloud;
    cloud.reserve(total);
    for (std::size_t k = 0; k < frames.size(); ++k) {
        if (frames[k].frame_index != static_cast<int>(k)) {
            throw std::invalid_argument("build_world_cloud: frames must be indexed 0..N-1 in order");
        }
        const Pose& pose = poses[k];
        for (const auto& p : frames[k].points) {
            MapPoint mp;
            mp.sensor = p;
            mp.world = project_point(pose, p);
            mp.frame_index = static_cast<int>(k);
            cloud.push_back(mp);
        }
    }
    return cloud;
}

std::vector<int> sample_kernels(const std::vector<MapPoint>& cloud, double gamma)
{
    if (gamma <= 0.0) {
        throw std::invalid_argument("sample_kernels: gamma must be positive");
    }
    struct Best {
        int index;
        double dist2;
    };
    std::unordered_map<std::uint64_t, Best> best;
    best.reserve(cloud.size());

    for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
        const Vec3& p = cloud[i].world;
        const std::int64_t ix = cell_coord(p.x(), gamma);
        const std::int64_t iy = cell_coord(p.y(), gamma);
        const std::int64_t iz = cell_coord(p.z(), gamma);
        const Vec3 centroid((ix + 0.5) * gamma, (iy + 0.5) * gamma, (iz + 0.5) * gamma);
        const double d2 = (p - centroid).squaredNorm();
        const std::uint64_t key = pack_cell(ix, iy, iz);
        auto [it, inserted] = best.try_emplace(key, Best{i, d2});
        if (!inserted && d2 < it->second.dist2) {
            it->second = Best{i, d2};
        }
    }

    std::vector<int> selected;
    selected.reserve(best.size());
    for (const auto& [key, b] : best) selected.push_back(b.index);
    std::sort(selected.begin(), selected.end());
    return selected;
}

void pca_normals(std::vector<MapPoint>& cloud,
                 const NeighborIndex& index,
                 const std::vector<Pose>& poses,
                 double r,
                 int min_pts)
{
    if (min_pts < 3) {
        throw std::invalid_argument("pca_normals: min_pts must be at least 3");
    }
    for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
        MapPoint& pt = cloud[i];
        pt.normal_valid = false;
        pt.initial_normal = Vec3::Zero();

        const auto nb = index.radius_neighbors_of(i, r);
        if (static_cast<int>(nb.size()) < min_pts) continue;

        Vec3 mean = pt.world;
        for (int j : nb) mean += cloud[j].world;
        mean /= static_cast<double>(nb.size() + 1);

        Mat3 cov = Mat3::Zero();
        {
            const Vec3 d = pt.world - mean;
            cov += d * d.transpose();
        }
        for (int j : nb) {
            const Vec3 d = cloud[j].world - mean;
            cov += d * d.transpose();
        }
        cov /= static_cast<double>(nb.size() + 1);

        Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
        Vec3 n = es.eigenvectors().col(0);  // smallest eigenvalue
        const Vec3 sensor_origin = poses.at(pt.frame_index).t;
        if (n.dot(sensor_origin - pt.world) < 0.0) n = -n;

        pt.initial_normal = n.normalized();
        pt.normal_valid = true;
    }
}

double median_nn_spacing(const std::vector<MapPoint>& cloud)
{
    if (cloud.size() < 2) return 0.0;

    // Cell size from the bounding box so queries stay local.
    Vec3 lo = cloud.front().world;
    Vec3 hi = lo;
    for (const auto& p : cloud) {
        lo = lo.cwiseMin(p.world);
        hi = hi.cwiseMax(p.world);
    }
    const double diag = (hi - lo).norm();
    const double cell = std::max(diag / std::cbrt(static_cast<double>(cloud.size())), 1e-6);

    NeighborIndex index(cloud, cell);
    std::vector<double> nn;
    nn.reserve(cloud.size());
    for (int i = 0; i < static_cast<int>(cloud.size()); ++i) {
        double r = cell;
        std::vector<int> nb;
        while (true) {
            nb = index.radius_neighbors_of(i, r);
            if (!nb.empty() || r > 2.0 * diag) break;
            r *= 2.0;
        }
        if (nb.empty()) continue;
        double d2 = std::numeric_limits<double>::max();
        for (int j : nb) {
            d2 = std::min(d2, (cloud[j].world - cloud[i].world).squaredNorm());
        }
        nn.push_back(std::sqrt(d2));
    }
    if (nn.empty()) return 0.0;
    const std::size_t mid = nn.size() / 2;
    std::nth_element(nn.begin(), nn.begin() + mid, nn.end());
    return nn[mid];
}

}  // namespace pssba
