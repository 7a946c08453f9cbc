#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ropeid/errors.hpp"
#include "ropeid/grid.hpp"
#include "ropeid/linalg.hpp"
#include "ropeid/sim.hpp"

namespace ropeid {

// Default weight multiplying the L1 density loss.
inline constexpr double kDensityLossWeight = 10.0;

struct PointCloud {
    std::vector<Vec3d> points;
};

// Timestamped point-cloud frames produced by the predefined lifting script.
struct Demonstration {
    std::vector<PointCloud> frames;
    std::vector<double> frame_times;
    std::string script_id;

    void validate() const {
        if (frames.empty()) throw precondition_error("Demonstration: needs at least 1 frame");
        if (frame_times.size() != frames.size())
            throw precondition_error("Demonstration: frame_times/frames length mismatch");
        for (std::size_t i = 1; i < frame_times.size(); ++i)
            if (!(frame_times[i] > frame_times[i - 1]))
                throw precondition_error("Demonstration: frame_times must be strictly increasing");
    }
};

// 64^3 by default; values sum to 1 (normalized mass).
template <class T>
struct DensityGridT {
    std::vector<T> values;
    GridConfig config;
};
using DensityGrid = DensityGridT<double>;

// Each point deposits mass 1/N onto its 27 surrounding nodes via the tensor
// product of the per-axis quadratic kernel weights.
template <class T>
DensityGridT<T> rasterize_density(const std::vector<Vec3<T>>& points, const GridConfig& grid) {
    if (points.empty()) throw precondition_error("rasterize_density: empty point cloud");
    const int res = grid.resolution;
    DensityGridT<T> out;
    out.config = grid;
    out.values.assign(static_cast<std::size_t>(res) * res * res, T(0));

    // Scatter in lexicographic coordinate order so the accumulated grid is
    // bit-identical no matter how the input points are permuted.
    std::vector<std::size_t> order(points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ax = primal(points[a].x), bx = primal(points[b].x);
        if (ax != bx) return ax < bx;
        const double ay = primal(points[a].y), by = primal(points[b].y);
        if (ay != by) return ay < by;
        return primal(points[a].z) < primal(points[b].z);
    });

    const T inv_n(1.0 / static_cast<double>(points.size()));
    for (const std::size_t p : order) {
        const Vec3d pos{primal(points[p].x), primal(points[p].y), primal(points[p].z)};
        if (!grid.inside_margin(pos))
            throw out_of_domain_error("rasterize_density: point " + std::to_string(p) +
                                          " outside the grid margin",
                                      static_cast<int>(p), 0.0);
        int base[3];
        T fx[3], w[3][3];
        base_and_offsets(points[p], grid, base, fx);
        for (int a = 0; a < 3; ++a) kernel_weights(fx[a], w[a]);
        for (int di = 0; di < 3; ++di)
            for (int dj = 0; dj < 3; ++dj)
                for (int dk = 0; dk < 3; ++dk) {
                    const std::size_t idx =
                        (static_cast<std::size_t>(base[0] + di) * res + (base[1] + dj)) * res +
                        (base[2] + dk);
                    out.values[idx] += w[0][di] * w[1][dj] * w[2][dk] * inv_n;
                }
    }
    return out;
}

inline DensityGrid rasterize_density(const PointCloud& cloud, const GridConfig& grid) {
    return rasterize_density<double>(cloud.points, grid);
}

inline void require_same_config(const GridConfig& a, const GridConfig& b) {
    if (a.resolution != b.resolution || a.cell_size != b.cell_size ||
        a.origin.x != b.origin.x || a.origin.y != b.origin.y || a.origin.z != b.origin.z)
        throw precondition_error("density_l1: mismatched grid configurations");
}

// Sum over cells of |a - b|, scaled by the density-loss weight.
template <class T>
T density_l1(const DensityGridT<T>& a, const DensityGrid& b,
             double weight = kDensityLossWeight) {
    require_same_config(a.config, b.config);
    T sum(0);
    for (std::size_t i = 0; i < a.values.size(); ++i) sum += abs(a.values[i] - T(b.values[i]));
    return sum * T(weight);
}

enum class LossMode { all_steps, last_step };

inline LossMode loss_mode_from_string(const std::string& s) {
    if (s == "all_steps") return LossMode::all_steps;
    if (s == "last_step") return LossMode::last_step;
    throw precondition_error("unknown loss mode '" + s + "' (expected all_steps or last_step)");
}

inline const char* to_string(LossMode m) {
    return m == LossMode::all_steps ? "all_steps" : "last_step";
}

// all_steps: mean of per-frame L1 losses; last_step: final frames only.
inline double trajectory_density_loss(const Trajectory& sim, const Demonstration& demo,
                                      LossMode mode, const GridConfig& grid) {
    demo.validate();
    if (sim.frames.empty()) throw precondition_error("trajectory_density_loss: empty trajectory");
    if (mode == LossMode::all_steps) {
        if (sim.frames.size() != demo.frames.size())
            throw precondition_error("trajectory_density_loss: frame-count mismatch (" +
                                     std::to_string(sim.frames.size()) + " vs " +
                                     std::to_string(demo.frames.size()) + ")");
        double sum = 0.0;
        for (std::size_t f = 0; f < sim.frames.size(); ++f) {
            const auto a = rasterize_density<double>(sim.frames[f], grid);
            const auto b = rasterize_density(demo.frames[f], grid);
            sum += density_l1(a, b);
        }
        return sum / static_cast<double>(sim.frames.size());
    }
    const auto a = rasterize_density<double>(sim.frames.back(), grid);
    const auto b = rasterize_density(demo.frames.back(), grid);
    return density_l1(a, b);
}

namespace detail {

// Uniform-cell spatial index for nearest-neighbor queries.
class PointGrid {
public:
    explicit PointGrid(const std::vector<Vec3d>& pts) : pts_(pts) {
        lo_ = hi_ = pts[0];
        for (const auto& p : pts) {
            lo_.x = std::min(lo_.x, p.x); lo_.y = std::min(lo_.y, p.y); lo_.z = std::min(lo_.z, p.z);
            hi_.x = std::max(hi_.x, p.x); hi_.y = std::max(hi_.y, p.y); hi_.z = std::max(hi_.z, p.z);
        }
        const double diag = std::max({hi_.x - lo_.x, hi_.y - lo_.y, hi_.z - lo_.z});
        const int target = std::max(1, static_cast<int>(std::cbrt(static_cast<double>(pts.size()))));
        cell_ = diag > 0.0 ? diag / target : 1.0;
        for (int a = 0; a < 3; ++a)
            dims_[a] = std::max(1, static_cast<int>(std::floor((hi_[a] - lo_[a]) / cell_)) + 1);
        cells_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2], {});
        for (std::size_t i = 0; i < pts.size(); ++i)
            cells_[cell_index(coord(pts[i], 0), coord(pts[i], 1), coord(pts[i], 2))].push_back(i);
    }

    // Nearest-neighbor distance by expanding ring search: ring r is conclusive
    // once best <= r * cell (every unvisited cell is at least that far away).
    double nearest_distance(const Vec3d& q) const {
        const int ci = coord(q, 0), cj = coord(q, 1), ck = coord(q, 2);
        double best = std::numeric_limits<double>::infinity();
        const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});
        for (int ring = 0; ring <= max_ring; ++ring) {
            if (best <= (ring - 1) * cell_ && ring > 0) break;
            bool any = false;
            for (int i = ci - ring; i <= ci + ring; ++i) {
                if (i < 0 || i >= dims_[0]) continue;
                for (int j = cj - ring; j <= cj + ring; ++j) {
                    if (j < 0 || j >= dims_[1]) continue;
                    for (int k = ck - ring; k <= ck + ring; ++k) {
                        if (k < 0 || k >= dims_[2]) continue;
                        // Only the shell of the ring is new.
                        if (ring > 0 && std::abs(i - ci) != ring && std::abs(j - cj) != ring &&
                            std::abs(k - ck) != ring)
                            continue;
                        any = true;
                        for (const std::size_t idx : cells_[cell_index(i, j, k)])
                            best = std::min(best, distance(q, pts_[idx]));
                    }
                }
            }
            if (!any && ring >= max_ring) break;
        }
        return best;
    }

private:
    int coord(const Vec3d& p, int a) const {
        int c = static_cast<int>(std::floor((p[a] - lo_[a]) / cell_));
        return std::clamp(c, 0, dims_[a] - 1);
    }
    std::size_t cell_index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k;
    }

    const std::vector<Vec3d>& pts_;
    Vec3d lo_{}, hi_{};
    double cell_ = 1.0;
    int dims_[3] = {1, 1, 1};
    std::vector<std::vector<std::size_t>> cells_;
};

}  // namespace detail

// Symmetric Chamfer distance: (mean_a nn_b + mean_b nn_a) / 2, plain Euclidean
// distances (not squared).
inline double chamfer(const PointCloud& a, const PointCloud& b) {
    if (a.points.empty() || b.points.empty())
        throw precondition_error("chamfer: point clouds must be nonempty");
    const detail::PointGrid ga(a.points), gb(b.points);
    // Accumulate in lexicographic point order so the result is bit-identical
    // under permutations of either cloud.
    auto one_way = [](const std::vector<Vec3d>& from, const detail::PointGrid& to) {
        std::vector<double> d;
        d.reserve(from.size());
        for (const auto& p : from) d.push_back(to.nearest_distance(p));
        std::sort(d.begin(), d.end());
        double sum = 0.0;
        for (double x : d) sum += x;
        return sum / static_cast<double>(from.size());
    };
    return 0.5 * (one_way(a.points, gb) + one_way(b.points, ga));
}

}  // namespace ropeid
