#pragma once

#include <cmath>
#include <string>

#include "ropeid/errors.hpp"
#include "ropeid/linalg.hpp"

namespace ropeid {

// Background grid shared by the simulator and the density rasterizer.
// Defaults give one cell per centimeter over a 0.64 m cube.
struct GridConfig {
    int resolution = 64;       // nodes per axis
    double cell_size = 0.01;   // m
    Vec3d origin{0.0, 0.0, 0.0};

    void validate() const {
        if (resolution < 8) throw precondition_error("GridConfig: resolution must be >= 8");
        if (!(cell_size > 0.0)) throw precondition_error("GridConfig: cell_size must be > 0");
    }

    double extent() const { return resolution * cell_size; }

    // Valid particle region: two cells of margin on every face.
    bool inside_margin(const Vec3d& p) const {
        const double lo = 2.0 * cell_size;
        const double hi = extent() - 2.0 * cell_size;
        const Vec3d q = p - origin;
        return q.x >= lo && q.x <= hi && q.y >= lo && q.y <= hi && q.z >= lo && q.z <= hi;
    }
};

// Quadratic B-spline weights for a fractional offset f in [0.5, 1.5]:
// low node 0.5*(1.5-f)^2, center node 0.75-(f-1)^2, high node 0.5*(f-0.5)^2.
// The three weights form a partition of unity.
template <class T>
void kernel_weights(const T& f, T w[3]) {
    const double fp = primal(f);
    if (!(fp >= 0.5 && fp <= 1.5))
        throw precondition_error("kernel_weights: offset " + std::to_string(fp) +
                                 " outside [0.5, 1.5]; base-node computation bug");
    const T a = T(1.5) - f;
    const T b = f - T(1.0);
    const T c = f - T(0.5);
    w[0] = T(0.5) * a * a;
    w[1] = T(0.75) - b * b;
    w[2] = T(0.5) * c * c;
}

// Base node and per-axis fractional offsets for a particle position.
// base = floor(x/h - 0.5); the offsets land in [0.5, 1.5] by construction.
template <class T>
void base_and_offsets(const Vec3<T>& pos, const GridConfig& grid, int base[3], T fx[3]) {
    const double inv_h = 1.0 / grid.cell_size;
    for (int a = 0; a < 3; ++a) {
        const T coord = (pos[a] - T(grid.origin[a])) * T(inv_h);
        base[a] = static_cast<int>(std::floor(primal(coord) - 0.5));
        fx[a] = coord - T(static_cast<double>(base[a]));
    }
}

}  // namespace ropeid
