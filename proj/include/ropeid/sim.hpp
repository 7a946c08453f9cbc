#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ropeid/errors.hpp"
#include "ropeid/grid.hpp"
#include "ropeid/linalg.hpp"
#include "ropeid/material.hpp"
#include "ropeid/rng.hpp"

namespace ropeid {

struct GripperCommand {
    bool active = false;
    Vec3d center{0.0, 0.0, 0.0};
    Vec3d velocity{0.0, 0.0, 0.0};
    double grasp_radius = 0.015;  // m

    void validate() const {
        if (active && !(grasp_radius > 0.0))
            throw precondition_error("GripperCommand: grasp_radius must be > 0 when active");
    }
};

// Gravity, floor plane and domain boundary conditions.
struct Environment {
    Vec3d gravity{0.0, 0.0, -9.8};
    double floor_z = 0.03;     // grid nodes at or below this height are sticky
    bool floor_enabled = true;
};

struct RopeGeometry {
    Vec3d anchor{0.05, 0.32, 0.035};  // grasped end
    Vec3d axis{1.0, 0.0, 0.0};        // unit direction from anchor to free end
    double length = 0.30;             // m
    double radius = 0.005;            // m
    int particle_count = 1500;
    double mass_density = 1000.0;     // kg/m^3

    void validate() const {
        if (!(length > 0.0)) throw precondition_error("RopeGeometry: length must be > 0");
        if (!(radius > 0.0)) throw precondition_error("RopeGeometry: radius must be > 0");
        if (particle_count < 100)
            throw precondition_error("RopeGeometry: particle_count must be >= 100");
        if (!(mass_density > 0.0))
            throw precondition_error("RopeGeometry: mass_density must be > 0");
    }
};

// Full particle state at one substep, templated on the scalar so tangent
// rollouts reuse the same stepping code.
template <class T>
struct SimState {
    std::vector<Vec3<T>> positions;               // m
    std::vector<Vec3<T>> velocities;              // m/s
    std::vector<Mat3<T>> deformation_gradients;
    std::vector<Mat3<T>> affine_fields;           // APIC/MLS C matrices, 1/s
    double particle_mass = 0.0;                   // kg, uniform
    double particle_volume = 0.0;                 // m^3, uniform
    double time = 0.0;                            // s

    int size() const { return static_cast<int>(positions.size()); }
};

// One frame = particle positions snapshot.
struct Trajectory {
    std::vector<std::vector<Vec3d>> frames;
    std::vector<double> frame_times;
};

// Explicit-MPM stability bound: dt <= c * h / sqrt(E/rho), c = 0.3.
inline void check_stability(double dt, const GridConfig& grid, double youngs, double density) {
    const double bound = 0.3 * grid.cell_size / std::sqrt(youngs / density);
    if (dt > bound)
        throw precondition_error("dt " + std::to_string(dt) + " exceeds stability bound " +
                                 std::to_string(bound) + " for E=" + std::to_string(youngs));
}

// Particles fill the cylinder: stratified along the axis (index order runs
// anchor -> free end, so the bottom tip is the last particle), random radial
// offset within the cross-section.  Deterministic for a fixed seed.
template <class T = double>
SimState<T> init_rope(const RopeGeometry& geom, const GridConfig& grid,
                      const MaterialParams& params, std::uint64_t seed = 0) {
    geom.validate();
    grid.validate();
    params.validate();

    // Orthonormal frame around the axis.
    const Vec3d a = geom.axis * (1.0 / norm(geom.axis));
    Vec3d ref = std::abs(a.z) < 0.9 ? Vec3d{0.0, 0.0, 1.0} : Vec3d{1.0, 0.0, 0.0};
    Vec3d e1{a.y * ref.z - a.z * ref.y, a.z * ref.x - a.x * ref.z, a.x * ref.y - a.y * ref.x};
    e1 *= 1.0 / norm(e1);
    const Vec3d e2{a.y * e1.z - a.z * e1.y, a.z * e1.x - a.x * e1.z, a.x * e1.y - a.y * e1.x};

    Rng rng(seed);
    SimState<T> state;
    const int n = geom.particle_count;
    state.positions.reserve(n);
    state.velocities.assign(n, Vec3<T>{});
    state.deformation_gradients.assign(n, Mat3<T>::identity());
    state.affine_fields.assign(n, Mat3<T>::zero());

    const double pi = 3.14159265358979323846;
    state.particle_volume = pi * geom.radius * geom.radius * geom.length / n;
    state.particle_mass = geom.mass_density * state.particle_volume;

    for (int i = 0; i < n; ++i) {
        const double t = (i + 0.5) / n * geom.length;
        const double r = geom.radius * std::sqrt(rng.uniform01());
        const double theta = 2.0 * pi * rng.uniform01();
        const Vec3d p = geom.anchor + a * t + e1 * (r * std::cos(theta)) + e2 * (r * std::sin(theta));
        if (!grid.inside_margin(p))
            throw precondition_error("init_rope: geometry leaves the grid domain margin at particle " +
                                     std::to_string(i));
        state.positions.push_back(Vec3<T>{T(p.x), T(p.y), T(p.z)});
    }
    return state;
}

namespace detail {

// Dense node scratch reused across substeps; only the touched region is
// cleared.  Single logical simulation per scalar type at a time.
template <class T>
struct GridScratch {
    int resolution = 0;
    std::vector<T> mass;
    std::vector<Vec3<T>> momentum;

    void ensure(int res) {
        if (res != resolution) {
            resolution = res;
            mass.assign(static_cast<std::size_t>(res) * res * res, T(0));
            momentum.assign(static_cast<std::size_t>(res) * res * res, Vec3<T>{});
        }
    }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * resolution + j) * resolution + k;
    }

    static GridScratch& instance() {
        static thread_local GridScratch scratch;
        return scratch;
    }
};

}  // namespace detail

// One MLS-MPM substep in place: particle-to-grid scatter with the quadratic
// kernel and fixed-corotated stress, grid momentum update with gravity plus
// sticky floor/boundary conditions, grid-to-particle gather, advection and
// deformation-gradient update.  Particles inside the gripper radius get their
// velocity overwritten by the gripper velocity.
template <class T>
void substep_inplace(SimState<T>& state, const T& youngs, const T& poisson,
                     const GripperCommand& gripper, const GridConfig& grid,
                     const Environment& env, double dt) {
    gripper.validate();
    const auto lame = lame_from_material<T>(youngs, poisson);
    const int n = state.size();
    const int res = grid.resolution;
    const double h = grid.cell_size;
    const double inv_h = 1.0 / h;

    // Touched node region from the particle bounding box; also the margin check.
    int lo[3] = {res, res, res}, hi[3] = {-1, -1, -1};
    for (int p = 0; p < n; ++p) {
        const Vec3d pos{primal(state.positions[p].x), primal(state.positions[p].y),
                        primal(state.positions[p].z)};
        if (!grid.inside_margin(pos))
            throw out_of_domain_error("substep: particle " + std::to_string(p) +
                                          " left the grid margin at t=" + std::to_string(state.time),
                                      p, state.time);
        for (int a = 0; a < 3; ++a) {
            const int base = static_cast<int>(std::floor((pos[a] - grid.origin[a]) * inv_h - 0.5));
            lo[a] = std::min(lo[a], base);
            hi[a] = std::max(hi[a], base + 2);
        }
    }

    auto& scratch = detail::GridScratch<T>::instance();
    scratch.ensure(res);
    for (int i = lo[0]; i <= hi[0]; ++i)
        for (int j = lo[1]; j <= hi[1]; ++j)
            for (int k = lo[2]; k <= hi[2]; ++k) {
                const std::size_t idx = scratch.index(i, j, k);
                scratch.mass[idx] = T(0);
                scratch.momentum[idx] = Vec3<T>{};
            }

    const T mass_p(state.particle_mass);
    // Stress contribution folded into the MLS-MPM affine scatter:
    // -(4 dt V / h^2) * (2 mu (F - R) F^T + lambda (J - 1) J I).
    const T stress_scale(-4.0 * dt * state.particle_volume * inv_h * inv_h);

    for (int p = 0; p < n; ++p) {
        int base[3];
        T fx[3], w[3][3];
        base_and_offsets(state.positions[p], grid, base, fx);
        for (int a = 0; a < 3; ++a) kernel_weights(fx[a], w[a]);

        const Mat3<T>& f = state.deformation_gradients[p];
        const Mat3<T> r = polar_rotation(f);
        const T j_det = determinant(f);
        Mat3<T> stress = (f - r) * (T(2) * lame.mu) * transpose(f);
        const T pressure = lame.lambda * (j_det - T(1)) * j_det;
        stress(0, 0) += pressure;
        stress(1, 1) += pressure;
        stress(2, 2) += pressure;
        const Mat3<T> affine = stress * stress_scale + state.affine_fields[p] * mass_p;

        const Vec3<T> mom_p = state.velocities[p] * mass_p;
        for (int di = 0; di < 3; ++di)
            for (int dj = 0; dj < 3; ++dj)
                for (int dk = 0; dk < 3; ++dk) {
                    const T weight = w[0][di] * w[1][dj] * w[2][dk];
                    const Vec3<T> dpos{(T(static_cast<double>(di)) - fx[0]) * T(h),
                                       (T(static_cast<double>(dj)) - fx[1]) * T(h),
                                       (T(static_cast<double>(dk)) - fx[2]) * T(h)};
                    const std::size_t idx = scratch.index(base[0] + di, base[1] + dj, base[2] + dk);
                    scratch.mass[idx] += weight * mass_p;
                    scratch.momentum[idx] += weight * (mom_p + affine * dpos);
                }
    }

    // Grid momentum update.  Sticky conditions zero the full velocity (and,
    // for tangent runs, its derivative: subgradient convention).
    for (int i = lo[0]; i <= hi[0]; ++i)
        for (int j = lo[1]; j <= hi[1]; ++j)
            for (int k = lo[2]; k <= hi[2]; ++k) {
                const std::size_t idx = scratch.index(i, j, k);
                if (!(primal(scratch.mass[idx]) > 0.0)) continue;
                Vec3<T> v = scratch.momentum[idx];
                v.x = v.x / scratch.mass[idx];
                v.y = v.y / scratch.mass[idx];
                v.z = v.z / scratch.mass[idx];
                v.x += T(env.gravity.x * dt);
                v.y += T(env.gravity.y * dt);
                v.z += T(env.gravity.z * dt);
                const double node_z = grid.origin.z + k * h;
                const bool boundary = i < 2 || i > res - 3 || j < 2 || j > res - 3 ||
                                      k < 2 || k > res - 3;
                if (boundary || (env.floor_enabled && node_z <= env.floor_z)) v = Vec3<T>{};
                scratch.momentum[idx] = v;  // now holds velocity
            }

    const T c_scale(4.0 * inv_h * inv_h);
    const double grasp_r2 = gripper.grasp_radius * gripper.grasp_radius;
    for (int p = 0; p < n; ++p) {
        int base[3];
        T fx[3], w[3][3];
        base_and_offsets(state.positions[p], grid, base, fx);
        for (int a = 0; a < 3; ++a) kernel_weights(fx[a], w[a]);

        Vec3<T> v_new{};
        Mat3<T> b_new = Mat3<T>::zero();
        for (int di = 0; di < 3; ++di)
            for (int dj = 0; dj < 3; ++dj)
                for (int dk = 0; dk < 3; ++dk) {
                    const T weight = w[0][di] * w[1][dj] * w[2][dk];
                    const Vec3<T> dpos{(T(static_cast<double>(di)) - fx[0]) * T(h),
                                       (T(static_cast<double>(dj)) - fx[1]) * T(h),
                                       (T(static_cast<double>(dk)) - fx[2]) * T(h)};
                    const Vec3<T>& vi =
                        scratch.momentum[scratch.index(base[0] + di, base[1] + dj, base[2] + dk)];
                    v_new += vi * weight;
                    b_new += outer(vi * weight, dpos);
                }
        Mat3<T> c_new = b_new * c_scale;

        if (gripper.active) {
            const double dx = primal(state.positions[p].x) - gripper.center.x;
            const double dy = primal(state.positions[p].y) - gripper.center.y;
            const double dz = primal(state.positions[p].z) - gripper.center.z;
            if (dx * dx + dy * dy + dz * dz <= grasp_r2) {
                // Kinematic constraint, parameter-independent: zero tangent.
                v_new = Vec3<T>{T(gripper.velocity.x), T(gripper.velocity.y),
                                T(gripper.velocity.z)};
            }
        }

        state.velocities[p] = v_new;
        state.affine_fields[p] = c_new;
        state.positions[p] += v_new * T(dt);
        const Mat3<T> f_new = (Mat3<T>::identity() + c_new * T(dt)) * state.deformation_gradients[p];
        state.deformation_gradients[p] = f_new;
    }
    state.time += dt;
}

template <class T>
SimState<T> substep(const SimState<T>& state, const T& youngs, const T& poisson,
                    const GripperCommand& gripper, const GridConfig& grid,
                    const Environment& env, double dt) {
    SimState<T> next = state;
    substep_inplace(next, youngs, poisson, gripper, grid, env, dt);
    return next;
}

inline SimState<double> substep(const SimState<double>& state, const MaterialParams& params,
                                const GripperCommand& gripper, const GridConfig& grid,
                                const Environment& env, double dt) {
    return substep<double>(state, params.youngs_modulus, params.poissons_ratio, gripper, grid,
                           env, dt);
}

inline std::vector<Vec3d> snapshot(const SimState<double>& state) { return state.positions; }

template <class T>
std::vector<Vec3d> snapshot(const SimState<T>& state) {
    std::vector<Vec3d> out;
    out.reserve(state.positions.size());
    for (const auto& p : state.positions)
        out.push_back({primal(p.x), primal(p.y), primal(p.z)});
    return out;
}

// Runs one script frame: the gripper center advances with its velocity every
// substep so grasped particles track it exactly.
template <class T>
void run_frame(SimState<T>& state, const GripperCommand& cmd, const T& youngs, const T& poisson,
               const GridConfig& grid, const Environment& env, int substeps, double dt) {
    GripperCommand g = cmd;
    for (int s = 0; s < substeps; ++s) {
        substep_inplace(state, youngs, poisson, g, grid, env, dt);
        if (g.active) g.center += g.velocity * dt;
    }
}

// Frame-by-frame rollout; snapshots are taken after each frame's substeps.
inline Trajectory run_script(SimState<double>& state, const std::vector<GripperCommand>& script,
                             const MaterialParams& params, const GridConfig& grid,
                             const Environment& env, int frames, int substeps_per_frame,
                             double dt) {
    if (static_cast<int>(script.size()) != frames)
        throw precondition_error("run_script: script length " + std::to_string(script.size()) +
                                 " != frames " + std::to_string(frames));
    params.validate();
    Trajectory traj;
    traj.frames.reserve(frames);
    for (int f = 0; f < frames; ++f) {
        try {
            run_frame(state, script[f], params.youngs_modulus, params.poissons_ratio, grid, env,
                      substeps_per_frame, dt);
        } catch (const out_of_domain_error& e) {
            throw numeric_error(std::string(e.what()) + " (frame " + std::to_string(f) + ")");
        }
        traj.frames.push_back(snapshot(state));
        traj.frame_times.push_back(state.time);
    }
    return traj;
}

}  // namespace ropeid
