#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ropeid/density.hpp"
#include "ropeid/estimator.hpp"
#include "ropeid/material.hpp"
#include "ropeid/policy.hpp"
#include "ropeid/rng.hpp"
#include "ropeid/scripts.hpp"
#include "ropeid/sim.hpp"

namespace ropeid {

// The casting primitive: move the held rope end along a straight line to the
// release coordinate, release, and measure how far the bottom tip reaches.
// The release coordinate r = (x, z) lives in a desk-local frame: world
// position is (frame_x + r.x, start_pose.y, floor_z + r.z) and the reported
// goal is the world tip reach minus frame_x.  The offset leaves clearance
// behind the start pose for the backward pendulum swing of the hanging rope.
struct CastConfig {
    Vec3d start_pose{0.15, 0.32, 0.33};  // m, world frame
    double cast_speed = 0.6;             // m/s along the path
    double flight_time = 0.4;            // s after release
    // The box is restricted to release heights above the sagging length of
    // the softest rope (a soft rope whose tip drags on the sticky floor never
    // develops a cast) and to the slab where the reach map responds smoothly
    // to the release coordinate across the whole stiffness range.
    std::array<double, 2> release_lo{0.05, 0.14};  // workspace box for r = (x, z)
    std::array<double, 2> release_hi{0.15, 0.18};
    double dt = 4e-4;                    // s, substep
    double frame_x = 0.10;               // m, desk-frame x offset
    int goal_axis = 0;                   // x

    void validate() const {
        if (!(flight_time > 0.0)) throw precondition_error("CastConfig: flight_time must be > 0");
        if (!(dt > 0.0)) throw precondition_error("CastConfig: dt must be > 0");
        if (cast_speed < 0.0) throw precondition_error("CastConfig: cast_speed must be >= 0");
        for (int i = 0; i < 2; ++i)
            if (!(release_hi[i] >= release_lo[i]))
                throw precondition_error("CastConfig: empty workspace box");
    }

    bool release_in_workspace(const std::array<double, 2>& r) const {
        return r[0] >= release_lo[0] && r[0] <= release_hi[0] && r[1] >= release_lo[1] &&
               r[1] <= release_hi[1];
    }
};

// Straight-line approach at cast_speed (trapezoidal ramp over the first 10%
// of the path), release exactly at r, then free flight.  Returns the running
// maximum of the bottom tip's coordinate along goal_axis over the flight
// window, expressed in the desk frame.  The rope hangs from the gripper:
// cast_speed = 0 skips the approach and drops the rope from the release
// point.  If the rope leaves the tracked grid volume mid-flight, the flight
// ends there and the reach recorded so far is returned.
inline double cast_rollout(const MaterialParams& params, const std::array<double, 2>& release,
                           const CastConfig& cast, const GridConfig& grid,
                           const Environment& env, const RopeGeometry& geometry,
                           std::uint64_t seed = 0) {
    cast.validate();
    params.validate();
    if (!cast.release_in_workspace(release))
        throw precondition_error("cast_rollout: release outside the workspace box");
    check_stability(cast.dt, grid, params.youngs_modulus, geometry.mass_density);

    const Vec3d release_pos{cast.frame_x + release[0], cast.start_pose.y,
                            env.floor_z + release[1]};
    RopeGeometry geom = geometry;
    geom.axis = {0.0, 0.0, -1.0};
    geom.anchor = cast.cast_speed > 0.0 ? cast.start_pose : release_pos;
    SimState<double> state = init_rope(geom, grid, params, seed);
    const int tip = geom.particle_count - 1;  // initially farthest from the grasp

    GripperCommand grip;
    grip.active = true;
    grip.center = geom.anchor;

    double max_reach = state.positions[tip][cast.goal_axis];
    if (cast.cast_speed > 0.0) {
        const Vec3d path = release_pos - cast.start_pose;
        const double total = norm(path);
        const Vec3d dir = total > 0.0 ? path * (1.0 / total) : Vec3d{1.0, 0.0, 0.0};
        // Constant acceleration covering the first 10% of the path, then
        // constant cast_speed.
        const double accel = cast.cast_speed * cast.cast_speed / (0.2 * total);
        double speed = 0.0, arc = 0.0;
        while (arc < total) {
            speed = std::min(cast.cast_speed, speed + accel * cast.dt);
            grip.velocity = dir * speed;
            substep_inplace(state, params.youngs_modulus, params.poissons_ratio, grip, grid, env,
                            cast.dt);
            arc += speed * cast.dt;
            grip.center = cast.start_pose + dir * std::min(arc, total);
        }
    }

    grip.active = false;
    const int flight_steps = static_cast<int>(std::ceil(cast.flight_time / cast.dt));
    for (int s = 0; s < flight_steps; ++s) {
        try {
            substep_inplace(state, params.youngs_modulus, params.poissons_ratio, grip, grid, env,
                            cast.dt);
        } catch (const out_of_domain_error&) {
            // The rope flew past the tracked volume; its reach is at least
            // what we have recorded, so stop the flight here.
            break;
        }
        max_reach = std::max(max_reach, state.positions[tip][cast.goal_axis]);
    }
    return max_reach - cast.frame_x;
}

// n rows of (E, nu, release) sampled uniformly, goal measured by cast_rollout.
// Each row owns a derived RNG stream, so the dataset is byte-identical for a
// fixed seed.  Rows whose rollout leaves the domain are re-sampled up to 10
// times.
inline std::vector<DatasetRow> generate_dataset(int n, const ParameterBounds& ranges,
                                                const CastConfig& cast, const GridConfig& grid,
                                                const Environment& env,
                                                const RopeGeometry& geometry,
                                                std::uint64_t seed) {
    if (n < 1) throw precondition_error("generate_dataset: n must be >= 1");
    ranges.validate();
    std::vector<DatasetRow> rows;
    rows.reserve(n);
    for (int i = 0; i < n; ++i) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i));
        bool done = false;
        for (int attempt = 0; attempt < 10 && !done; ++attempt) {
            DatasetRow row;
            row.youngs = rng.uniform(ranges.e_min, ranges.e_max);
            row.poisson = rng.uniform(ranges.nu_min, ranges.nu_max);
            row.release = {rng.uniform(cast.release_lo[0], cast.release_hi[0]),
                           rng.uniform(cast.release_lo[1], cast.release_hi[1])};
            try {
                row.goal = cast_rollout({row.youngs, row.poisson}, row.release, cast, grid, env,
                                        geometry);
            } catch (const out_of_domain_error&) {
                continue;
            }
            rows.push_back(row);
            done = true;
        }
        if (!done)
            throw numeric_error("generate_dataset: row " + std::to_string(i) +
                                " failed 10 rollout attempts");
    }
    return rows;
}

// Pseudo-real demonstration: lifting-script rollout turned into point clouds
// with optional Gaussian perturbation, random subsampling and point-order
// shuffling.
inline Demonstration make_synthetic_demo(const MaterialParams& params, const ActionScript& script,
                                         const RopeGeometry& geometry, const GridConfig& grid,
                                         const Environment& env, double noise_sd,
                                         double subsample_fraction, std::uint64_t seed) {
    if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0))
        throw precondition_error("make_synthetic_demo: subsample_fraction must be in (0, 1]");
    check_stability(script.dt, grid, params.youngs_modulus, geometry.mass_density);
    SimState<double> state = init_rope(geometry, grid, params);
    const Trajectory traj = run_script(state, script, params, grid, env);

    Rng rng = Rng::derive(seed, 0xDE30);
    Demonstration demo;
    demo.script_id = script.id;
    demo.frame_times = traj.frame_times;
    for (const auto& frame : traj.frames) {
        std::vector<std::size_t> order(frame.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle(order, rng);
        const std::size_t keep = std::max<std::size_t>(
            1, static_cast<std::size_t>(frame.size() * subsample_fraction));
        PointCloud cloud;
        cloud.points.reserve(keep);
        for (std::size_t i = 0; i < keep; ++i) {
            Vec3d p = frame[order[i]];
            if (noise_sd > 0.0) {
                p.x += rng.normal(0.0, noise_sd);
                p.y += rng.normal(0.0, noise_sd);
                p.z += rng.normal(0.0, noise_sd);
            }
            cloud.points.push_back(p);
        }
        demo.frames.push_back(std::move(cloud));
    }
    return demo;
}

}  // namespace ropeid
