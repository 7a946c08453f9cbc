#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ropeid/density.hpp"
#include "ropeid/dual.hpp"
#include "ropeid/material.hpp"
#include "ropeid/scripts.hpp"
#include "ropeid/sim.hpp"

namespace ropeid {

// Forward tangent mode with two tangent directions (d/dE, d/dnu).  The state
// simply runs on Dual2 scalars; its value components are bit-identical to an
// untracked double rollout.
using TangentState = SimState<Dual2>;

inline TangentState make_tangent(const SimState<double>& state) {
    TangentState t;
    t.particle_mass = state.particle_mass;
    t.particle_volume = state.particle_volume;
    t.time = state.time;
    const int n = state.size();
    t.positions.reserve(n);
    t.velocities.reserve(n);
    t.deformation_gradients.reserve(n);
    t.affine_fields.reserve(n);
    for (int i = 0; i < n; ++i) {
        const auto& p = state.positions[i];
        const auto& v = state.velocities[i];
        t.positions.push_back({Dual2(p.x), Dual2(p.y), Dual2(p.z)});
        t.velocities.push_back({Dual2(v.x), Dual2(v.y), Dual2(v.z)});
        Mat3<Dual2> f, c;
        for (int k = 0; k < 9; ++k) {
            f.m[k] = Dual2(state.deformation_gradients[i].m[k]);
            c.m[k] = Dual2(state.affine_fields[i].m[k]);
        }
        t.deformation_gradients.push_back(f);
        t.affine_fields.push_back(c);
    }
    return t;
}

inline SimState<double> extract_primal(const TangentState& t) {
    SimState<double> s;
    s.particle_mass = t.particle_mass;
    s.particle_volume = t.particle_volume;
    s.time = t.time;
    const int n = t.size();
    for (int i = 0; i < n; ++i) {
        const auto& p = t.positions[i];
        const auto& v = t.velocities[i];
        s.positions.push_back({p.x.v, p.y.v, p.z.v});
        s.velocities.push_back({v.x.v, v.y.v, v.z.v});
        Mat3<double> f, c;
        for (int k = 0; k < 9; ++k) {
            f.m[k] = t.deformation_gradients[i].m[k].v;
            c.m[k] = t.affine_fields[i].m[k].v;
        }
        s.deformation_gradients.push_back(f);
        s.affine_fields.push_back(c);
    }
    return s;
}

inline void check_tangent_finite(const TangentState& t, const std::string& where) {
    for (const auto& p : t.positions)
        for (int a = 0; a < 3; ++a) {
            const Dual2& d = p[a];
            if (!std::isfinite(d.v) || !std::isfinite(d.dE) || !std::isfinite(d.dN))
                throw numeric_error("non-finite tangent in " + where + " at t=" +
                                    std::to_string(t.time));
        }
}

inline TangentState substep_with_tangent(const TangentState& tstate, const MaterialParams& params,
                                         const GripperCommand& gripper, const GridConfig& grid,
                                         const Environment& env, double dt) {
    Dual2 youngs, poisson;
    seed_material(params, youngs, poisson);
    TangentState next = tstate;
    substep_inplace(next, youngs, poisson, gripper, grid, env, dt);
    check_tangent_finite(next, "substep_with_tangent");
    return next;
}

struct GradientResult {
    double loss = 0.0;
    double d_loss_dE = 0.0;
    double d_loss_dNu = 0.0;
};

inline void check_alignment(const Demonstration& demo, const ActionScript& script) {
    demo.validate();
    script.validate();
    if (static_cast<int>(demo.frames.size()) != script.frames())
        throw precondition_error("demo has " + std::to_string(demo.frames.size()) +
                                 " frames but script has " + std::to_string(script.frames()));
    for (int f = 0; f < script.frames(); ++f) {
        const double expected = (f + 1) * script.frame_duration();
        if (std::abs(demo.frame_times[f] - expected) > 1e-9 + 1e-9 * expected)
            throw precondition_error("demo frame " + std::to_string(f) + " at t=" +
                                     std::to_string(demo.frame_times[f]) +
                                     " does not align with script time " + std::to_string(expected));
    }
}

// Loss and exact tangent-propagated gradients of the grid-density loss of a
// scripted rollout against a demonstration.  Demo grids may be passed in
// pre-rasterized (the estimator reuses them across iterations).
inline GradientResult loss_gradient(const Demonstration& demo, const MaterialParams& candidate,
                                    const ActionScript& script, LossMode mode,
                                    const GridConfig& grid, const Environment& env,
                                    const SimState<double>& initial,
                                    const std::vector<DensityGrid>* demo_grids = nullptr) {
    check_alignment(demo, script);
    candidate.validate();

    std::vector<DensityGrid> local;
    if (!demo_grids) {
        if (mode == LossMode::all_steps)
            for (const auto& f : demo.frames) local.push_back(rasterize_density(f, grid));
        else
            local.push_back(rasterize_density(demo.frames.back(), grid));
        demo_grids = &local;
    }

    Dual2 youngs, poisson;
    seed_material(candidate, youngs, poisson);
    TangentState state = make_tangent(initial);

    Dual2 loss(0.0);
    const int frames = script.frames();
    for (int f = 0; f < frames; ++f) {
        run_script_frame(state, script, f, youngs, poisson, grid, env);
        if (mode == LossMode::all_steps) {
            const auto sim_grid = rasterize_density<Dual2>(state.positions, grid);
            loss += density_l1(sim_grid, (*demo_grids)[f]);
        } else if (f == frames - 1) {
            const auto sim_grid = rasterize_density<Dual2>(state.positions, grid);
            loss += density_l1(sim_grid, demo_grids->back());
        }
    }
    if (mode == LossMode::all_steps) loss = loss / Dual2(static_cast<double>(frames));

    if (!std::isfinite(loss.v) || !std::isfinite(loss.dE) || !std::isfinite(loss.dN))
        throw numeric_error("loss_gradient: non-finite loss or gradient");
    return {loss.v, loss.dE, loss.dN};
}

// Primal-only loss of the same rollout.
inline double rollout_loss(const Demonstration& demo, const MaterialParams& candidate,
                           const ActionScript& script, LossMode mode, const GridConfig& grid,
                           const Environment& env, const SimState<double>& initial) {
    check_alignment(demo, script);
    candidate.validate();
    SimState<double> state = initial;
    const Trajectory traj = run_script(state, script, candidate, grid, env);
    return trajectory_density_loss(traj, demo, mode, grid);
}

// Central finite differences of the primal loss; the validation oracle for
// the tangent path.
inline std::pair<double, double> finite_difference_gradient(
    const Demonstration& demo, const MaterialParams& candidate, const ActionScript& script,
    LossMode mode, const GridConfig& grid, const Environment& env,
    const SimState<double>& initial, double delta_e, double delta_nu) {
    auto perturbed = [&](double de, double dnu) {
        MaterialParams p = candidate;
        p.youngs_modulus += de;
        p.poissons_ratio += dnu;
        p.validate();
        return rollout_loss(demo, p, script, mode, grid, env, initial);
    };
    const double ge = (perturbed(delta_e, 0.0) - perturbed(-delta_e, 0.0)) / (2.0 * delta_e);
    const double gn = (perturbed(0.0, delta_nu) - perturbed(0.0, -delta_nu)) / (2.0 * delta_nu);
    return {ge, gn};
}

}  // namespace ropeid
