#pragma once

#include <string>
#include <vector>

#include "ropeid/sim.hpp"

namespace ropeid {

// Predefined gripper action: one command per frame plus the stepping scheme.
struct ActionScript {
    std::string id;
    std::vector<GripperCommand> commands;
    int substeps_per_frame = 40;
    double dt = 1e-4;

    int frames() const { return static_cast<int>(commands.size()); }
    double frame_duration() const { return substeps_per_frame * dt; }

    void validate() const {
        if (commands.empty()) throw precondition_error("ActionScript: no frames");
        if (substeps_per_frame < 1)
            throw precondition_error("ActionScript: substeps_per_frame must be >= 1");
        if (!(dt > 0.0)) throw precondition_error("ActionScript: dt must be > 0");
    }
};

// The demo primitive: grab the rope end on the desk and lift it vertically at
// constant speed.
inline ActionScript make_lifting_script(const RopeGeometry& geom, double lift_speed, int frames,
                                        int substeps_per_frame, double dt) {
    ActionScript script;
    script.id = "lift";
    script.substeps_per_frame = substeps_per_frame;
    script.dt = dt;
    const Vec3d lift_v{0.0, 0.0, lift_speed};
    for (int f = 0; f < frames; ++f) {
        GripperCommand cmd;
        cmd.active = true;
        cmd.center = geom.anchor + lift_v * (f * substeps_per_frame * dt);
        cmd.velocity = lift_v;
        script.commands.push_back(cmd);
    }
    return script;
}

template <class T>
void run_script_frame(SimState<T>& state, const ActionScript& script, int frame, const T& youngs,
                      const T& poisson, const GridConfig& grid, const Environment& env) {
    run_frame(state, script.commands[frame], youngs, poisson, grid, env,
              script.substeps_per_frame, script.dt);
}

inline Trajectory run_script(SimState<double>& state, const ActionScript& script,
                             const MaterialParams& params, const GridConfig& grid,
                             const Environment& env) {
    script.validate();
    return run_script(state, script.commands, params, grid, env, script.frames(),
                      script.substeps_per_frame, script.dt);
}

}  // namespace ropeid
