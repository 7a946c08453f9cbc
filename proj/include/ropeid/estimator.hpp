#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "ropeid/density.hpp"
#include "ropeid/material.hpp"
#include "ropeid/rng.hpp"
#include "ropeid/scripts.hpp"
#include "ropeid/tangent.hpp"

namespace ropeid {

struct ParameterBounds {
    double e_min = 1500.0, e_max = 8200.0;
    double nu_min = 0.34, nu_max = 0.36;

    void validate() const {
        if (!(e_min > 0.0 && e_max >= e_min))
            throw precondition_error("ParameterBounds: invalid Young's modulus bounds");
        if (!(nu_min >= 0.0 && nu_max >= nu_min && nu_max < 0.5))
            throw precondition_error("ParameterBounds: invalid Poisson's ratio bounds");
    }
};

inline MaterialParams project_to_bounds(const MaterialParams& params, const ParameterBounds& b) {
    b.validate();
    return {std::clamp(params.youngs_modulus, b.e_min, b.e_max),
            std::clamp(params.poissons_ratio, b.nu_min, b.nu_max)};
}

struct SearchConfig {
    ParameterBounds bounds;
    int restarts = 5;
    int iterations = 200;
    // Step size in the normalized search space (E/1000, nu*10); one size
    // serves both parameters.  Halved every decay_every iterations once
    // decay_after is reached so late iterates settle.
    double step_size = 0.05;
    int decay_after = 100;
    int decay_every = 40;
    LossMode loss_mode = LossMode::all_steps;
    std::uint64_t seed = 0;
    double tolerance = 1e-6;  // loss-change plateau threshold

    void validate() const {
        bounds.validate();
        if (restarts < 1) throw precondition_error("SearchConfig: restarts must be >= 1");
        if (iterations < 1) throw precondition_error("SearchConfig: iterations must be >= 1");
        if (!(step_size > 0.0)) throw precondition_error("SearchConfig: step_size must be > 0");
    }
};

struct RestartRecord {
    MaterialParams initial;
    MaterialParams final_params;  // best iterate seen in this restart
    double final_loss = 0.0;
    int iterations_used = 0;
    bool diverged = false;
};

struct EstimateResult {
    MaterialParams best;
    double best_loss = 0.0;
    std::vector<RestartRecord> per_restart;
    std::vector<std::vector<double>> loss_history;
};

namespace detail {

constexpr double kENorm = 1000.0;  // optimize E/1000
constexpr double kNuNorm = 10.0;   // optimize nu*10

struct AdamState {
    double m[2] = {0.0, 0.0};
    double v[2] = {0.0, 0.0};
    int t = 0;

    void update(double g[2], double lr, double out[2]) {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++t;
        for (int i = 0; i < 2; ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / (1.0 - std::pow(b1, t));
            const double vhat = v[i] / (1.0 - std::pow(b2, t));
            out[i] = lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
};

}  // namespace detail

// Multi-restart Adam on the normalized parameter space with bound projection
// after each step.  Stops at the iteration cap, when the loss falls below the
// tolerance, or after 5 consecutive iterations with loss change below it.
// Restarts run independently; ties in final loss go to the lowest restart
// index.  Optional log gets one line per iteration:
// "restart iter E nu loss gradE gradNu".
inline EstimateResult estimate(const Demonstration& demo, const ActionScript& script,
                               const GridConfig& grid, const Environment& env,
                               const SimState<double>& initial_state, const SearchConfig& cfg,
                               std::ostream* log = nullptr) {
    cfg.validate();
    check_alignment(demo, script);

    // Rasterize the demo once; every iteration reuses the grids.
    std::vector<DensityGrid> demo_grids;
    if (cfg.loss_mode == LossMode::all_steps)
        for (const auto& f : demo.frames) demo_grids.push_back(rasterize_density(f, grid));
    else
        demo_grids.push_back(rasterize_density(demo.frames.back(), grid));

    EstimateResult result;
    result.best_loss = std::numeric_limits<double>::infinity();
    std::string divergence_notes;

    for (int r = 0; r < cfg.restarts; ++r) {
        Rng rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(r));
        MaterialParams params{rng.uniform(cfg.bounds.e_min, cfg.bounds.e_max),
                              rng.uniform(cfg.bounds.nu_min, cfg.bounds.nu_max)};
        RestartRecord rec;
        rec.initial = params;
        rec.final_loss = std::numeric_limits<double>::infinity();
        std::vector<double> history;
        detail::AdamState adam;

        double prev_loss = std::numeric_limits<double>::infinity();
        int plateau = 0;
        try {
            for (int it = 0; it < cfg.iterations; ++it) {
                const GradientResult g = loss_gradient(demo, params, script, cfg.loss_mode, grid,
                                                       env, initial_state, &demo_grids);
                history.push_back(g.loss);
                rec.iterations_used = it + 1;
                if (log)
                    (*log) << r << ' ' << it << ' ' << params.youngs_modulus << ' '
                           << params.poissons_ratio << ' ' << g.loss << ' ' << g.d_loss_dE << ' '
                           << g.d_loss_dNu << '\n';
                if (g.loss < rec.final_loss) {
                    rec.final_loss = g.loss;
                    rec.final_params = params;
                }
                if (g.loss < cfg.tolerance) break;
                plateau = std::abs(g.loss - prev_loss) < cfg.tolerance ? plateau + 1 : 0;
                prev_loss = g.loss;
                if (plateau >= 5) break;

                double grad_norm[2] = {g.d_loss_dE * detail::kENorm,
                                       g.d_loss_dNu / detail::kNuNorm};
                double lr = cfg.step_size;
                if (it >= cfg.decay_after)
                    lr *= std::pow(0.5, (it - cfg.decay_after) / cfg.decay_every + 1);
                double step[2];
                adam.update(grad_norm, lr, step);
                params.youngs_modulus -= step[0] * detail::kENorm;
                params.poissons_ratio -= step[1] / detail::kNuNorm;
                params = project_to_bounds(params, cfg.bounds);
            }
        } catch (const numeric_error& e) {
            rec.diverged = true;
            divergence_notes += std::string(" restart ") + std::to_string(r) + ": " + e.what();
        }
        result.per_restart.push_back(rec);
        result.loss_history.push_back(std::move(history));
        if (!rec.diverged && rec.final_loss < result.best_loss) {
            result.best_loss = rec.final_loss;
            result.best = rec.final_params;
        }
    }

    if (!std::isfinite(result.best_loss))
        throw numeric_error("estimate: all restarts diverged;" + divergence_notes);
    return result;
}

// Rolls out the script at the estimated parameters and returns the Chamfer
// distance between the final simulated frame and the final demo frame.
inline double evaluate_estimate(const Demonstration& demo, const MaterialParams& est,
                                const ActionScript& script, const GridConfig& grid,
                                const Environment& env, const SimState<double>& initial_state) {
    demo.validate();
    est.validate();
    SimState<double> state = initial_state;
    const Trajectory traj = run_script(state, script, est, grid, env);
    PointCloud sim_cloud{traj.frames.back()};
    return chamfer(sim_cloud, demo.frames.back());
}

}  // namespace ropeid
