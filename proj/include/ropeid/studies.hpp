#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ropeid/estimator.hpp"
#include "ropeid/harness.hpp"
#include "ropeid/io.hpp"
#include "ropeid/policy.hpp"

namespace ropeid {

// Everything the experiment runners need, at desk scale by default.  All
// values can be overridden through the flat key=value config file.
struct StudySettings {
    GridConfig grid;
    Environment env;

    // Lifting demonstration used for estimation.
    RopeGeometry demo_rope;
    double lift_speed = 0.5;  // m/s
    int demo_frames = 20;
    int demo_substeps = 20;
    double demo_dt = 4e-4;

    SearchConfig search;  // Sim2Sim estimation

    // Casting.
    CastConfig cast;
    RopeGeometry cast_rope;

    // Policy training and evaluation.
    TrainHyper hyper;
    int dataset_rows = 2400;
    ParameterBounds train_ranges{500.0, 10500.0, 0.20, 0.40};
    ParameterBounds ood_ranges{500.0, 1500.0, 0.30, 0.33};
    std::array<double, 2> goal_range{0.095, 0.12};      // m, see note below
    int ablation_trials = 30;
    int generalization_trials = 40;
    SearchConfig loop_search;  // estimator-in-the-loop settings

    int sim2sim_draws = 5;
    std::uint64_t seed = 0;

    StudySettings() {
        demo_rope.anchor = {0.10, 0.32, env.floor_z + demo_rope.radius};
        demo_rope.axis = {1.0, 0.0, 0.0};
        demo_rope.particle_count = 200;
        // A short cast rope keeps the hanging elongation of the softest
        // material below the lowest release height, so every stiffness in
        // the sampling range actually flies; at this length the reach map is
        // monotone in the modulus over the default workspace slab.  The goal
        // band is the intersection of the reachable bands of the softest and
        // stiffest ropes, so every sampled (goal, material) pair is
        // achievable.
        cast_rope.length = 0.10;
        cast_rope.particle_count = 200;
        cast_rope.mass_density = 300.0;
        // A small network trained long enough to converge under the 0.1
        // gradient-norm clip (the clip caps progress per update, so the
        // budget is set by the update count, not the epoch count alone).
        // The hidden width matters for the soft end of the stiffness range,
        // where the reach map bends sharply and narrower networks underfit.
        hyper.hidden = 48;
        hyper.epochs = 600;
        // The desk-scale estimates converge well before the full-scale
        // iteration cap; a shorter schedule keeps the study runtimes down.
        search.iterations = 80;
        search.decay_after = 40;
        search.decay_every = 20;
        loop_search.bounds = {500.0, 10500.0, 0.20, 0.40};
        loop_search.restarts = 2;
        loop_search.iterations = 40;
        loop_search.decay_after = 20;
        loop_search.decay_every = 10;
        loop_search.step_size = 0.15;
    }

    ActionScript lifting_script() const {
        return make_lifting_script(demo_rope, lift_speed, demo_frames, demo_substeps, demo_dt);
    }

    static StudySettings from_config(const Config& cfg) {
        StudySettings s;
        s.grid.resolution = cfg.get_int("grid.resolution", s.grid.resolution);
        s.grid.cell_size = cfg.get_double("grid.cell_size", s.grid.cell_size);
        s.env.gravity.z = cfg.get_double("sim.gravity", s.env.gravity.z);
        s.env.floor_z = cfg.get_double("floor.z", s.env.floor_z);

        s.demo_rope.length = cfg.get_double("rope.length", s.demo_rope.length);
        s.demo_rope.radius = cfg.get_double("rope.radius", s.demo_rope.radius);
        s.demo_rope.particle_count = cfg.get_int("study.demo_particles",
                                                 s.demo_rope.particle_count);
        s.demo_rope.mass_density = cfg.get_double("rope.density", s.demo_rope.mass_density);
        s.demo_rope.anchor.z = s.env.floor_z + s.demo_rope.radius;
        s.lift_speed = cfg.get_double("script.lift_speed", s.lift_speed);
        s.demo_frames = cfg.get_int("script.frames", s.demo_frames);
        s.demo_substeps = cfg.get_int("sim.substeps_per_frame", s.demo_substeps);
        s.demo_dt = cfg.get_double("sim.dt", s.demo_dt);

        s.search.bounds.e_min = cfg.get_double("estimate.e_min", s.search.bounds.e_min);
        s.search.bounds.e_max = cfg.get_double("estimate.e_max", s.search.bounds.e_max);
        s.search.bounds.nu_min = cfg.get_double("estimate.nu_min", s.search.bounds.nu_min);
        s.search.bounds.nu_max = cfg.get_double("estimate.nu_max", s.search.bounds.nu_max);
        s.search.restarts = cfg.get_int("estimate.restarts", s.search.restarts);
        s.search.iterations = cfg.get_int("estimate.iterations", s.search.iterations);
        s.search.step_size = cfg.get_double("estimate.step_size", s.search.step_size);
        s.search.loss_mode = loss_mode_from_string(
            cfg.get_string("estimate.loss_mode", to_string(s.search.loss_mode)));

        s.cast.cast_speed = cfg.get_double("cast.speed", s.cast.cast_speed);
        s.cast.flight_time = cfg.get_double("cast.flight_time", s.cast.flight_time);
        s.cast.dt = cfg.get_double("cast.dt", s.cast.dt);
        s.cast_rope.length = cfg.get_double("cast.rope_length", s.cast_rope.length);
        s.cast_rope.radius = cfg.get_double("cast.rope_radius", s.cast_rope.radius);
        s.cast_rope.particle_count = cfg.get_int("cast.particles", s.cast_rope.particle_count);
        s.cast_rope.mass_density = cfg.get_double("cast.density", s.cast_rope.mass_density);
        s.cast.start_pose.x = cfg.get_double("cast.start_x", s.cast.start_pose.x);
        s.cast.start_pose.z = cfg.get_double("cast.start_z", s.cast.start_pose.z);
        s.cast.frame_x = cfg.get_double("cast.frame_x", s.cast.frame_x);
        s.goal_range[0] = cfg.get_double("study.goal_min", s.goal_range[0]);
        s.goal_range[1] = cfg.get_double("study.goal_max", s.goal_range[1]);

        s.hyper.learning_rate = cfg.get_double("policy.learning_rate", s.hyper.learning_rate);
        s.hyper.batch_size = cfg.get_int("policy.batch_size", s.hyper.batch_size);
        s.hyper.grad_norm_clip = cfg.get_double("policy.clipnorm", s.hyper.grad_norm_clip);
        s.hyper.epochs = cfg.get_int("policy.epochs", s.hyper.epochs);
        s.hyper.hidden = cfg.get_int("policy.hidden", s.hyper.hidden);

        s.dataset_rows = cfg.get_int("study.dataset_rows", s.dataset_rows);
        s.ablation_trials = cfg.get_int("study.ablation_trials", s.ablation_trials);
        s.generalization_trials = cfg.get_int("study.generalization_trials",
                                              s.generalization_trials);
        s.sim2sim_draws = cfg.get_int("study.sim2sim_draws", s.sim2sim_draws);
        s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<int>(s.seed)));
        return s;
    }
};

// Single-demonstration scenario with the full-scale defaults used by the
// simulate / make-demo / estimate commands.  make-demo persists it as
// script.cfg so estimate can rebuild the identical rollout.
struct DemoScenario {
    GridConfig grid;
    Environment env;
    RopeGeometry rope;
    MaterialParams material;
    double dt = 1e-4;
    int substeps_per_frame = 40;
    int frames = 100;
    double lift_speed = 0.05;  // m/s
    double gripper_radius = 0.015;

    static DemoScenario from_config(const Config& cfg) {
        DemoScenario s;
        s.grid.resolution = cfg.get_int("grid.resolution", s.grid.resolution);
        s.grid.cell_size = cfg.get_double("grid.cell_size", s.grid.cell_size);
        s.env.gravity.z = cfg.get_double("sim.gravity", s.env.gravity.z);
        s.env.floor_z = cfg.get_double("floor.z", s.env.floor_z);
        s.rope.length = cfg.get_double("rope.length", s.rope.length);
        s.rope.radius = cfg.get_double("rope.radius", s.rope.radius);
        s.rope.particle_count = cfg.get_int("rope.particles", s.rope.particle_count);
        s.rope.mass_density = cfg.get_double("rope.density", s.rope.mass_density);
        s.rope.anchor = {cfg.get_double("rope.anchor_x", 0.10), cfg.get_double("rope.anchor_y", 0.32),
                         s.env.floor_z + s.rope.radius};
        s.rope.axis = {1.0, 0.0, 0.0};
        s.material.youngs_modulus = cfg.get_double("material.youngs", s.material.youngs_modulus);
        s.material.poissons_ratio = cfg.get_double("material.poisson", s.material.poissons_ratio);
        s.dt = cfg.get_double("sim.dt", s.dt);
        s.substeps_per_frame = cfg.get_int("sim.substeps_per_frame", s.substeps_per_frame);
        s.frames = cfg.get_int("script.frames", s.frames);
        s.lift_speed = cfg.get_double("script.lift_speed", s.lift_speed);
        s.gripper_radius = cfg.get_double("gripper.radius", s.gripper_radius);
        check_stability(s.dt, s.grid, s.material.youngs_modulus, s.rope.mass_density);
        return s;
    }

    Config to_config() const {
        Config cfg;
        cfg.set("script.type", "lift");
        cfg.set("grid.resolution", static_cast<double>(grid.resolution));
        cfg.set("grid.cell_size", grid.cell_size);
        cfg.set("sim.gravity", env.gravity.z);
        cfg.set("floor.z", env.floor_z);
        cfg.set("rope.length", rope.length);
        cfg.set("rope.radius", rope.radius);
        cfg.set("rope.particles", static_cast<double>(rope.particle_count));
        cfg.set("rope.density", rope.mass_density);
        cfg.set("rope.anchor_x", rope.anchor.x);
        cfg.set("rope.anchor_y", rope.anchor.y);
        cfg.set("sim.dt", dt);
        cfg.set("sim.substeps_per_frame", static_cast<double>(substeps_per_frame));
        cfg.set("script.frames", static_cast<double>(frames));
        cfg.set("script.lift_speed", lift_speed);
        cfg.set("gripper.radius", gripper_radius);
        return cfg;
    }

    ActionScript script() const {
        ActionScript s = make_lifting_script(rope, lift_speed, frames, substeps_per_frame, dt);
        for (auto& cmd : s.commands) cmd.grasp_radius = gripper_radius;
        return s;
    }
};

namespace detail {

struct MeanSd {
    double mean = 0.0, sd = 0.0;
};

inline MeanSd mean_sd(const std::vector<double>& xs) {
    MeanSd r;
    if (xs.empty()) return r;
    for (double x : xs) r.mean += x;
    r.mean /= xs.size();
    for (double x : xs) r.sd += (x - r.mean) * (x - r.mean);
    r.sd = std::sqrt(r.sd / xs.size());
    return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sim2Sim parameter-recovery study (Table-1 style).

struct Sim2SimModeResult {
    LossMode mode = LossMode::all_steps;
    std::vector<double> diff_e, diff_nu, chamfer_dist;
};

struct Sim2SimReport {
    std::vector<MaterialParams> ground_truth;
    Sim2SimModeResult all_steps, last_step;
    std::string text;
};

inline Sim2SimReport run_sim2sim_study(const StudySettings& s) {
    Sim2SimReport report;
    report.all_steps.mode = LossMode::all_steps;
    report.last_step.mode = LossMode::last_step;
    const ActionScript script = s.lifting_script();
    std::ostringstream out;
    out << "sim2sim seed=" << s.seed << " draws=" << s.sim2sim_draws << '\n';

    for (int d = 0; d < s.sim2sim_draws; ++d) {
        Rng rng = Rng::derive(s.seed, 0x5151 + static_cast<std::uint64_t>(d));
        const MaterialParams gt{rng.uniform(s.search.bounds.e_min, s.search.bounds.e_max),
                                rng.uniform(s.search.bounds.nu_min, s.search.bounds.nu_max)};
        report.ground_truth.push_back(gt);
        const Demonstration demo = make_synthetic_demo(gt, script, s.demo_rope, s.grid, s.env,
                                                       0.0, 1.0, s.seed + d);
        const SimState<double> initial = init_rope(s.demo_rope, s.grid, gt);

        for (Sim2SimModeResult* mode_result : {&report.all_steps, &report.last_step}) {
            SearchConfig cfg = s.search;
            cfg.loss_mode = mode_result->mode;
            cfg.seed = s.seed + 101 * d;
            const EstimateResult est = estimate(demo, script, s.grid, s.env, initial, cfg);
            const double cd = evaluate_estimate(demo, est.best, script, s.grid, s.env, initial);
            mode_result->diff_e.push_back(std::abs(est.best.youngs_modulus - gt.youngs_modulus));
            mode_result->diff_nu.push_back(std::abs(est.best.poissons_ratio - gt.poissons_ratio));
            mode_result->chamfer_dist.push_back(cd);
            out << "mode=" << to_string(mode_result->mode) << " draw=" << d
                << " gt_E=" << fmt(gt.youngs_modulus) << " gt_nu=" << fmt(gt.poissons_ratio)
                << " est_E=" << fmt(est.best.youngs_modulus)
                << " est_nu=" << fmt(est.best.poissons_ratio)
                << " loss=" << fmt(est.best_loss) << " chamfer=" << fmt(cd) << '\n';
        }
    }
    for (const Sim2SimModeResult* m : {&report.all_steps, &report.last_step}) {
        const auto de = detail::mean_sd(m->diff_e);
        const auto dn = detail::mean_sd(m->diff_nu);
        const auto cd = detail::mean_sd(m->chamfer_dist);
        out << "summary mode=" << to_string(m->mode) << " youngs_diff=" << fmt(de.mean) << "+-"
            << fmt(de.sd) << " poisson_diff=" << fmt(dn.mean) << "+-" << fmt(dn.sd)
            << " chamfer=" << fmt(cd.mean) << "+-" << fmt(cd.sd) << '\n';
    }
    report.text = out.str();
    return report;
}

// ---------------------------------------------------------------------------
// Ablation study (Table-4 style): four feature masks, one dataset.

struct AblationReport {
    std::vector<DatasetRow> dataset;
    std::vector<FeatureMask> masks;
    std::vector<std::vector<double>> errors;  // per mask, per trial
    std::string text;
};

namespace detail {

// Clamp an evaluation goal into the policy's accepted range (trained range
// +-20%, with a small safety margin inside it).
inline double admissible_goal(const PolicyWeights& w, double goal) {
    const double range = w.in_hi[0] - w.in_lo[0];
    const double slack = 0.19 * (range > 0.0 ? range : 1.0);
    return std::clamp(goal, w.in_lo[0] - slack, w.in_hi[0] + slack);
}

}  // namespace detail

inline AblationReport run_ablation_study(const StudySettings& s) {
    AblationReport report;
    report.masks = {FeatureMask{true, true}, FeatureMask{true, false}, FeatureMask{false, true},
                    FeatureMask{false, false}};
    report.dataset = generate_dataset(s.dataset_rows, s.train_ranges, s.cast, s.grid, s.env,
                                      s.cast_rope, s.seed);
    std::ostringstream out;
    out << "ablation seed=" << s.seed << " rows=" << s.dataset_rows << " trials="
        << s.ablation_trials << '\n';

    std::vector<PolicyWeights> policies;
    for (const FeatureMask& mask : report.masks) {
        TrainHyper hyper = s.hyper;
        hyper.feature_mask = mask;
        hyper.seed = s.seed;
        const TrainResult trained = train_policy(report.dataset, hyper);
        out << "trained mask=" << mask.to_string() << " final_loss="
            << fmt(trained.epoch_loss.back()) << '\n';
        policies.push_back(trained.weights);
    }

    for (std::size_t m = 0; m < report.masks.size(); ++m) {
        std::vector<double> errs;
        for (int trial = 0; trial < s.ablation_trials; ++trial) {
            Rng rng = Rng::derive(s.seed, 0xAB1A + static_cast<std::uint64_t>(trial));
            const double goal = rng.uniform(s.goal_range[0], s.goal_range[1]);
            const MaterialParams params{
                rng.uniform(s.train_ranges.e_min, s.train_ranges.e_max),
                rng.uniform(s.train_ranges.nu_min, s.train_ranges.nu_max)};
            const auto release = predict_release(policies[m],
                                                 detail::admissible_goal(policies[m], goal), params);
            const double achieved = cast_rollout(params, release, s.cast, s.grid, s.env,
                                                 s.cast_rope);
            errs.push_back(std::abs(achieved - goal));
        }
        const auto ms = detail::mean_sd(errs);
        out << "mask=" << report.masks[m].to_string() << " goal_error=" << fmt(ms.mean) << "+-"
            << fmt(ms.sd) << '\n';
        report.errors.push_back(std::move(errs));
    }
    report.text = out.str();
    return report;
}

// ---------------------------------------------------------------------------
// ID/OOD generalization with the estimator in the loop (Table-5 style).

struct GeneralizationReport {
    std::vector<double> id_errors, ood_errors;
    std::vector<double> id_gt_errors, ood_gt_errors;  // using ground-truth parameters
    std::string text;
};

inline GeneralizationReport run_generalization_study(const StudySettings& s,
                                                     const PolicyWeights& policy) {
    GeneralizationReport report;
    const ActionScript script = s.lifting_script();
    std::ostringstream out;
    out << "generalization seed=" << s.seed << " trials=" << s.generalization_trials << '\n';

    struct Condition {
        const char* label;
        const ParameterBounds* ranges;
        std::vector<double>* errors;
        std::vector<double>* gt_errors;
        std::uint64_t salt;
    };
    Condition conditions[2] = {
        {"ID", &s.train_ranges, &report.id_errors, &report.id_gt_errors, 0x1D},
        {"OOD", &s.ood_ranges, &report.ood_errors, &report.ood_gt_errors, 0x00D},
    };

    for (const Condition& cond : conditions) {
        for (int trial = 0; trial < s.generalization_trials; ++trial) {
            Rng rng = Rng::derive(s.seed, cond.salt * 1000003ull + trial);
            const double goal = rng.uniform(s.goal_range[0], s.goal_range[1]);
            const MaterialParams gt{rng.uniform(cond.ranges->e_min, cond.ranges->e_max),
                                    rng.uniform(cond.ranges->nu_min, cond.ranges->nu_max)};

            // Deployment path: demo -> estimate -> condition the policy.
            const Demonstration demo = make_synthetic_demo(gt, script, s.demo_rope, s.grid, s.env,
                                                           0.0, 1.0, s.seed + trial);
            const SimState<double> initial = init_rope(s.demo_rope, s.grid, gt);
            SearchConfig cfg = s.loop_search;
            cfg.seed = s.seed + 13 * trial + cond.salt;
            const MaterialParams est = estimate(demo, script, s.grid, s.env, initial, cfg).best;

            const double adm = detail::admissible_goal(policy, goal);
            const auto release = predict_release(policy, adm, est);
            const double achieved = cast_rollout(gt, release, s.cast, s.grid, s.env, s.cast_rope);
            cond.errors->push_back(std::abs(achieved - goal));

            const auto release_gt = predict_release(policy, adm, gt);
            const double achieved_gt = cast_rollout(gt, release_gt, s.cast, s.grid, s.env,
                                                    s.cast_rope);
            cond.gt_errors->push_back(std::abs(achieved_gt - goal));

            out << "cond=" << cond.label << " trial=" << trial << " goal=" << fmt(goal)
                << " gt_E=" << fmt(gt.youngs_modulus) << " est_E=" << fmt(est.youngs_modulus)
                << " gt_nu=" << fmt(gt.poissons_ratio) << " est_nu=" << fmt(est.poissons_ratio)
                << " error=" << fmt(cond.errors->back())
                << " error_gt_params=" << fmt(cond.gt_errors->back()) << '\n';
        }
        const auto est_ms = detail::mean_sd(*cond.errors);
        const auto gt_ms = detail::mean_sd(*cond.gt_errors);
        out << "summary cond=" << cond.label << " goal_error=" << fmt(est_ms.mean) << "+-"
            << fmt(est_ms.sd) << " goal_error_gt_params=" << fmt(gt_ms.mean) << "+-"
            << fmt(gt_ms.sd) << '\n';
    }
    report.text = out.str();
    return report;
}

// Convenience wrapper: trains the both-parameters policy on a fresh dataset,
// then runs the ID/OOD evaluation.
inline GeneralizationReport run_generalization_study(const StudySettings& s) {
    const auto dataset = generate_dataset(s.dataset_rows, s.train_ranges, s.cast, s.grid, s.env,
                                          s.cast_rope, s.seed);
    TrainHyper hyper = s.hyper;
    hyper.feature_mask = {true, true};
    hyper.seed = s.seed;
    const TrainResult trained = train_policy(dataset, hyper);
    return run_generalization_study(s, trained.weights);
}

}  // namespace ropeid
