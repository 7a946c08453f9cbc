// Command-line front end tying the simulator, estimator, policy and studies
// together.  Exit codes: 0 success, 2 argument/precondition errors,
// 3 numerical failures.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ropeid/harness.hpp"
#include "ropeid/io.hpp"
#include "ropeid/studies.hpp"

namespace {

using namespace ropeid;

struct GlobalArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out;
};

Config load_config_or_default(const GlobalArgs& g) {
    Config cfg = g.config_path.empty() ? Config{} : Config::load(g.config_path);
    cfg.set("seed", static_cast<double>(g.seed));
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write output file: " + path);
    out << text;
}

int cmd_simulate(const GlobalArgs& g) {
    const Config cfg = load_config_or_default(g);
    const DemoScenario scenario = DemoScenario::from_config(cfg);
    SimState<double> state = init_rope(scenario.rope, scenario.grid, scenario.material, g.seed);
    const Trajectory traj = run_script(state, scenario.script(), scenario.material, scenario.grid,
                                       scenario.env);
    save_trajectory(traj, g.out.empty() ? "trajectory.txt" : g.out);
    return 0;
}

int cmd_make_demo(const GlobalArgs& g, double noise_sd, double subsample) {
    const Config cfg = load_config_or_default(g);
    const DemoScenario scenario = DemoScenario::from_config(cfg);
    const Demonstration demo = make_synthetic_demo(scenario.material, scenario.script(),
                                                   scenario.rope, scenario.grid, scenario.env,
                                                   noise_sd, subsample, g.seed);
    save_demonstration(demo, scenario.to_config(), g.out.empty() ? "demo" : g.out);
    return 0;
}

int cmd_estimate(const GlobalArgs& g, const std::string& demo_dir, const std::string& log_path) {
    // The demo directory's script.cfg pins the rollout; --config overrides
    // search settings on top of it.
    Config cfg = Config::load(demo_dir + "/script.cfg");
    if (!g.config_path.empty()) {
        const Config user = Config::load(g.config_path);
        for (const char* key :
             {"estimate.e_min", "estimate.e_max", "estimate.nu_min", "estimate.nu_max",
              "estimate.restarts", "estimate.iterations", "estimate.step_size",
              "estimate.loss_mode"})
            if (user.has(key)) cfg.set(key, user.get_string(key, ""));
    }
    const DemoScenario scenario = DemoScenario::from_config(cfg);
    const Demonstration demo = load_demonstration(demo_dir);

    SearchConfig search;
    search.bounds = {cfg.get_double("estimate.e_min", search.bounds.e_min),
                     cfg.get_double("estimate.e_max", search.bounds.e_max),
                     cfg.get_double("estimate.nu_min", search.bounds.nu_min),
                     cfg.get_double("estimate.nu_max", search.bounds.nu_max)};
    search.restarts = cfg.get_int("estimate.restarts", search.restarts);
    search.iterations = cfg.get_int("estimate.iterations", search.iterations);
    search.step_size = cfg.get_double("estimate.step_size", search.step_size);
    search.loss_mode = loss_mode_from_string(cfg.get_string("estimate.loss_mode", "all_steps"));
    search.seed = g.seed;

    const SimState<double> initial = init_rope(scenario.rope, scenario.grid, scenario.material);
    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path);
        if (!log) throw io_error("cannot write log file: " + log_path);
    }
    const EstimateResult result = estimate(demo, scenario.script(), scenario.grid, scenario.env,
                                           initial, search, log_path.empty() ? nullptr : &log);
    save_estimate_report(result, g.out.empty() ? "estimate.txt" : g.out);
    std::cout << "best.youngs=" << fmt(result.best.youngs_modulus)
              << " best.poisson=" << fmt(result.best.poissons_ratio)
              << " best.loss=" << fmt(result.best_loss) << '\n';
    return 0;
}

int cmd_datagen(const GlobalArgs& g, int rows) {
    const Config cfg = load_config_or_default(g);
    StudySettings s = StudySettings::from_config(cfg);
    if (rows > 0) s.dataset_rows = rows;
    s.train_ranges.e_min = cfg.get_double("datagen.e_min", s.train_ranges.e_min);
    s.train_ranges.e_max = cfg.get_double("datagen.e_max", s.train_ranges.e_max);
    s.train_ranges.nu_min = cfg.get_double("datagen.nu_min", s.train_ranges.nu_min);
    s.train_ranges.nu_max = cfg.get_double("datagen.nu_max", s.train_ranges.nu_max);
    const auto dataset = generate_dataset(s.dataset_rows, s.train_ranges, s.cast, s.grid, s.env,
                                          s.cast_rope, g.seed);
    save_dataset(dataset, g.out.empty() ? "dataset.csv" : g.out);
    return 0;
}

int cmd_train_policy(const GlobalArgs& g, const std::string& data_path, const std::string& mask) {
    const Config cfg = load_config_or_default(g);
    const StudySettings s = StudySettings::from_config(cfg);
    TrainHyper hyper = s.hyper;
    hyper.feature_mask = FeatureMask::from_string(mask);
    hyper.seed = g.seed;
    const auto dataset = load_dataset(data_path);
    const TrainResult result = train_policy(dataset, hyper);
    save_policy(result.weights, g.out.empty() ? "policy.txt" : g.out);
    std::cout << "final_train_loss=" << fmt(result.epoch_loss.back());
    if (!result.validation_loss.empty())
        std::cout << " final_validation_loss=" << fmt(result.validation_loss.back());
    std::cout << '\n';
    return 0;
}

int cmd_predict(const GlobalArgs& g, const std::string& weights_path, double goal, double youngs,
                double poisson) {
    const PolicyWeights w = load_policy(weights_path);
    const auto release = predict_release(w, goal, MaterialParams{youngs, poisson});
    std::cout << fmt(release[0]) << ' ' << fmt(release[1]) << '\n';
    if (!g.out.empty())
        write_text(g.out, fmt(release[0]) + " " + fmt(release[1]) + "\n");
    return 0;
}

int cmd_chamfer(const GlobalArgs& g, const std::string& a_path, const std::string& b_path) {
    const double d = chamfer(load_point_cloud(a_path), load_point_cloud(b_path));
    std::cout << fmt(d) << '\n';
    if (!g.out.empty()) write_text(g.out, fmt(d) + "\n");
    return 0;
}

int cmd_study(const GlobalArgs& g, const std::string& which) {
    const Config cfg = load_config_or_default(g);
    StudySettings s = StudySettings::from_config(cfg);
    s.seed = g.seed;
    std::string text;
    if (which == "sim2sim")
        text = run_sim2sim_study(s).text;
    else if (which == "ablation")
        text = run_ablation_study(s).text;
    else
        text = run_generalization_study(s).text;
    if (g.out.empty())
        std::cout << text;
    else
        write_text(g.out, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentiable rope-casting laboratory"};
    app.require_subcommand(1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "flat key=value configuration file")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "RNG seed");
    app.add_option("--out", g.out, "output path");

    auto* simulate = app.add_subcommand("simulate", "run the lifting script, export a trajectory");

    double noise_sd = 0.0, subsample = 1.0;
    auto* make_demo = app.add_subcommand("make-demo", "synthesize a demonstration directory");
    make_demo->add_option("--noise", noise_sd, "Gaussian point noise sd (m)");
    make_demo->add_option("--subsample", subsample, "fraction of points kept");

    std::string demo_dir, log_path;
    auto* estimate_cmd = app.add_subcommand("estimate", "recover material parameters from a demo");
    estimate_cmd->add_option("demo", demo_dir, "demonstration directory")->required();
    estimate_cmd->add_option("--log", log_path, "iteration log file");

    int rows = 0;
    auto* datagen = app.add_subcommand("datagen", "generate a casting dataset");
    datagen->add_option("--rows", rows, "number of dataset rows");

    std::string data_path, mask = "both";
    auto* train = app.add_subcommand("train-policy", "train the release policy");
    train->add_option("data", data_path, "dataset csv")->required();
    train->add_option("--mask", mask, "feature mask: both|youngs|poisson|none");

    std::string weights_path;
    double goal = 0.0, youngs = 3000.0, poisson = 0.35;
    auto* predict = app.add_subcommand("predict", "predict a release coordinate");
    predict->add_option("weights", weights_path, "policy weights file")->required();
    predict->add_option("--goal", goal, "goal x-coordinate (m)")->required();
    predict->add_option("--youngs", youngs, "Young's modulus");
    predict->add_option("--poisson", poisson, "Poisson's ratio");

    std::string cloud_a, cloud_b;
    auto* chamfer_cmd = app.add_subcommand("chamfer", "Chamfer distance between two .xyz files");
    chamfer_cmd->add_option("a", cloud_a, "first point cloud")->required();
    chamfer_cmd->add_option("b", cloud_b, "second point cloud")->required();

    auto* sim2sim = app.add_subcommand("sim2sim", "parameter-recovery study");
    auto* ablation = app.add_subcommand("ablation", "feature-mask ablation study");
    auto* generalization = app.add_subcommand("generalization", "ID/OOD generalization study");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(g);
        if (make_demo->parsed()) return cmd_make_demo(g, noise_sd, subsample);
        if (estimate_cmd->parsed()) return cmd_estimate(g, demo_dir, log_path);
        if (datagen->parsed()) return cmd_datagen(g, rows);
        if (train->parsed()) return cmd_train_policy(g, data_path, mask);
        if (predict->parsed()) return cmd_predict(g, weights_path, goal, youngs, poisson);
        if (chamfer_cmd->parsed()) return cmd_chamfer(g, cloud_a, cloud_b);
        if (sim2sim->parsed()) return cmd_study(g, "sim2sim");
        if (ablation->parsed()) return cmd_study(g, "ablation");
        if (generalization->parsed()) return cmd_study(g, "generalization");
    } catch (const ropeid::precondition_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ropeid::io_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ropeid::numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
