#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ropeid/density.hpp"
#include "ropeid/errors.hpp"
#include "ropeid/estimator.hpp"
#include "ropeid/policy.hpp"
#include "ropeid/sim.hpp"

namespace ropeid {

// Shortest round-trip decimal for a double; keeps output files byte-stable.
inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------------------
// Flat key=value configuration files.  '#' starts a comment; blank lines are
// ignored.

class Config {
public:
    Config() = default;

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw io_error("cannot open config file: " + path);
        Config cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto eq = line.find('=');
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            if (eq == std::string::npos)
                throw precondition_error(path + ":" + std::to_string(lineno) +
                                         ": expected key=value");
            cfg.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    void set(const std::string& key, double value) { values_[key] = fmt(value); }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }
    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw precondition_error("config key '" + key + "': bad number '" + it->second + "'");
        }
    }
    int get_int(const std::string& key, int fallback) const {
        const double v = get_double(key, fallback);
        const int i = static_cast<int>(v);
        if (static_cast<double>(i) != v)
            throw precondition_error("config key '" + key + "': expected integer");
        return i;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw io_error("cannot write config file: " + path);
        for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? "" : s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;  // ordered for stable output
};

// ---------------------------------------------------------------------------
// Trajectory files: "frame <index> <time>" header, then one "x y z" line per
// particle.

inline void save_trajectory(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write trajectory file: " + path);
    for (std::size_t f = 0; f < traj.frames.size(); ++f) {
        out << "frame " << f << ' ' << fmt(traj.frame_times[f]) << '\n';
        for (const auto& p : traj.frames[f])
            out << fmt(p.x) << ' ' << fmt(p.y) << ' ' << fmt(p.z) << '\n';
    }
    if (!out) throw io_error("failed writing trajectory file: " + path);
}

// ---------------------------------------------------------------------------
// Point-cloud .xyz files: one "x y z" per line, blank lines ignored.

inline void save_point_cloud(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write point cloud: " + path);
    for (const auto& p : cloud.points)
        out << fmt(p.x) << ' ' << fmt(p.y) << ' ' << fmt(p.z) << '\n';
}

inline PointCloud load_point_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open point cloud: " + path);
    PointCloud cloud;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        Vec3d p;
        if (!(ss >> p.x >> p.y >> p.z))
            throw precondition_error(path + ":" + std::to_string(lineno) + ": expected 'x y z'");
        cloud.points.push_back(p);
    }
    if (cloud.points.empty()) throw precondition_error(path + ": empty point cloud");
    return cloud;
}

// ---------------------------------------------------------------------------
// Demonstration directories: frame_0000.xyz ..., times.txt, script.cfg.

inline std::string frame_file_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04zu.xyz", index);
    return buf;
}

inline void save_demonstration(const Demonstration& demo, const Config& script_cfg,
                               const std::string& dir) {
    demo.validate();
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (std::size_t f = 0; f < demo.frames.size(); ++f)
        save_point_cloud(demo.frames[f], (fs::path(dir) / frame_file_name(f)).string());
    std::ofstream times((fs::path(dir) / "times.txt").string());
    if (!times) throw io_error("cannot write times.txt in " + dir);
    for (double t : demo.frame_times) times << fmt(t) << '\n';
    script_cfg.save((fs::path(dir) / "script.cfg").string());
}

inline Demonstration load_demonstration(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream times((fs::path(dir) / "times.txt").string());
    if (!times) throw io_error("cannot open times.txt in " + dir);
    Demonstration demo;
    double t;
    while (times >> t) demo.frame_times.push_back(t);
    for (std::size_t f = 0; f < demo.frame_times.size(); ++f)
        demo.frames.push_back(load_point_cloud((fs::path(dir) / frame_file_name(f)).string()));
    demo.script_id = Config::load((fs::path(dir) / "script.cfg").string())
                         .get_string("script.type", "lift");
    demo.validate();
    return demo;
}

// ---------------------------------------------------------------------------
// Dataset CSV: header "youngs,poisson,release_x,release_z,goal_x".

inline void save_dataset(const std::vector<DatasetRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write dataset: " + path);
    out << "youngs,poisson,release_x,release_z,goal_x\n";
    for (const auto& r : rows)
        out << fmt(r.youngs) << ',' << fmt(r.poisson) << ',' << fmt(r.release[0]) << ','
            << fmt(r.release[1]) << ',' << fmt(r.goal) << '\n';
}

inline std::vector<DatasetRow> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("youngs,poisson,release_x,release_z,goal_x", 0) != 0)
        throw precondition_error(path + ": missing dataset header");
    std::vector<DatasetRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        DatasetRow r;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &r.youngs, &r.poisson,
                        &r.release[0], &r.release[1], &r.goal) != 5)
            throw precondition_error(path + ":" + std::to_string(lineno) + ": bad row");
        rows.push_back(r);
    }
    if (rows.empty()) throw precondition_error(path + ": empty dataset");
    return rows;
}

// ---------------------------------------------------------------------------
// Policy weights: versioned text format.

inline void save_policy(const PolicyWeights& w, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write policy weights: " + path);
    out << "ropeid-policy v1\n";
    out << "arch 3 " << w.hidden << ' ' << w.hidden << " 2 softplus\n";
    out << "mask " << w.mask.to_string() << '\n';
    out << "norm";
    for (int f = 0; f < 3; ++f) out << ' ' << fmt(w.in_lo[f]) << ' ' << fmt(w.in_hi[f]);
    out << '\n';
    out << "clamp " << fmt(w.release_lo[0]) << ' ' << fmt(w.release_hi[0]) << ' '
        << fmt(w.release_lo[1]) << ' ' << fmt(w.release_hi[1]) << '\n';
    auto block = [&](const char* name, const std::vector<double>& v) {
        out << name << ' ' << v.size() << '\n';
        for (std::size_t i = 0; i < v.size(); ++i)
            out << fmt(v[i]) << ((i + 1) % 8 == 0 || i + 1 == v.size() ? '\n' : ' ');
    };
    block("w1", w.w1); block("b1", w.b1);
    block("w2", w.w2); block("b2", w.b2);
    block("w3", w.w3); block("b3", w.b3);
    if (!out) throw io_error("failed writing policy weights: " + path);
}

inline PolicyWeights load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open policy weights: " + path);
    std::string header;
    std::getline(in, header);
    if (header != "ropeid-policy v1")
        throw precondition_error(path + ": not a ropeid-policy v1 file");
    std::string tok;
    int in_dim, h1, h2, out_dim;
    std::string act;
    in >> tok >> in_dim >> h1 >> h2 >> out_dim >> act;
    if (tok != "arch" || in_dim != 3 || out_dim != 2 || h1 != h2 || act != "softplus")
        throw precondition_error(path + ": unsupported architecture");
    PolicyWeights w = PolicyWeights::zeros(h1);
    std::string mask;
    in >> tok >> mask;
    if (tok != "mask") throw precondition_error(path + ": expected mask line");
    w.mask = FeatureMask::from_string(mask);
    in >> tok;
    if (tok != "norm") throw precondition_error(path + ": expected norm line");
    for (int f = 0; f < 3; ++f) in >> w.in_lo[f] >> w.in_hi[f];
    in >> tok;
    if (tok != "clamp") throw precondition_error(path + ": expected clamp line");
    in >> w.release_lo[0] >> w.release_hi[0] >> w.release_lo[1] >> w.release_hi[1];
    auto block = [&](const char* name, std::vector<double>& v) {
        std::size_t n;
        in >> tok >> n;
        if (tok != name || n != v.size())
            throw precondition_error(path + ": bad '" + name + "' block");
        for (auto& x : v) in >> x;
    };
    block("w1", w.w1); block("b1", w.b1);
    block("w2", w.w2); block("b2", w.b2);
    block("w3", w.w3); block("b3", w.b3);
    if (!in) throw precondition_error(path + ": truncated weights file");
    w.prepared = true;
    w.check_finite();
    return w;
}

// ---------------------------------------------------------------------------
// Estimation report: flat key=value.

inline void save_estimate_report(const EstimateResult& result, const std::string& path) {
    Config cfg;
    cfg.set("best.youngs", result.best.youngs_modulus);
    cfg.set("best.poisson", result.best.poissons_ratio);
    cfg.set("best.loss", result.best_loss);
    cfg.set("restarts", static_cast<double>(result.per_restart.size()));
    for (std::size_t r = 0; r < result.per_restart.size(); ++r) {
        const auto& rec = result.per_restart[r];
        const std::string p = "restart." + std::to_string(r) + ".";
        cfg.set(p + "initial.youngs", rec.initial.youngs_modulus);
        cfg.set(p + "initial.poisson", rec.initial.poissons_ratio);
        cfg.set(p + "final.youngs", rec.final_params.youngs_modulus);
        cfg.set(p + "final.poisson", rec.final_params.poissons_ratio);
        cfg.set(p + "final.loss", rec.final_loss);
        cfg.set(p + "iterations", static_cast<double>(rec.iterations_used));
        cfg.set(p + "diverged", rec.diverged ? 1.0 : 0.0);
    }
    cfg.save(path);
}

}  // namespace ropeid
