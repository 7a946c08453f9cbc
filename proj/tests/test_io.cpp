#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <unistd.h>
#include <fstream>

#include "ropeid/io.hpp"
#include "ropeid/rng.hpp"

using namespace ropeid;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("ropeid_io_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config files round-trip and reject malformed content") {
    TempDir tmp;
    Config cfg;
    cfg.set("grid.resolution", 64.0);
    cfg.set("material.youngs", 3001.5);
    cfg.set("script.type", "lift");
    cfg.save(tmp.file("a.cfg"));
    const Config loaded = Config::load(tmp.file("a.cfg"));
    CHECK(loaded.get_int("grid.resolution", 0) == 64);
    CHECK(loaded.get_double("material.youngs", 0.0) == 3001.5);
    CHECK(loaded.get_string("script.type", "") == "lift");
    CHECK(loaded.get_double("missing.key", 7.5) == 7.5);
    CHECK(!loaded.has("missing.key"));

    std::ofstream bad(tmp.file("bad.cfg"));
    bad << "# comment\nkey_without_value\n";
    bad.close();
    CHECK_THROWS_AS(Config::load(tmp.file("bad.cfg")), precondition_error);
    CHECK_THROWS_AS(Config::load(tmp.file("does_not_exist.cfg")), io_error);

    std::ofstream notnum(tmp.file("n.cfg"));
    notnum << "k=abc\n";
    notnum.close();
    CHECK_THROWS_AS(Config::load(tmp.file("n.cfg")).get_double("k", 0.0), precondition_error);
}

TEST_CASE("point clouds round-trip exactly") {
    TempDir tmp;
    Rng rng(3);
    PointCloud cloud;
    for (int i = 0; i < 50; ++i)
        cloud.points.push_back({rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0),
                                rng.uniform(0.0, 1.0)});
    save_point_cloud(cloud, tmp.file("c.xyz"));
    const PointCloud back = load_point_cloud(tmp.file("c.xyz"));
    REQUIRE(back.points.size() == cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        CHECK(back.points[i].x == cloud.points[i].x);
        CHECK(back.points[i].y == cloud.points[i].y);
        CHECK(back.points[i].z == cloud.points[i].z);
    }
    std::ofstream bad(tmp.file("bad.xyz"));
    bad << "0.1 0.2\n";
    bad.close();
    CHECK_THROWS_AS(load_point_cloud(tmp.file("bad.xyz")), precondition_error);
}

TEST_CASE("trajectory files use the frame-header format") {
    TempDir tmp;
    Trajectory traj;
    // Dyadic coordinates survive the %.17g round trip verbatim.
    traj.frames.push_back({{0.5, 0.25, 0.125}, {0.375, 0.5, 0.625}});
    traj.frames.push_back({{0.75, 0.875, 0.9375}, {1.0, 1.125, 1.25}});
    traj.frame_times = {0.5, 1.0};
    save_trajectory(traj, tmp.file("t.txt"));
    const std::string text = slurp(tmp.file("t.txt"));
    CHECK(text.rfind("frame 0 0.5", 0) == 0);
    CHECK(text.find("\nframe 1 1") != std::string::npos);
    CHECK(text.find("0.5 0.25 0.125") != std::string::npos);
}

TEST_CASE("demonstrations round-trip through a directory") {
    TempDir tmp;
    Demonstration demo;
    demo.script_id = "lift";
    Rng rng(5);
    for (int f = 0; f < 3; ++f) {
        PointCloud c;
        for (int i = 0; i < 20; ++i)
            c.points.push_back({rng.uniform(0.1, 0.5), rng.uniform(0.1, 0.5),
                                rng.uniform(0.1, 0.5)});
        demo.frames.push_back(c);
        demo.frame_times.push_back(0.004 * (f + 1));
    }
    Config script_cfg;
    script_cfg.set("script.type", "lift");
    const std::string dir = tmp.file("demo");
    save_demonstration(demo, script_cfg, dir);
    CHECK(fs::exists(fs::path(dir) / "frame_0000.xyz"));
    CHECK(fs::exists(fs::path(dir) / "frame_0002.xyz"));
    CHECK(frame_file_name(7) == "frame_0007.xyz");

    const Demonstration back = load_demonstration(dir);
    CHECK(back.script_id == "lift");
    REQUIRE(back.frames.size() == 3);
    CHECK(back.frame_times == demo.frame_times);
    for (std::size_t f = 0; f < 3; ++f) {
        REQUIRE(back.frames[f].points.size() == demo.frames[f].points.size());
        for (std::size_t i = 0; i < back.frames[f].points.size(); ++i)
            CHECK(back.frames[f].points[i].z == demo.frames[f].points[i].z);
    }
}

TEST_CASE("datasets round-trip through CSV") {
    TempDir tmp;
    std::vector<DatasetRow> rows;
    Rng rng(7);
    for (int i = 0; i < 10; ++i)
        rows.push_back({rng.uniform(500.0, 10500.0), rng.uniform(0.2, 0.4),
                        {rng.uniform(0.05, 0.15), rng.uniform(0.025, 0.30)},
                        rng.uniform(0.0, 0.5)});
    save_dataset(rows, tmp.file("d.csv"));
    CHECK(slurp(tmp.file("d.csv")).rfind("youngs,poisson,release_x,release_z,goal_x\n", 0) == 0);
    const auto back = load_dataset(tmp.file("d.csv"));
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].youngs == rows[i].youngs);
        CHECK(back[i].poisson == rows[i].poisson);
        CHECK(back[i].release == rows[i].release);
        CHECK(back[i].goal == rows[i].goal);
    }

    std::ofstream bad(tmp.file("bad.csv"));
    bad << "a,b,c\n1,2,3\n";
    bad.close();
    CHECK_THROWS_AS(load_dataset(tmp.file("bad.csv")), precondition_error);
}

TEST_CASE("policy weights round-trip with the versioned header") {
    TempDir tmp;
    PolicyWeights w = PolicyWeights::zeros(4);
    Rng rng(9);
    for (auto* v : {&w.w1, &w.b1, &w.w2, &w.b2, &w.w3, &w.b3})
        for (double& x : *v) x = rng.uniform(-1.0, 1.0);
    w.in_lo = {0.1, 500.0, 0.2};
    w.in_hi = {0.3, 10500.0, 0.4};
    w.mask = {true, false};
    w.prepared = true;
    save_policy(w, tmp.file("p.txt"));
    CHECK(slurp(tmp.file("p.txt")).rfind("ropeid-policy v1\n", 0) == 0);

    const PolicyWeights back = load_policy(tmp.file("p.txt"));
    CHECK(back.hidden == 4);
    CHECK(back.prepared);
    CHECK(back.mask.to_string() == "youngs");
    CHECK(back.in_lo == w.in_lo);
    CHECK(back.in_hi == w.in_hi);
    for (std::size_t i = 0; i < w.w2.size(); ++i) CHECK(back.w2[i] == w.w2[i]);
    // Identical behavior after the round trip.
    const auto a = mlp_forward(w, {0.3, 0.6, 0.9});
    const auto b = mlp_forward(back, {0.3, 0.6, 0.9});
    CHECK(a[0] == b[0]);
    CHECK(a[1] == b[1]);

    std::ofstream bad(tmp.file("bad.txt"));
    bad << "something else\n";
    bad.close();
    CHECK_THROWS_AS(load_policy(tmp.file("bad.txt")), precondition_error);
}

TEST_CASE("estimate reports are written as key=value") {
    TempDir tmp;
    EstimateResult res;
    res.best = {4000.0, 0.35};
    res.best_loss = 1.25e-4;
    res.per_restart.push_back({{2000.0, 0.25}, {4000.0, 0.35}, 1.25e-4, 42, false});
    save_estimate_report(res, tmp.file("est.cfg"));
    const Config cfg = Config::load(tmp.file("est.cfg"));
    CHECK(cfg.get_double("best.youngs", 0.0) == 4000.0);
    CHECK(cfg.get_double("best.poisson", 0.0) == 0.35);
    CHECK(cfg.get_int("restarts", 0) == 1);
    CHECK(cfg.get_int("restart.0.iterations", 0) == 42);
    CHECK(cfg.get_double("restart.0.initial.youngs", 0.0) == 2000.0);
}
