#include <catch2/catch_amalgamated.hpp>

#include "ropeid/harness.hpp"
#include "ropeid/studies.hpp"
#include "ropeid/tangent.hpp"

using namespace ropeid;

namespace {

StudySettings desk() { return StudySettings{}; }

}  // namespace

TEST_CASE("tangent state mirrors the primal and starts at zero") {
    const StudySettings s = desk();
    const auto primal_state = init_rope(s.demo_rope, s.grid, MaterialParams{});
    const TangentState t = make_tangent(primal_state);
    REQUIRE(t.positions.size() == primal_state.positions.size());
    for (std::size_t i = 0; i < t.positions.size(); ++i) {
        CHECK(t.positions[i].x.v == primal_state.positions[i].x);
        CHECK(t.positions[i].x.dE == 0.0);
        CHECK(t.positions[i].x.dN == 0.0);
    }
    const SimState<double> back = extract_primal(t);
    for (std::size_t i = 0; i < t.positions.size(); ++i)
        CHECK(back.positions[i].z == primal_state.positions[i].z);
}

TEST_CASE("tangent rollout leaves the primal bit-identical") {
    const StudySettings s = desk();
    const MaterialParams params{3000.0, 0.35};
    const GripperCommand grip = s.lifting_script().commands[0];

    SimState<double> plain = init_rope(s.demo_rope, s.grid, params);
    TangentState tangent = make_tangent(plain);
    for (int i = 0; i < 50; ++i) {
        plain = substep(plain, params, grip, s.grid, s.env, s.demo_dt);
        tangent = substep_with_tangent(tangent, params, grip, s.grid, s.env, s.demo_dt);
    }
    for (std::size_t i = 0; i < plain.positions.size(); ++i) {
        CHECK(tangent.positions[i].x.v == plain.positions[i].x);
        CHECK(tangent.positions[i].y.v == plain.positions[i].y);
        CHECK(tangent.positions[i].z.v == plain.positions[i].z);
        CHECK(tangent.velocities[i].z.v == plain.velocities[i].z);
    }
}

TEST_CASE("a lone particle under gravity has zero parameter sensitivity") {
    // No elastic interaction: the tangent and the finite difference must both
    // vanish.
    const GridConfig grid;
    Environment env;
    env.floor_enabled = false;
    SimState<double> one;
    one.positions = {{0.3, 0.3, 0.3}};
    one.velocities = {{0.0, 0.0, 0.0}};
    one.deformation_gradients = {Mat3<double>::identity()};
    one.affine_fields = {Mat3<double>::zero()};
    one.particle_mass = 1e-5;
    one.particle_volume = 1e-8;

    const MaterialParams params{3000.0, 0.35};
    TangentState t = make_tangent(one);
    t = substep_with_tangent(t, params, GripperCommand{}, grid, env, 1e-4);
    CHECK(std::abs(t.velocities[0].z.dE) < 1e-12);
    CHECK(std::abs(t.velocities[0].z.dN) < 1e-12);

    // Finite-difference oracle on the same single step.
    auto vz_after = [&](double e) {
        SimState<double> st = one;
        st = substep(st, MaterialParams{e, 0.35}, GripperCommand{}, grid, env, 1e-4);
        return st.velocities[0].z;
    };
    const double fd = (vz_after(3001.0) - vz_after(2999.0)) / 2.0;
    CHECK(std::abs(fd - t.velocities[0].z.dE) < 1e-6);
}

TEST_CASE("loss and gradient vanish at the generating parameters") {
    const StudySettings s = desk();
    const MaterialParams gt{3000.0, 0.35};
    const ActionScript script = s.lifting_script();
    const auto demo = make_synthetic_demo(gt, script, s.demo_rope, s.grid, s.env, 0.0, 1.0, 1);
    const auto initial = init_rope(s.demo_rope, s.grid, gt);
    const GradientResult g =
        loss_gradient(demo, gt, script, LossMode::all_steps, s.grid, s.env, initial);
    CHECK(std::abs(g.loss) < 1e-10);
    CHECK(std::abs(g.d_loss_dE) < 1e-10);
    CHECK(std::abs(g.d_loss_dNu) < 1e-10);
}

TEST_CASE("tangent gradient matches central finite differences") {
    const StudySettings s = desk();
    const MaterialParams gt{3000.0, 0.35};
    const ActionScript script = s.lifting_script();
    const auto demo = make_synthetic_demo(gt, script, s.demo_rope, s.grid, s.env, 0.0, 1.0, 1);
    const auto initial = init_rope(s.demo_rope, s.grid, gt);

    const MaterialParams candidate{3600.0, 0.352};
    for (const LossMode mode : {LossMode::all_steps, LossMode::last_step}) {
        const GradientResult g =
            loss_gradient(demo, candidate, script, mode, s.grid, s.env, initial);
        const auto [fe, fn] = finite_difference_gradient(demo, candidate, script, mode, s.grid,
                                                         s.env, initial, 10.0, 1e-3);
        REQUIRE(std::abs(fe) > 1e-8);
        REQUIRE(std::abs(fn) > 1e-8);
        CHECK(std::abs(g.d_loss_dE - fe) / std::abs(fe) <= 1e-2);
        CHECK(std::abs(g.d_loss_dNu - fn) / std::abs(fn) <= 1e-2);
    }
}

TEST_CASE("loss gradient rejects misaligned demonstrations") {
    const StudySettings s = desk();
    const ActionScript script = s.lifting_script();
    const auto initial = init_rope(s.demo_rope, s.grid, MaterialParams{});
    Demonstration demo =
        make_synthetic_demo(MaterialParams{}, script, s.demo_rope, s.grid, s.env, 0.0, 1.0, 1);
    demo.frame_times[2] += 0.5;  // break the time alignment
    CHECK_THROWS_AS(
        loss_gradient(demo, MaterialParams{}, script, LossMode::all_steps, s.grid, s.env, initial),
        precondition_error);
    demo.frames.pop_back();
    demo.frame_times.pop_back();
    CHECK_THROWS_AS(
        loss_gradient(demo, MaterialParams{}, script, LossMode::all_steps, s.grid, s.env, initial),
        precondition_error);
}

TEST_CASE("finite differences refuse steps through the material singularity") {
    const StudySettings s = desk();
    const ActionScript script = s.lifting_script();
    const auto demo =
        make_synthetic_demo(MaterialParams{}, script, s.demo_rope, s.grid, s.env, 0.0, 1.0, 1);
    const auto initial = init_rope(s.demo_rope, s.grid, MaterialParams{});
    CHECK_THROWS_AS(finite_difference_gradient(demo, MaterialParams{3000.0, 0.49}, script,
                                               LossMode::last_step, s.grid, s.env, initial, 10.0,
                                               0.02),
                    precondition_error);
}
