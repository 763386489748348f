#include <doctest.h>

#include "ribsim/solver.hpp"

using namespace ribsim;

TEST_SUITE("solver") {

TEST_CASE("flat rest state with no forces is already the minimizer") {
    RibbonSpec spec(1.0, 0.05, 10);
    const GeneralizedCoords q0 = GeneralizedCoords::rest(spec);
    StepProblem p = StepProblem::at_rest(spec, q0, 0.01, Vec3::Zero());
    SolveDiagnostics diag;
    const auto q1 = optimize_step(p, q0, {}, {}, &diag);
    CHECK((q1.stacked() - q0.stacked()).norm() < 1e-10);
    CHECK(diag.converged);
    CHECK(diag.max_violation == 0.0);
}

TEST_CASE("no violated constraints: penalty inactive, multipliers stay zero") {
    RibbonSpec spec(1.0, 0.05, 8);
    const GeneralizedCoords q0 = GeneralizedCoords::rest(spec);
    StepProblem p = StepProblem::at_rest(spec, q0, 0.01, Vec3(0, 0, -9.8));
    SolveDiagnostics diag;
    const auto q1 = optimize_step(p, q0, {}, {}, &diag);
    // the end-slope constraints are far from active for this drooping ribbon
    CHECK(diag.max_violation == 0.0);
    CHECK(diag.converged);
    // f non-increasing across outer iterations
    for (size_t i = 1; i < diag.f_history.size(); ++i)
        CHECK(diag.f_history[i] <= diag.f_history[i - 1] + 1e-12);
}

TEST_CASE("hanging ribbon equilibrium matches direct statics minimization") {
    RibbonSpec spec(1.0, 0.05, 10, 0.2, 2.0);
    SceneState scene;
    scene.gravity = Vec3(0, 0, -9.8);
    scene.h = 0.01;
    scene.solver.grad_tol = 1e-9;
    scene.collision.enabled = false;
    scene.ribbons.push_back(RibbonState::from_coords(spec, GeneralizedCoords::rest(spec)));
    scene.default_units();
    for (int i = 0; i < 500; ++i) timestep(scene);

    // statics oracle: potential-only minimization (the kinetic term vanishes
    // as h -> inf), tight tolerance, different start
    StepProblem ps = StepProblem::at_rest(spec, GeneralizedCoords::rest(spec), 1e6, scene.gravity);
    SolverConfig cfg;
    cfg.grad_tol = 1e-11;
    cfg.inner_cap = 50000;
    cfg.outer_tol = 1e-9;
    GeneralizedCoords q0 = GeneralizedCoords::rest(spec);
    q0.psi.setConstant(-0.2);
    const auto qstat = optimize_step(ps, q0, {}, cfg);
    CHECK((scene.ribbons[0].q.stacked() - qstat.stacked()).norm() < 1e-4);
    CHECK(qstat.psi[0] < -1e-3);  // it actually droops
}

TEST_CASE("orientable loop closure via the augmented Lagrangian") {
    RibbonSpec spec(1.0, 0.05, 16);
    GeneralizedCoords q0 = GeneralizedCoords::rest(spec);
    q0.mode = FrameMode::Floating;
    q0.psi.setConstant(2 * M_PI / 16);  // regular-polygon warm start
    StepProblem p = StepProblem::at_rest(spec, q0, 0.01, Vec3::Zero());

    HardConstraint loop;
    loop.kind = HardConstraint::Kind::Loop;
    loop.orientable = true;
    SolveDiagnostics diag;
    const auto q1 = optimize_step(p, q0, {loop}, {}, &diag);
    CHECK(diag.max_violation <= 1e-4);
    const auto st = reconstruct_unchecked(spec, q1);
    CHECK(loop_residual(st, true).lpNorm<Eigen::Infinity>() <= 2e-4);
}

TEST_CASE("hard pin is satisfied after optimize_step") {
    RibbonSpec spec(1.0, 0.05, 8);
    const GeneralizedCoords q0 = GeneralizedCoords::rest(spec);
    StepProblem p = StepProblem::at_rest(spec, q0, 0.01, Vec3::Zero());
    HardConstraint pin;
    pin.kind = HardConstraint::Kind::Pin;
    pin.vertex = {false, 8};
    pin.target = Vec3(0.95, -0.025, 0.05);  // reachable small lift of the free end
    SolveDiagnostics diag;
    const auto q1 = optimize_step(p, q0, {pin}, {}, &diag);
    const auto st = reconstruct_unchecked(spec, q1);
    CHECK((st.x(8) - pin.target).norm() <= 2e-4);
    CHECK(diag.max_violation <= 1e-4);
}

TEST_CASE("timestep: substep 2 is the identity without collisions") {
    RibbonSpec spec(1.0, 0.05, 8);
    SceneState scene;
    scene.gravity = Vec3(0, 0, -9.8);
    scene.collision.enabled = true;  // enabled but nothing to collide with
    scene.ribbons.push_back(RibbonState::from_coords(spec, GeneralizedCoords::rest(spec)));
    scene.default_units();
    const FrameStats stats = timestep(scene);
    CHECK(stats.contacts == 0);
    const auto st = reconstruct_unchecked(spec, scene.ribbons[0].q);
    CHECK((scene.ribbons[0].X - st.X).norm() == 0.0);
}

TEST_CASE("two non-interacting ribbons match two independent runs") {
    RibbonSpec spec(1.0, 0.05, 6);
    auto make_single = [&](const Vec3& offset) {
        SceneState s;
        s.gravity = Vec3(0, 0, -9.8);
        GeneralizedCoords q = GeneralizedCoords::rest(spec);
        q.mode = FrameMode::Floating;
        q.t = offset;
        s.ribbons.push_back(RibbonState::from_coords(spec, q));
        s.default_units();
        return s;
    };
    SceneState pair = make_single(Vec3::Zero());
    {
        GeneralizedCoords q = GeneralizedCoords::rest(spec);
        q.mode = FrameMode::Floating;
        q.t = Vec3(0, 0, 5.0);
        pair.ribbons.push_back(RibbonState::from_coords(spec, q));
        pair.default_units();
    }
    SceneState lone0 = make_single(Vec3::Zero());
    SceneState lone1 = make_single(Vec3(0, 0, 5.0));
    for (int i = 0; i < 5; ++i) {
        timestep(pair);
        timestep(lone0);
        timestep(lone1);
    }
    CHECK((pair.ribbons[0].X - lone0.ribbons[0].X).norm() == 0.0);
    CHECK((pair.ribbons[1].X - lone1.ribbons[0].X).norm() == 0.0);
}

TEST_CASE("determinism: identical runs produce identical trajectories, any thread count") {
    auto run = [&](int threads) {
        RibbonSpec spec(1.0, 0.05, 6);
        SceneState s;
        s.gravity = Vec3(0, 0, -9.8);
        for (int r = 0; r < 3; ++r) {
            GeneralizedCoords q = GeneralizedCoords::rest(spec);
            q.mode = FrameMode::Floating;
            q.t = Vec3(0, 0, 0.2 * r + 0.1);
            s.ribbons.push_back(RibbonState::from_coords(spec, q));
        }
        s.colliders.push_back(PlaneCollider{Vec3::UnitZ(), 0.0});
        s.default_units();
        for (int i = 0; i < 10; ++i) timestep(s, threads);
        Mat3X all(3, 0);
        for (const auto& r : s.ribbons) {
            Mat3X tmp(3, all.cols() + r.X.cols());
            tmp << all, r.X;
            all = tmp;
        }
        return all;
    };
    const Mat3X a = run(1);
    const Mat3X b = run(1);
    const Mat3X c = run(2);
    CHECK((a - b).norm() == 0.0);
    CHECK((a - c).norm() == 0.0);
}

TEST_CASE("falling ribbon does not penetrate the ground") {
    RibbonSpec spec(1.0, 0.05, 12);
    SceneState scene;
    scene.gravity = Vec3(0, 0, -9.8);
    GeneralizedCoords q = GeneralizedCoords::rest(spec);
    q.mode = FrameMode::Floating;
    q.t = Vec3(0, 0, 0.08);
    scene.ribbons.push_back(RibbonState::from_coords(spec, q));
    scene.colliders.push_back(PlaneCollider{Vec3::UnitZ(), 0.0});
    scene.default_units();
    double min_z = 1;
    for (int i = 0; i < 40; ++i) {
        timestep(scene);
        min_z = std::min(min_z, scene.ribbons[0].X.row(2).minCoeff());
    }
    CHECK(min_z > -1e-6);
    CHECK(scene.ribbons[0].X.row(2).maxCoeff() < 0.08);  // it actually fell
}

}  // TEST_SUITE
