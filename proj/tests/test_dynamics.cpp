#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "ribsim/dynamics.hpp"

using namespace ribsim;

TEST_SUITE("dynamics") {

TEST_CASE("mass blocks match the quadrature oracle") {
    RibbonSpec spec(1.0, 0.05, 10);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto q = random_feasible_coords(spec, 500 + trial);
        MassMatrix M(spec, q.c);
        for (int i = 0; i < spec.segments; ++i) {
            const double ci = (i == 0) ? 0.0 : q.c[i - 1];
            const double cip = (i + 1 == spec.segments) ? 0.0 : q.c[i];
            const Mat4 oracle = oracles::quad_mass_quadrature(spec.length, spec.width,
                                                              spec.segments, ci, cip, i);
            CHECK((M.element_pattern(i) - oracle).cwiseAbs().maxCoeff() < 1e-10);
            CHECK(std::abs(M.element_total(i) - spec.length * spec.width / spec.segments) <
                  1e-12 * spec.length * spec.width / spec.segments);
        }
    }
}

TEST_CASE("mass pattern at dc = 0 reduces to the bilinear rectangle pattern") {
    RibbonSpec spec(1.0, 0.05, 10);
    MassMatrix M(spec, VecX::Zero(9));
    const double A = spec.length * spec.width / spec.segments;
    const Mat4 p = M.element_pattern(3);
    CHECK(p(0, 0) == doctest::Approx(A / 9).epsilon(1e-14));
    CHECK(p(0, 1) == doctest::Approx(A / 18).epsilon(1e-14));
    CHECK(p(0, 3) == doctest::Approx(A / 36).epsilon(1e-14));
    // row sums lw/4n
    for (int r = 0; r < 4; ++r) CHECK(p.row(r).sum() == doctest::Approx(A / 4).epsilon(1e-13));
    CHECK((p - p.transpose()).norm() == 0.0);
}

TEST_CASE("mass is symmetric and conserves total mass for any feasible c") {
    RibbonSpec spec(1.0, 0.05, 16);
    for (int trial = 0; trial < 50; ++trial) {
        const auto q = random_feasible_coords(spec, 700 + trial);
        MassMatrix M(spec, q.c);
        double total = 0;
        for (int i = 0; i < spec.segments; ++i) {
            total += M.element_total(i);
            CHECK((M.element_pattern(i) - M.element_pattern(i).transpose()).norm() == 0.0);
        }
        CHECK(std::abs(spec.density * total - spec.density * spec.length * spec.width) <
              1e-12 * spec.length * spec.width);
    }
}

TEST_CASE("resampler: identity, linear precision, hull property, rejection") {
    VecX coords(4);
    coords << 0.0, 0.3, 0.7, 1.0;
    Mat3X values(3, 4);
    values << 1, 2, 3, 4, 0, 1, 0, 1, -1, -2, -3, -4;
    Resampler r(coords, values);

    // target = source reproduces values exactly
    for (int i = 0; i < 4; ++i) CHECK((r.value(coords[i]) - values.col(i)).norm() == 0.0);

    // linear field is reproduced exactly at any query
    Mat3X lin(3, 4);
    for (int i = 0; i < 4; ++i) lin.col(i) = Vec3(2.0, -1.0, 0.5) * coords[i] + Vec3(1, 2, 3);
    Resampler rl(coords, lin);
    for (double u : {0.05, 0.3, 0.31, 0.99}) {
        CHECK((rl.value(u) - (Vec3(2.0, -1.0, 0.5) * u + Vec3(1, 2, 3))).norm() < 1e-14);
        CHECK((rl.slope(u) - Vec3(2.0, -1.0, 0.5)).norm() < 1e-13);
    }

    // convex hull of the bracketing values
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> uu(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const double u = uu(rng);
        const Vec3 v = r.value(u);
        int k = 0;
        while (k + 2 < coords.size() && coords[k + 1] < u) ++k;
        for (int d = 0; d < 3; ++d) {
            const double lo = std::min(values(d, k), values(d, k + 1));
            const double hi = std::max(values(d, k), values(d, k + 1));
            CHECK(v[d] >= lo - 1e-12);
            CHECK(v[d] <= hi + 1e-12);
        }
    }

    VecX bad(3);
    bad << 0.0, 0.5, 0.5;
    CHECK_THROWS_AS(Resampler(bad, Mat3X::Zero(3, 3)), std::invalid_argument);
}

TEST_CASE("potential energy: flat ribbon has none") {
    RibbonSpec spec(1.0, 0.05, 50);
    StepProblem p = StepProblem::at_rest(spec, GeneralizedCoords::rest(spec), 0.01, Vec3::Zero());
    const auto ev = evaluate_objective(p, GeneralizedCoords::rest(spec));
    CHECK(ev.parts.potential() == 0.0);
    CHECK(ev.f == 0.0);  // kinetic is zero at rest too
}

TEST_CASE("bending energy value and quadratic structure") {
    // c_i = 0, psi_i = 0.1, n = 50, w = 0.05, l = 1, alpha = 1: each crease
    // contributes 50 * 0.05 * 0.01 / 1 = 0.025
    RibbonSpec spec(1.0, 0.05, 50);
    GeneralizedCoords q = GeneralizedCoords::rest(spec);
    q.psi.setConstant(0.1);
    StepProblem p = StepProblem::at_rest(spec, GeneralizedCoords::rest(spec), 0.01, Vec3::Zero());
    p.spec.beta = 0;  // isolate bending
    const auto ev = evaluate_objective(p, q);
    CHECK(ev.parts.v_bend == doctest::Approx(49 * 0.025).epsilon(1e-12));

    // three-point collinearity of second differences: V_bend exactly quadratic in psi
    auto vbend = [&](double s) {
        GeneralizedCoords qq = GeneralizedCoords::rest(spec);
        qq.psi.setConstant(s);
        return evaluate_objective(p, qq).parts.v_bend;
    };
    const double d2a = vbend(0.3) - 2 * vbend(0.2) + vbend(0.1);
    const double d2b = vbend(0.9) - 2 * vbend(0.8) + vbend(0.7);
    CHECK(d2a == doctest::Approx(d2b).epsilon(1e-9));
}

TEST_CASE("gravity potential and its position partial") {
    RibbonSpec spec(1.0, 0.05, 8);
    const auto q = random_feasible_coords(spec, 31);
    const Vec3 g(0, 0, -9.8);
    StepProblem p = StepProblem::at_rest(spec, q, 0.01, g);

    const auto ev = evaluate_objective(p, q);
    // V_grav = -rho g' M X against a direct sum over assembled blocks
    MassMatrix M(spec, q.c);
    Mat3X gb(3, spec.num_rim_vertices());
    gb.colwise() = g;
    const Mat3X Mg = M.apply(gb);
    double expect = 0;
    for (int i = 0; i < Mg.cols(); ++i) expect -= spec.density * Mg.col(i).dot(ev.state.X.col(i));
    CHECK(ev.parts.v_grav == doctest::Approx(expect).epsilon(1e-12));

    // dV/dX = -rho M g per block; at rest the kinetic cotangent vanishes so the
    // accumulated dX cotangent is the gravity partial alone
    StepProblem pg = p;
    pg.spec.alpha = 0;
    pg.spec.beta = 0;
    const auto ev2 = evaluate_objective(pg, q);
    CHECK((ev2.cot.dX + spec.density * Mg).norm() < 1e-12);
}

TEST_CASE("objective is zero when reconstruction matches the ballistic prediction") {
    RibbonSpec spec(1.0, 0.05, 6);
    GeneralizedCoords q = GeneralizedCoords::rest(spec);
    q.mode = FrameMode::Floating;
    StepProblem p = StepProblem::at_rest(spec, q, 0.01, Vec3::Zero());
    p.spec.beta = 0;
    // previous state translating uniformly: prediction = X + h V
    const Vec3 vel(0.3, -0.2, 0.5);
    p.Vprev.colwise() = vel;
    GeneralizedCoords qn = q;
    qn.t = vel * p.h;
    const auto ev = evaluate_objective(p, qn);
    CHECK(ev.f < 1e-24);

    // static limit: Vprev = 0 and Xprev = reconstruct(q) gives f = 0
    StepProblem ps = StepProblem::at_rest(spec, q, 0.01, Vec3::Zero());
    ps.spec.beta = 0;
    CHECK(evaluate_objective(ps, q).f == 0.0);
}

TEST_CASE("objective gradient matches finite differences (resampling active)") {
    RibbonSpec spec(1.0, 0.05, 9);
    const int m = spec.num_creases();
    const auto q_prev = random_feasible_coords(spec, 21, FrameMode::Floating, 0.5);
    StepProblem p = StepProblem::at_rest(spec, q_prev, 0.01, Vec3(0, 0, -9.8));
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < p.Vprev.cols(); ++i)
        for (int k = 0; k < 3; ++k) p.Vprev(k, i) = 0.2 * u(rng);
    p.pins.push_back({{true, 4}, Vec3(0.3, 0.1, -0.2), 3.0});
    p.guides.push_back({2, Vec3(0, 1, 0), 1.5});

    auto q = random_feasible_coords(spec, 22, FrameMode::Floating, 0.5);
    q.c = 0.5 * (q.c + q_prev.c);  // stay between interpolation knots

    for (KineticMode mode : {KineticMode::Full, KineticMode::Lumped}) {
        p.kinetic = mode;
        CoordGradient g;
        objective(p, q, &g);
        const VecX gfd = oracles::finite_difference(
            [&](const VecX& v) {
                return objective(p, GeneralizedCoords::from_stacked(v, m, q.mode));
            },
            q.stacked());
        CHECK((g.stacked(q.mode) - gfd).norm() <= 1e-5 * std::max(1.0, gfd.norm()));
    }
}

TEST_CASE("kinetic term is invariant under rigid motion of the frame data") {
    RibbonSpec spec(1.0, 0.05, 7);
    const auto q = random_feasible_coords(spec, 55, FrameMode::Floating, 0.8);
    StepProblem p = StepProblem::at_rest(spec, q, 0.01, Vec3::Zero());
    p.spec.alpha = 0;
    p.spec.beta = 0;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < p.Vprev.cols(); ++i)
        for (int k = 0; k < 3; ++k) p.Vprev(k, i) = 0.4 * u(rng);

    auto q2 = q;
    q2.t += Vec3(0.03, -0.01, 0.02);
    const double f0 = evaluate_objective(p, q2).f;

    const Mat3 R = rotation_exp(Vec3(0.3, -0.7, 0.2));
    const Vec3 d(1.0, -2.0, 0.5);
    StepProblem pr = p;
    pr.Xprev = (R * p.Xprev).colwise() + d;
    pr.Vprev = R * p.Vprev;
    GeneralizedCoords qr = q2;
    // compose the rigid motion with the floating frame
    const Mat4 T0 = global_frame(q2.w, q2.t);
    Mat4 Tr = Mat4::Identity();
    Tr.topLeftCorner<3, 3>() = R;
    Tr.topRightCorner<3, 1>() = d;
    const Mat4 T = Tr * T0;
    // rotation_exp is surjective onto SO(3); recover w from the matrix
    Eigen::AngleAxisd aa(T.topLeftCorner<3, 3>());
    qr.w = aa.angle() * aa.axis();
    qr.t = T.topRightCorner<3, 1>();
    const double f1 = evaluate_objective(pr, qr).f;
    CHECK(f1 == doctest::Approx(f0).epsilon(1e-10));
}

TEST_CASE("lumped objective: uniform translation agrees with the full objective") {
    RibbonSpec spec(1.0, 0.05, 10);
    GeneralizedCoords q = GeneralizedCoords::rest(spec);
    q.mode = FrameMode::Floating;
    q.c.setConstant(0.2);  // constant crease slope keeps the element masses symmetric
    StepProblem p = StepProblem::at_rest(spec, q, 0.01, Vec3::Zero());
    p.spec.alpha = 0;
    p.spec.beta = 0;
    const Vec3 vel(0.4, 0.1, -0.3);
    p.Vprev.colwise() = vel;

    GeneralizedCoords qn = q;
    qn.t = Vec3(0.01, -0.02, 0.015);  // not the ballistic prediction
    p.kinetic = KineticMode::Full;
    const double f_full = evaluate_objective(p, qn).f;
    p.kinetic = KineticMode::Lumped;
    const double f_lump = evaluate_objective(p, qn).f;
    CHECK(f_full == doctest::Approx(f_lump).epsilon(1e-12));
}

TEST_CASE("lumped kinetic limit h -> inf vanishes") {
    RibbonSpec spec(1.0, 0.05, 6);
    const auto q = random_feasible_coords(spec, 66, FrameMode::Floating, 0.4);
    StepProblem p = StepProblem::at_rest(spec, q, 1e9, Vec3::Zero());
    p.kinetic = KineticMode::Lumped;
    auto q2 = q;
    q2.t += Vec3(0.1, 0, 0);
    CHECK(evaluate_objective(p, q2).parts.kinetic < 1e-12);
}

TEST_CASE("update_velocity") {
    RibbonSpec spec(1.0, 0.05, 8);
    GeneralizedCoords q = GeneralizedCoords::rest(spec);
    q.mode = FrameMode::Floating;
    StepProblem p = StepProblem::at_rest(spec, q, 0.01, Vec3::Zero());

    // no motion, no remeshing
    const auto st0 = reconstruct(spec, q);
    CHECK(update_velocity(p, st0).norm() == 0.0);

    // pure translation without remeshing
    GeneralizedCoords qt = q;
    qt.t = Vec3(0.02, -0.01, 0.03);
    const auto st1 = reconstruct(spec, qt);
    const Mat3X V = update_velocity(p, st1);
    for (int i = 0; i < V.cols(); ++i) CHECK((V.col(i) - qt.t / p.h).norm() < 1e-12);

    // remeshing with a linear-in-u velocity field is exact
    GeneralizedCoords qc = q;
    qc.c = 0.4 * VecX::Random(spec.num_creases());
    while (!is_feasible(spec, qc.c)) qc.c *= 0.5;
    // previous positions linear in material coordinate: X(u) = a u + b per rim
    const Vec3 a(1.0, 2.0, -1.0), b(0.1, 0.2, 0.3);
    StepProblem pl = p;
    for (int j = 0; j <= spec.segments; ++j) {
        pl.Xprev.col(j) = a * pl.uprev_bottom[j] + b;
        pl.Xprev.col(spec.segments + 1 + j) = a * pl.uprev_top[j] + b;
    }
    const auto st2 = reconstruct(spec, qc);
    const Mat3X V2 = update_velocity(pl, st2);
    for (int j = 0; j <= spec.segments; ++j) {
        const Vec3 expect =
            (st2.X.col(j) - (a * st2.rim.bottom_u[j] + b)) / pl.h;
        CHECK((V2.col(j) - expect).norm() < 1e-10);
    }
}

TEST_CASE("lumped mass splits rho l w / n half-half") {
    RibbonSpec spec(1.0, 0.05, 10, 2.0);
    const double elem = 2.0 * 1.0 * 0.05 / 10;
    CHECK(lumped_mass(spec, 0) == doctest::Approx(elem / 2));
    CHECK(lumped_mass(spec, 10) == doctest::Approx(elem / 2));
    CHECK(lumped_mass(spec, 5) == doctest::Approx(elem));
    double total = 0;
    for (int i = 0; i <= 10; ++i) total += lumped_mass(spec, i);
    CHECK(total == doctest::Approx(2.0 * 0.05));
}

}  // TEST_SUITE
