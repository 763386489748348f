#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "ribsim/collision.hpp"
#include "ribsim/kinematics.hpp"

using namespace ribsim;

namespace {

RibbonMesh flat_strip(int n, double l = 1.0, double w = 0.05, const Vec3& offset = Vec3::Zero()) {
    RibbonSpec spec(l, w, n);
    auto st = reconstruct(spec, GeneralizedCoords::rest(spec));
    Mat3X X = st.X;
    X.colwise() += offset;
    return build_mesh(X, n);
}

}  // namespace

TEST_SUITE("collision") {

TEST_CASE("mesh build: counts, area, crease edges") {
    RibbonSpec spec(1.0, 0.05, 12);
    const auto st = reconstruct(spec, GeneralizedCoords::rest(spec));
    const RibbonMesh mesh = build_mesh(st.X, 12);
    CHECK(mesh.F.cols() == 24);  // 2n triangles
    CHECK(mesh.total_area() == doctest::Approx(1.0 * 0.05).epsilon(1e-12));
    // every crease rung x_j -- y_j is a mesh edge
    for (int j = 0; j <= 12; ++j) {
        const std::array<int, 2> rung{j, 13 + j};
        CHECK(std::find(mesh.edges.begin(), mesh.edges.end(), rung) != mesh.edges.end());
    }
}

TEST_CASE("total area equals l*w for any feasible configuration (isometry)") {
    RibbonSpec spec(1.0, 0.05, 20);
    for (int trial = 0; trial < 20; ++trial) {
        const auto q = random_feasible_coords(spec, 3100 + trial, FrameMode::Floating);
        const auto st = reconstruct(spec, q);
        const RibbonMesh mesh = build_mesh(st.X, 20);
        CHECK(mesh.total_area() == doctest::Approx(0.05).epsilon(1e-9));
    }
}

TEST_CASE("detection: separated strips produce nothing") {
    CollisionConfig cfg;
    cfg.thickness = 0.005;
    const std::vector<RibbonMesh> meshes{flat_strip(10), flat_strip(10, 1.0, 0.05, Vec3(0, 0, 0.05))};
    CHECK(detect(meshes, {}, cfg).empty());
}

TEST_CASE("detection: vertex below the ground plane") {
    CollisionConfig cfg;
    cfg.thickness = 0.005;
    RibbonMesh mesh = flat_strip(4, 1.0, 0.05, Vec3(0, 0, 0.5));
    mesh.V.col(2).z() = -0.1;
    const auto constraints = detect({mesh}, {PlaneCollider{Vec3::UnitZ(), 0.0}}, cfg);
    REQUIRE(constraints.size() == 1);
    CHECK(constraints[0].entries.size() == 1);
    CHECK(constraints[0].entries[0].vertex == 2);
    CHECK(constraints[0].value({mesh.V}) == doctest::Approx(-0.1));
}

TEST_CASE("detection: sphere keep-out") {
    CollisionConfig cfg;
    cfg.thickness = 0.005;
    RibbonMesh mesh = flat_strip(4);
    const Vec3 center = mesh.V.col(1) + Vec3(0, 0, 0.05);
    const auto constraints = detect({mesh}, {SphereCollider{center, 0.08}}, cfg);
    bool found = false;
    for (const auto& c : constraints)
        if (c.entries.size() == 1 && c.entries[0].vertex == 1) found = true;
    CHECK(found);
}

TEST_CASE("broad phase matches brute force exactly on a two-ribbon scene") {
    CollisionConfig cfg;
    cfg.thickness = 0.01;
    // crossed strips nearly touching plus a self-coiled ribbon
    RibbonSpec spec(1.0, 0.05, 10);
    GeneralizedCoords q = GeneralizedCoords::rest(spec);
    q.mode = FrameMode::Floating;
    q.psi.setConstant(2 * M_PI / 10 * 1.3);  // over-closed coil: self-proximity
    const auto st = reconstruct(spec, q);

    std::vector<RibbonMesh> meshes;
    meshes.push_back(build_mesh(st.X, 10));
    RibbonMesh crossed = flat_strip(10);
    Mat3X Xc = crossed.V;
    const Mat3 R = rotation_exp(Vec3(0, 0, M_PI / 2));
    for (int i = 0; i < Xc.cols(); ++i)
        Xc.col(i) = R * (crossed.V.col(i) - Vec3(0.5, 0, 0)) + Vec3(0.15, 0.0, 0.004);
    meshes.push_back(build_mesh(Xc, 10));

    const auto fast = detect(meshes, {PlaneCollider{Vec3::UnitZ(), -1.0}}, cfg, false);
    const auto slow = detect(meshes, {PlaneCollider{Vec3::UnitZ(), -1.0}}, cfg, true);
    REQUIRE(fast.size() == slow.size());
    CHECK(fast.size() > 0);
    for (size_t i = 0; i < fast.size(); ++i) {
        REQUIRE(fast[i].entries.size() == slow[i].entries.size());
        CHECK(fast[i].normal == slow[i].normal);
        CHECK(fast[i].rhs == slow[i].rhs);
        for (size_t e = 0; e < fast[i].entries.size(); ++e) {
            CHECK(fast[i].entries[e].ribbon == slow[i].entries[e].ribbon);
            CHECK(fast[i].entries[e].vertex == slow[i].entries[e].vertex);
            CHECK(fast[i].entries[e].coeff == slow[i].entries[e].coeff);
        }
    }
}

TEST_CASE("resolve: no constraints returns the input exactly") {
    RibbonMesh mesh = flat_strip(6);
    const auto res = resolve({mesh}, {}, 100.0);
    CHECK((res.X[0] - mesh.V).norm() == 0.0);
}

TEST_CASE("resolve: single plane constraint with K=0 is an orthogonal projection") {
    RibbonMesh mesh = flat_strip(4);
    mesh.V.col(3).z() = -0.2;
    ContactConstraint c;
    c.entries = {{0, 3, 1.0}};
    c.normal = Vec3::UnitZ();
    c.rhs = 0.0;
    const auto res = resolve({mesh}, {c}, 0.0);
    CHECK(res.X[0].col(3).z() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res.X[0].col(3).head<2>() == mesh.V.col(3).head<2>());
    // untouched vertices stay put when K = 0
    CHECK((res.X[0].col(0) - mesh.V.col(0)).norm() == 0.0);
}

TEST_CASE("resolve matches the dense active-set enumeration oracle") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 40; ++trial) {
        // tiny ribbon: n=1 would be invalid, use n=2 -> 6 vertices, 18 dof; we
        // constrain at most 4 rows
        RibbonMesh mesh = flat_strip(2, 1.0, 0.3);
        for (int i = 0; i < mesh.V.cols(); ++i)
            for (int k = 0; k < 3; ++k) mesh.V(k, i) += 0.1 * u(rng);
        const double K = (trial % 2) ? 100.0 : 0.0;
        const int m = 1 + trial % 4;
        std::vector<ContactConstraint> cons;
        for (int i = 0; i < m; ++i) {
            ContactConstraint c;
            const int v = static_cast<int>((u(rng) + 1) * 2.99);
            c.entries = {{0, v, 1.0}};
            c.normal = Vec3(u(rng), u(rng), 1.5).normalized();
            c.rhs = mesh.V.col(v).dot(c.normal) + 0.05 * u(rng);  // half violated
            cons.push_back(c);
        }
        const auto res = resolve({mesh}, cons, K);

        // dense oracle over the stacked 3V coordinates
        const int V = static_cast<int>(mesh.V.cols());
        Eigen::MatrixXd Hs = Eigen::MatrixXd(assemble_hessian_scalar({mesh}, K));
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(3 * V, 3 * V);
        for (int a = 0; a < V; ++a)
            for (int b = 0; b < V; ++b)
                for (int k = 0; k < 3; ++k) H(3 * a + k, 3 * b + k) = Hs(a, b);
        VecX xt(3 * V);
        for (int v = 0; v < V; ++v) xt.segment<3>(3 * v) = mesh.V.col(v);
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, 3 * V);
        VecX b(m);
        for (int i = 0; i < m; ++i) {
            for (const auto& e : cons[i].entries)
                A.block<1, 3>(i, 3 * e.vertex) += e.coeff * cons[i].normal.transpose();
            b[i] = cons[i].rhs;
        }
        const auto oracle = oracles::brute_force_qp(H, xt, A, b);
        REQUIRE(oracle.found);
        VecX xs(3 * V);
        for (int v = 0; v < V; ++v) xs.segment<3>(3 * v) = res.X[0].col(v);
        CHECK((xs - oracle.x).lpNorm<Eigen::Infinity>() < 1e-8);

        // KKT: feasibility, stationarity, complementary slackness
        CHECK((A * xs - b).minCoeff() > -1e-8);
        CHECK((H * (xs - xt) - A.transpose() * res.lambda).lpNorm<Eigen::Infinity>() < 1e-8);
        CHECK(res.lambda.minCoeff() >= 0.0);
        for (int i = 0; i < m; ++i)
            CHECK(std::abs(res.lambda[i] * (A.row(i).dot(xs) - b[i])) < 1e-8);
    }
}

TEST_CASE("stiffened resolve preserves edge lengths better than pure projection") {
    // deep plane violation on half the strip
    RibbonMesh mesh = flat_strip(10);
    std::vector<ContactConstraint> cons;
    for (int v = 0; v < mesh.V.cols(); ++v) {
        mesh.V.col(v).z() = -0.08 * std::max(0.0, mesh.V.col(v).x() - 0.5);
        if (mesh.V.col(v).z() < 0) {
            ContactConstraint c;
            c.entries = {{0, v, 1.0}};
            c.normal = Vec3::UnitZ();
            c.rhs = 0.0;
            cons.push_back(c);
        }
    }
    auto edge_dev = [&](const Mat3X& X) {
        double worst = 0;
        for (const auto& [a, b] : mesh.edges) {
            const double l0 = (mesh.V.col(a) - mesh.V.col(b)).norm();
            const double l1 = (X.col(a) - X.col(b)).norm();
            worst = std::max(worst, std::abs(l1 - l0) / l0);
        }
        return worst;
    };
    const auto hard = resolve({mesh}, cons, 0.0);
    const auto soft = resolve({mesh}, cons, 100.0);
    CHECK(edge_dev(soft.X[0]) < edge_dev(hard.X[0]));
    // constraints still hold with stiffening
    for (const auto& c : cons) CHECK(c.value(soft.X) > -1e-8);
}

}  // TEST_SUITE
