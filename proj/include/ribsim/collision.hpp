#pragma once

#include <Eigen/SparseCore>
#include <array>
#include <variant>
#include <vector>

#include "ribsim/types.hpp"

namespace ribsim {

// Conforming triangle mesh of one ribbon: two triangles per quad, split along
// the fixed diagonal x_j -> y_{j+1} so stiffness edges stay stable across
// frames.
struct RibbonMesh {
    Mat3X V;                               // 2(n+1) rim vertices [x_0..x_n, y_0..y_n]
    Eigen::Matrix3Xi F;                    // 2n triangles, consistent winding
    std::vector<std::array<int, 2>> edges; // unique edges (a < b)
    int segments = 0;

    double total_area() const;
    int rim_index(int vertex) const { return vertex % (segments + 1); }
};

RibbonMesh build_mesh(const Mat3X& X, int segments);

struct PlaneCollider {
    Vec3 normal = Vec3::UnitZ();  // unit
    double offset = 0.0;          // keep n.x >= offset
};
struct SphereCollider {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;  // keep-out
};
using Collider = std::variant<PlaneCollider, SphereCollider>;

// One linearized non-penetration row: sum_i coeff_i * normal . x_{(ribbon_i, vertex_i)} >= rhs.
struct ContactConstraint {
    struct Entry {
        int ribbon;
        int vertex;
        double coeff;
    };
    std::vector<Entry> entries;
    Vec3 normal = Vec3::UnitZ();
    double rhs = 0.0;

    double value(const std::vector<Mat3X>& X) const {
        double v = 0;
        for (const auto& e : entries) v += e.coeff * normal.dot(X[e.ribbon].col(e.vertex));
        return v - rhs;
    }
};

struct CollisionConfig {
    double thickness = 0.005;   // delta: proximity activation distance
    double stiffness = 100.0;   // K for the edge stiffness energy
    double mesh_separation_factor = 0.5;  // mesh-mesh rows enforce >= factor * delta
    bool enabled = true;
};

// Discrete proximity detection: vertex-triangle and edge-edge pairs closer
// than delta (immediate neighbors on the same ribbon excluded) plus analytic
// colliders. Deterministic ordering. brute_force bypasses the AABB trees.
std::vector<ContactConstraint> detect(const std::vector<RibbonMesh>& meshes,
                                      const std::vector<Collider>& colliders,
                                      const CollisionConfig& config, bool brute_force = false);

// Scalar stiffness Hessian I + K * sum_e (e_a - e_b)(e_a - e_b)^T over all
// mesh edges; the full Hessian is this kron Id3.
Eigen::SparseMatrix<double> assemble_hessian_scalar(const std::vector<RibbonMesh>& meshes,
                                                    double stiffness);

struct ResolveResult {
    std::vector<Mat3X> X;  // corrected vertex positions per ribbon
    VecX lambda;           // dual multipliers, one per constraint
    int iterations = 0;
    bool fallback_used = false;
};

// Stiffened closeness QP  min 1/2|X - Xt|^2 + sum_e K/2 |(x1-x2) - (xt1-xt2)|^2
// s.t. constraints >= 0, solved in dual form by a primal-feasible active-set
// iteration over the nonnegative multipliers. Empty constraint list returns
// Xt exactly.
ResolveResult resolve(const std::vector<RibbonMesh>& meshes,
                      const std::vector<ContactConstraint>& constraints, double stiffness);

// Distance helpers shared with the tests' brute-force oracle.
Vec3 closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                            Vec3* barycentric = nullptr);
void closest_segment_segment(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2,
                             double& s, double& t);

}  // namespace ribsim
