#include "ribsim/collision.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <map>
#include <set>

namespace ribsim {

double RibbonMesh::total_area() const {
    double area = 0;
    for (int t = 0; t < F.cols(); ++t) {
        const Vec3 a = V.col(F(0, t)), b = V.col(F(1, t)), c = V.col(F(2, t));
        area += 0.5 * (b - a).cross(c - a).norm();
    }
    return area;
}

RibbonMesh build_mesh(const Mat3X& X, int segments) {
    const int n = segments;
    if (X.cols() != 2 * (n + 1)) throw std::invalid_argument("vertex count does not match segments");
    RibbonMesh mesh;
    mesh.V = X;
    mesh.segments = n;
    mesh.F.resize(3, 2 * n);
    auto xi = [&](int j) { return j; };
    auto yi = [&](int j) { return n + 1 + j; };
    for (int j = 0; j < n; ++j) {
        mesh.F.col(2 * j) << xi(j), xi(j + 1), yi(j + 1);
        mesh.F.col(2 * j + 1) << xi(j), yi(j + 1), yi(j);
    }
    std::set<std::array<int, 2>> edge_set;
    for (int t = 0; t < mesh.F.cols(); ++t) {
        for (int e = 0; e < 3; ++e) {
            int a = mesh.F(e, t), b = mesh.F((e + 1) % 3, t);
            if (a > b) std::swap(a, b);
            edge_set.insert({a, b});
        }
    }
    mesh.edges.assign(edge_set.begin(), edge_set.end());
    return mesh;
}

Vec3 closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
                            Vec3* barycentric) {
    // Ericson, Real-Time Collision Detection, 5.1.5
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    auto finish = [&](double u, double v, double w) {
        if (barycentric) *barycentric = Vec3(u, v, w);
        return u * a + v * b + w * c;
    };
    if (d1 <= 0 && d2 <= 0) return finish(1, 0, 0);
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return finish(0, 1, 0);
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double v = d1 / (d1 - d3);
        return finish(1 - v, v, 0);
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return finish(0, 0, 1);
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double w = d2 / (d2 - d6);
        return finish(1 - w, 0, w);
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return finish(0, 1 - w, w);
    }
    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return finish(1 - v - w, v, w);
}

void closest_segment_segment(const Vec3& p1, const Vec3& q1, const Vec3& p2, const Vec3& q2,
                             double& s, double& t) {
    // Ericson 5.1.9
    const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
    const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
    const double eps = 1e-14;
    if (a <= eps && e <= eps) {
        s = t = 0;
        return;
    }
    if (a <= eps) {
        s = 0;
        t = std::clamp(f / e, 0.0, 1.0);
        return;
    }
    const double c = d1.dot(r);
    if (e <= eps) {
        t = 0;
        s = std::clamp(-c / a, 0.0, 1.0);
        return;
    }
    const double b = d1.dot(d2);
    const double denom = a * e - b * b;
    s = denom > eps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
    t = (b * s + f) / e;
    if (t < 0) {
        t = 0;
        s = std::clamp(-c / a, 0.0, 1.0);
    } else if (t > 1) {
        t = 1;
        s = std::clamp((b - c) / a, 0.0, 1.0);
    }
}

namespace {

struct Aabb {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
    void expand(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void expand(const Aabb& o) {
        lo = lo.cwiseMin(o.lo);
        hi = hi.cwiseMax(o.hi);
    }
    void inflate(double r) {
        lo.array() -= r;
        hi.array() += r;
    }
    bool overlaps(const Aabb& o) const {
        return (lo.array() <= o.hi.array()).all() && (o.lo.array() <= hi.array()).all();
    }
};

// Flat median-split AABB tree over one mesh's triangles, rebuilt per frame.
struct AabbTree {
    struct Node {
        Aabb box;
        int left = -1, right = -1;
        int tri = -1;  // leaf when >= 0
    };
    std::vector<Node> nodes;
    int root = -1;

    void build(const RibbonMesh& mesh, double fat) {
        std::vector<int> tris(mesh.F.cols());
        std::vector<Aabb> boxes(mesh.F.cols());
        for (int t = 0; t < mesh.F.cols(); ++t) {
            tris[t] = t;
            for (int k = 0; k < 3; ++k) boxes[t].expand(mesh.V.col(mesh.F(k, t)));
            boxes[t].inflate(fat);
        }
        nodes.clear();
        nodes.reserve(2 * tris.size());
        root = build_range(tris, boxes, 0, static_cast<int>(tris.size()));
    }

    int build_range(std::vector<int>& tris, const std::vector<Aabb>& boxes, int begin, int end) {
        Node node;
        for (int i = begin; i < end; ++i) node.box.expand(boxes[tris[i]]);
        const int idx = static_cast<int>(nodes.size());
        nodes.push_back(node);
        if (end - begin == 1) {
            nodes[idx].tri = tris[begin];
            return idx;
        }
        const Vec3 extent = nodes[idx].box.hi - nodes[idx].box.lo;
        int axis = 0;
        extent.maxCoeff(&axis);
        const int mid = (begin + end) / 2;
        std::nth_element(tris.begin() + begin, tris.begin() + mid, tris.begin() + end,
                         [&](int a, int b) {
                             return boxes[a].lo[axis] + boxes[a].hi[axis] <
                                    boxes[b].lo[axis] + boxes[b].hi[axis];
                         });
        nodes[idx].left = build_range(tris, boxes, begin, mid);
        nodes[idx].right = build_range(tris, boxes, mid, end);
        return idx;
    }

    template <typename F>
    void pairs_with(const AabbTree& other, F&& emit) const {
        if (root < 0 || other.root < 0) return;
        std::vector<std::pair<int, int>> stack{{root, other.root}};
        while (!stack.empty()) {
            auto [i, j] = stack.back();
            stack.pop_back();
            const Node& a = nodes[i];
            const Node& b = other.nodes[j];
            if (!a.box.overlaps(b.box)) continue;
            if (a.tri >= 0 && b.tri >= 0) {
                emit(a.tri, b.tri);
            } else if (a.tri >= 0) {
                stack.push_back({i, b.left});
                stack.push_back({i, b.right});
            } else {
                stack.push_back({a.left, j});
                stack.push_back({a.right, j});
            }
        }
    }

    template <typename F>
    void self_pairs(F&& emit) const {
        if (root < 0) return;
        std::vector<std::pair<int, int>> stack{{root, root}};
        while (!stack.empty()) {
            auto [i, j] = stack.back();
            stack.pop_back();
            const Node& a = nodes[i];
            const Node& b = nodes[j];
            if (i == j) {
                if (a.tri >= 0) continue;
                stack.push_back({a.left, a.left});
                stack.push_back({a.right, a.right});
                stack.push_back({a.left, a.right});
                continue;
            }
            if (!a.box.overlaps(b.box)) continue;
            if (a.tri >= 0 && b.tri >= 0) {
                emit(std::min(a.tri, b.tri), std::max(a.tri, b.tri));
            } else if (a.tri >= 0) {
                stack.push_back({i, b.left});
                stack.push_back({i, b.right});
            } else {
                stack.push_back({a.left, j});
                stack.push_back({a.right, j});
            }
        }
    }
};

// quad index a triangle came from
inline int tri_quad(int tri) { return tri / 2; }

struct PairCollector {
    // keyed for determinism and dedup
    std::set<std::array<int, 4>> vt;  // (ribbon_v, vertex, ribbon_t, tri)
    std::set<std::array<int, 4>> ee;  // (ribbon_a, edge_a, ribbon_b, edge_b), a-side <= b-side

    void add_tri_pair(const std::vector<RibbonMesh>& meshes, int ra, int ta, int rb, int tb) {
        const auto& A = meshes[ra];
        const auto& B = meshes[rb];
        const bool same = (ra == rb);
        auto excluded = [&](int qa, int qb) { return same && std::abs(qa - qb) <= 2; };
        if (excluded(tri_quad(ta), tri_quad(tb))) return;
        for (int k = 0; k < 3; ++k) {
            vt.insert({ra, A.F(k, ta), rb, tb});
            vt.insert({rb, B.F(k, tb), ra, ta});
        }
        for (int i = 0; i < 3; ++i) {
            int a1 = A.F(i, ta), a2 = A.F((i + 1) % 3, ta);
            if (a1 > a2) std::swap(a1, a2);
            const int ea = edge_id(A, a1, a2);
            for (int j = 0; j < 3; ++j) {
                int b1 = B.F(j, tb), b2 = B.F((j + 1) % 3, tb);
                if (b1 > b2) std::swap(b1, b2);
                const int eb = edge_id(B, b1, b2);
                if (ra < rb || (ra == rb && ea < eb)) {
                    ee.insert({ra, ea, rb, eb});
                } else if (rb < ra || (ra == rb && eb < ea)) {
                    ee.insert({rb, eb, ra, ea});
                }
            }
        }
    }

    static int edge_id(const RibbonMesh& mesh, int a, int b) {
        const auto it = std::lower_bound(mesh.edges.begin(), mesh.edges.end(),
                                         std::array<int, 2>{a, b});
        return static_cast<int>(it - mesh.edges.begin());
    }
};

}  // namespace

std::vector<ContactConstraint> detect(const std::vector<RibbonMesh>& meshes,
                                      const std::vector<Collider>& colliders,
                                      const CollisionConfig& config, bool brute_force) {
    std::vector<ContactConstraint> out;
    const double delta = config.thickness;

    // analytic colliders act on every vertex
    for (size_t r = 0; r < meshes.size(); ++r) {
        const auto& mesh = meshes[r];
        for (int v = 0; v < mesh.V.cols(); ++v) {
            const Vec3 x = mesh.V.col(v);
            for (const auto& col : colliders) {
                if (const auto* plane = std::get_if<PlaneCollider>(&col)) {
                    if (plane->normal.dot(x) - plane->offset < delta) {
                        out.push_back({{{static_cast<int>(r), v, 1.0}}, plane->normal, plane->offset});
                    }
                } else if (const auto* sph = std::get_if<SphereCollider>(&col)) {
                    const Vec3 d = x - sph->center;
                    const double dist = d.norm();
                    if (dist - sph->radius < delta && dist > 1e-12) {
                        const Vec3 n = d / dist;
                        out.push_back({{{static_cast<int>(r), v, 1.0}},
                                       n,
                                       sph->radius + n.dot(sph->center)});
                    }
                }
            }
        }
    }

    // candidate feature pairs
    PairCollector pc;
    if (brute_force) {
        for (size_t ra = 0; ra < meshes.size(); ++ra)
            for (size_t rb = ra; rb < meshes.size(); ++rb)
                for (int ta = 0; ta < meshes[ra].F.cols(); ++ta) {
                    const int tb0 = (ra == rb) ? ta + 1 : 0;
                    for (int tb = tb0; tb < meshes[rb].F.cols(); ++tb)
                        pc.add_tri_pair(meshes, static_cast<int>(ra), ta, static_cast<int>(rb), tb);
                }
    } else {
        std::vector<AabbTree> trees(meshes.size());
        for (size_t r = 0; r < meshes.size(); ++r) trees[r].build(meshes[r], delta / 2);
        for (size_t ra = 0; ra < meshes.size(); ++ra) {
            trees[ra].self_pairs([&](int ta, int tb) {
                pc.add_tri_pair(meshes, static_cast<int>(ra), ta, static_cast<int>(ra), tb);
            });
            for (size_t rb = ra + 1; rb < meshes.size(); ++rb) {
                trees[ra].pairs_with(trees[rb], [&](int ta, int tb) {
                    pc.add_tri_pair(meshes, static_cast<int>(ra), ta, static_cast<int>(rb), tb);
                });
            }
        }
    }

    const double rhs = config.mesh_separation_factor * delta;

    for (const auto& [rv, v, rt, t] : pc.vt) {
        const auto& A = meshes[rv];
        const auto& B = meshes[rt];
        // skip features that share material neighborhood on the same ribbon
        if (rv == rt && std::abs(A.rim_index(v) - tri_quad(t)) <= 2) continue;
        const Vec3 p = A.V.col(v);
        Vec3 bary;
        const Vec3 cp =
            closest_point_triangle(p, B.V.col(B.F(0, t)), B.V.col(B.F(1, t)), B.V.col(B.F(2, t)), &bary);
        const double dist = (p - cp).norm();
        if (dist >= delta || dist <= 1e-12) continue;
        const Vec3 n = (p - cp) / dist;
        ContactConstraint c;
        c.normal = n;
        c.rhs = rhs;
        c.entries.push_back({rv, v, 1.0});
        for (int k = 0; k < 3; ++k) c.entries.push_back({rt, B.F(k, t), -bary[k]});
        out.push_back(std::move(c));
    }

    for (const auto& [ra, ea, rb, eb] : pc.ee) {
        const auto& A = meshes[ra];
        const auto& B = meshes[rb];
        const auto [a1, a2] = A.edges[ea];
        const auto [b1, b2] = B.edges[eb];
        if (ra == rb) {
            const int qa = std::min(A.rim_index(a1), A.rim_index(a2));
            const int qb = std::min(B.rim_index(b1), B.rim_index(b2));
            if (std::abs(qa - qb) <= 2) continue;
        }
        double s, t;
        closest_segment_segment(A.V.col(a1), A.V.col(a2), B.V.col(b1), B.V.col(b2), s, t);
        const Vec3 pa = (1 - s) * A.V.col(a1) + s * A.V.col(a2);
        const Vec3 pb = (1 - t) * B.V.col(b1) + t * B.V.col(b2);
        const double dist = (pa - pb).norm();
        if (dist >= delta || dist <= 1e-12) continue;
        const Vec3 n = (pa - pb) / dist;
        ContactConstraint c;
        c.normal = n;
        c.rhs = rhs;
        c.entries.push_back({ra, a1, 1 - s});
        c.entries.push_back({ra, a2, s});
        c.entries.push_back({rb, b1, -(1 - t)});
        c.entries.push_back({rb, b2, -t});
        out.push_back(std::move(c));
    }
    return out;
}

Eigen::SparseMatrix<double> assemble_hessian_scalar(const std::vector<RibbonMesh>& meshes,
                                                    double stiffness) {
    int total = 0;
    std::vector<int> offset(meshes.size());
    for (size_t r = 0; r < meshes.size(); ++r) {
        offset[r] = total;
        total += static_cast<int>(meshes[r].V.cols());
    }
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < total; ++i) trips.emplace_back(i, i, 1.0);
    for (size_t r = 0; r < meshes.size(); ++r) {
        for (const auto& [a, b] : meshes[r].edges) {
            const int ga = offset[r] + a, gb = offset[r] + b;
            trips.emplace_back(ga, ga, stiffness);
            trips.emplace_back(gb, gb, stiffness);
            trips.emplace_back(ga, gb, -stiffness);
            trips.emplace_back(gb, ga, -stiffness);
        }
    }
    Eigen::SparseMatrix<double> H(total, total);
    H.setFromTriplets(trips.begin(), trips.end());
    return H;
}

ResolveResult resolve(const std::vector<RibbonMesh>& meshes,
                      const std::vector<ContactConstraint>& constraints, double stiffness) {
    ResolveResult res;
    res.X.resize(meshes.size());
    for (size_t r = 0; r < meshes.size(); ++r) res.X[r] = meshes[r].V;
    const int m = static_cast<int>(constraints.size());
    res.lambda = VecX::Zero(m);
    if (m == 0) return res;

    std::vector<int> offset(meshes.size());
    int total = 0;
    for (size_t r = 0; r < meshes.size(); ++r) {
        offset[r] = total;
        total += static_cast<int>(meshes[r].V.cols());
    }

    Eigen::SparseMatrix<double> H = assemble_hessian_scalar(meshes, stiffness);
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(H);
    if (llt.info() != Eigen::Success) throw std::runtime_error("stiffness Hessian factorization failed");

    // scalar coefficient vectors a_i, u_i = H^{-1} a_i, and the dual Hessian
    // G_ik = (u_i . a_k)(n_i . n_k)
    Eigen::MatrixXd Acoef = Eigen::MatrixXd::Zero(total, m);
    for (int i = 0; i < m; ++i)
        for (const auto& e : constraints[i].entries)
            Acoef(offset[e.ribbon] + e.vertex, i) += e.coeff;
    const Eigen::MatrixXd U = llt.solve(Acoef);

    Eigen::MatrixXd G(m, m);
    VecX q(m);
    for (int i = 0; i < m; ++i) {
        for (int k = 0; k <= i; ++k) {
            const double dot_n = constraints[i].normal.dot(constraints[k].normal);
            G(i, k) = G(k, i) = U.col(i).dot(Acoef.col(k)) * dot_n;
        }
        q[i] = constraints[i].value(res.X);  // A Xt - b
    }

    // primal-feasible active-set iteration on  min 1/2 L'GL + q'L, L >= 0
    VecX& lam = res.lambda;
    std::vector<bool> in_set(m, false);
    std::vector<int> passive;
    const double tol = 1e-12 * std::max(1.0, q.cwiseAbs().maxCoeff());
    const int cap = 50 * m + 100;
    bool bland = false;
    int iter = 0;
    bool ok = true;
    while (true) {
        if (++iter > cap) {
            ok = false;
            break;
        }
        const VecX w = -(G * lam + q);
        int pick = -1;
        double best = tol;
        for (int i = 0; i < m; ++i) {
            if (in_set[i]) continue;
            if (bland) {  // smallest eligible index
                if (w[i] > tol) {
                    pick = i;
                    break;
                }
            } else if (w[i] > best) {
                best = w[i];
                pick = i;
            }
        }
        if (pick < 0) break;  // KKT satisfied
        in_set[pick] = true;
        passive.push_back(pick);

        while (true) {
            if (++iter > cap) {
                ok = false;
                break;
            }
            const int np = static_cast<int>(passive.size());
            Eigen::MatrixXd Gpp(np, np);
            VecX qp(np);
            for (int a = 0; a < np; ++a) {
                qp[a] = -q[passive[a]];
                for (int b = 0; b < np; ++b) Gpp(a, b) = G(passive[a], passive[b]);
            }
            Eigen::LDLT<Eigen::MatrixXd> ldlt(Gpp);
            VecX z = ldlt.solve(qp);
            if (!z.allFinite()) {
                ok = false;
                break;
            }
            if (z.minCoeff() > 0) {
                lam.setZero();
                for (int a = 0; a < np; ++a) lam[passive[a]] = z[a];
                break;
            }
            double alpha = 1.0;
            for (int a = 0; a < np; ++a) {
                if (z[a] <= 0) {
                    const double la = lam[passive[a]];
                    if (la - z[a] > 0) alpha = std::min(alpha, la / (la - z[a]));
                }
            }
            for (int a = 0; a < np; ++a) {
                const int i = passive[a];
                lam[i] += alpha * (z[a] - lam[i]);
            }
            bland = true;  // shrinking steps: switch to anti-cycling pivoting
            std::vector<int> keep;
            for (int i : passive) {
                if (lam[i] > 1e-14) {
                    keep.push_back(i);
                } else {
                    lam[i] = 0;
                    in_set[i] = false;
                }
            }
            passive.swap(keep);
            if (!ok) break;
        }
        if (!ok) break;
    }
    res.iterations = iter;

    if (!ok) {
        // cycle guard tripped: dual projected-gradient fallback, always terminates
        res.fallback_used = true;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
        const double lip = std::max(es.eigenvalues().maxCoeff(), 1e-12);
        const double step = 1.0 / lip;
        lam.setZero();
        for (int it = 0; it < 20000; ++it) {
            const VecX grad = G * lam + q;
            const VecX next = (lam - step * grad).cwiseMax(0.0);
            if ((next - lam).lpNorm<Eigen::Infinity>() < 1e-14) {
                lam = next;
                break;
            }
            lam = next;
        }
    }

    // X = Xt + H^{-1} A^T Lambda, per coordinate
    Eigen::MatrixXd rhs_mat = Eigen::MatrixXd::Zero(total, 3);
    for (int i = 0; i < m; ++i) {
        if (lam[i] == 0) continue;
        for (const auto& e : constraints[i].entries) {
            rhs_mat.row(offset[e.ribbon] + e.vertex) += lam[i] * e.coeff * constraints[i].normal.transpose();
        }
    }
    const Eigen::MatrixXd dX = llt.solve(rhs_mat);
    for (size_t r = 0; r < meshes.size(); ++r) {
        for (int v = 0; v < meshes[r].V.cols(); ++v) {
            res.X[r].col(v) += dX.row(offset[r] + v).transpose();
        }
    }
    return res;
}

}  // namespace ribsim
