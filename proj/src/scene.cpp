#include "ribsim/scene.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

namespace ribsim {

using json = nlohmann::ordered_json;

namespace {

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
Vec3 vec_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected [x, y, z]");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vecx_to_json(const VecX& v) {
    json arr = json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}
VecX vecx_from_json(const json& j) {
    VecX v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
    return v;
}

json vertex_to_json(const VertexRef& v) {
    return json{{"rim", v.top ? "top" : "bottom"}, {"index", v.j}};
}
VertexRef vertex_from_json(const json& j) {
    VertexRef v;
    const std::string rim = j.at("rim").get<std::string>();
    if (rim != "top" && rim != "bottom") throw std::invalid_argument("rim must be top or bottom");
    v.top = rim == "top";
    v.j = j.at("index").get<int>();
    return v;
}

}  // namespace

bool SceneConfig::Ribbon::operator==(const Ribbon& o) const {
    return spec.length == o.spec.length && spec.width == o.spec.width &&
           spec.segments == o.spec.segments && spec.density == o.spec.density &&
           spec.alpha == o.spec.alpha && spec.beta == o.spec.beta && spec.margin == o.spec.margin &&
           frame == o.frame && c == o.c && psi == o.psi && w == o.w && t == o.t &&
           driver == o.driver;
}

bool SceneConfig::Constraint::operator==(const Constraint& o) const {
    return type == o.type && ribbon == o.ribbon && orientable == o.orientable &&
           vertex.top == o.vertex.top && vertex.j == o.vertex.j && target == o.target &&
           hard == o.hard && strength == o.strength && element == o.element &&
           schedule == o.schedule && target_velocity == o.target_velocity &&
           ribbon_b == o.ribbon_b && vertex_b.top == o.vertex_b.top && vertex_b.j == o.vertex_b.j;
}

bool SceneConfig::operator==(const SceneConfig& o) const {
    auto collider_eq = [](const Collider& a, const Collider& b) {
        if (a.index() != b.index()) return false;
        if (const auto* pa = std::get_if<PlaneCollider>(&a)) {
            const auto* pb = std::get_if<PlaneCollider>(&b);
            return pa->normal == pb->normal && pa->offset == pb->offset;
        }
        const auto* sa = std::get_if<SphereCollider>(&a);
        const auto* sb = std::get_if<SphereCollider>(&b);
        return sa->center == sb->center && sa->radius == sb->radius;
    };
    if (!(ribbons == o.ribbons && constraints == o.constraints && gravity == o.gravity &&
          h == o.h && frames == o.frames && kinetic == o.kinetic && threads == o.threads &&
          out_dir == o.out_dir))
        return false;
    if (colliders.size() != o.colliders.size()) return false;
    for (size_t i = 0; i < colliders.size(); ++i)
        if (!collider_eq(colliders[i], o.colliders[i])) return false;
    return solver.mu == o.solver.mu && solver.outer_tol == o.solver.outer_tol &&
           solver.outer_cap == o.solver.outer_cap && solver.inner_cap == o.solver.inner_cap &&
           solver.memory == o.solver.memory && solver.grad_tol == o.solver.grad_tol &&
           solver.use_adjoint == o.solver.use_adjoint &&
           collision.thickness == o.collision.thickness &&
           collision.stiffness == o.collision.stiffness &&
           collision.mesh_separation_factor == o.collision.mesh_separation_factor &&
           collision.enabled == o.collision.enabled;
}

std::string serialize_scene(const SceneConfig& cfg) {
    json j;
    j["gravity"] = vec_to_json(cfg.gravity);
    j["h"] = cfg.h;
    j["frames"] = cfg.frames;
    j["kinetic"] = cfg.kinetic == KineticMode::Full ? "full" : "lumped";
    j["threads"] = cfg.threads;
    j["out_dir"] = cfg.out_dir;
    j["solver"] = {{"mu", cfg.solver.mu},
                   {"outer_tol", cfg.solver.outer_tol},
                   {"outer_cap", cfg.solver.outer_cap},
                   {"inner_cap", cfg.solver.inner_cap},
                   {"memory", cfg.solver.memory},
                   {"grad_tol", cfg.solver.grad_tol},
                   {"gradient", cfg.solver.use_adjoint ? "adjoint" : "chain"}};
    j["collision"] = {{"enabled", cfg.collision.enabled},
                      {"thickness", cfg.collision.thickness},
                      {"stiffness", cfg.collision.stiffness},
                      {"separation_factor", cfg.collision.mesh_separation_factor}};
    j["ribbons"] = json::array();
    for (const auto& r : cfg.ribbons) {
        json jr;
        jr["length"] = r.spec.length;
        jr["width"] = r.spec.width;
        jr["segments"] = r.spec.segments;
        jr["density"] = r.spec.density;
        jr["alpha"] = r.spec.alpha;
        jr["beta"] = r.spec.beta;
        jr["margin"] = r.spec.margin;
        jr["frame"] = r.frame == FrameMode::Floating ? "floating" : "fixed";
        jr["c"] = vecx_to_json(r.c);
        jr["psi"] = vecx_to_json(r.psi);
        jr["w"] = vec_to_json(r.w);
        jr["t"] = vec_to_json(r.t);
        if (r.driver) {
            jr["driver"] = {{"axis", vec_to_json(r.driver->axis)}, {"rate", r.driver->rate}};
        }
        j["ribbons"].push_back(jr);
    }
    j["constraints"] = json::array();
    for (const auto& c : cfg.constraints) {
        json jc;
        switch (c.type) {
            case SceneConfig::Constraint::Type::Loop:
                jc["type"] = "loop";
                jc["ribbon"] = c.ribbon;
                jc["orientable"] = c.orientable;
                break;
            case SceneConfig::Constraint::Type::Pin:
                jc["type"] = "pin";
                jc["ribbon"] = c.ribbon;
                jc["vertex"] = vertex_to_json(c.vertex);
                jc["target"] = vec_to_json(c.target);
                jc["hard"] = c.hard;
                jc["strength"] = c.strength;
                jc["target_velocity"] = vec_to_json(c.target_velocity);
                break;
            case SceneConfig::Constraint::Type::NormalGuide:
                jc["type"] = "normal-guide";
                jc["ribbon"] = c.ribbon;
                jc["element"] = c.element;
                jc["target"] = vec_to_json(c.target);
                jc["strength"] = c.strength;
                if (c.schedule) {
                    jc["schedule"] = {{"axis", vec_to_json(c.schedule->axis)},
                                      {"rate", c.schedule->rate}};
                }
                break;
            case SceneConfig::Constraint::Type::Link:
                jc["type"] = "link";
                jc["ribbon"] = c.ribbon;
                jc["vertex"] = vertex_to_json(c.vertex);
                jc["ribbon_b"] = c.ribbon_b;
                jc["vertex_b"] = vertex_to_json(c.vertex_b);
                break;
        }
        j["constraints"].push_back(jc);
    }
    j["colliders"] = json::array();
    for (const auto& col : cfg.colliders) {
        if (const auto* plane = std::get_if<PlaneCollider>(&col)) {
            j["colliders"].push_back(
                {{"type", "plane"}, {"normal", vec_to_json(plane->normal)}, {"offset", plane->offset}});
        } else if (const auto* sph = std::get_if<SphereCollider>(&col)) {
            j["colliders"].push_back(
                {{"type", "sphere"}, {"center", vec_to_json(sph->center)}, {"radius", sph->radius}});
        }
    }
    return j.dump(2) + "\n";
}

SceneConfig parse_scene(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("scene parse error: " + std::string(e.what()));
    }
    SceneConfig cfg;
    cfg.gravity = j.contains("gravity") ? vec_from_json(j["gravity"]) : Vec3(0, 0, -9.8);
    cfg.h = j.value("h", 0.01);
    cfg.frames = j.value("frames", 100);
    const std::string kin = j.value("kinetic", "full");
    if (kin != "full" && kin != "lumped") throw std::invalid_argument("kinetic must be full|lumped");
    cfg.kinetic = kin == "full" ? KineticMode::Full : KineticMode::Lumped;
    cfg.threads = j.value("threads", 1);
    cfg.out_dir = j.value("out_dir", std::string("out"));
    if (j.contains("solver")) {
        const json& js = j["solver"];
        cfg.solver.mu = js.value("mu", 1e3);
        cfg.solver.outer_tol = js.value("outer_tol", 1e-4);
        cfg.solver.outer_cap = js.value("outer_cap", 50);
        cfg.solver.inner_cap = js.value("inner_cap", 2000);
        cfg.solver.memory = js.value("memory", 8);
        cfg.solver.grad_tol = js.value("grad_tol", 1e-6);
        const std::string grad = js.value("gradient", "adjoint");
        if (grad != "adjoint" && grad != "chain")
            throw std::invalid_argument("gradient must be adjoint|chain");
        cfg.solver.use_adjoint = grad == "adjoint";
    }
    if (j.contains("collision")) {
        const json& jc = j["collision"];
        cfg.collision.enabled = jc.value("enabled", true);
        cfg.collision.thickness = jc.value("thickness", 0.005);
        cfg.collision.stiffness = jc.value("stiffness", 100.0);
        cfg.collision.mesh_separation_factor = jc.value("separation_factor", 0.5);
    }
    for (const json& jr : j.value("ribbons", json::array())) {
        SceneConfig::Ribbon r;
        r.spec.length = jr.at("length").get<double>();
        r.spec.width = jr.at("width").get<double>();
        r.spec.segments = jr.at("segments").get<int>();
        r.spec.density = jr.value("density", 1.0);
        r.spec.alpha = jr.value("alpha", 1.0);
        r.spec.beta = jr.value("beta", 0.1);
        r.spec.margin = jr.value("margin", 0.95);
        r.spec.validate();
        const std::string frame = jr.value("frame", "fixed");
        if (frame != "fixed" && frame != "floating")
            throw std::invalid_argument("frame must be fixed|floating");
        r.frame = frame == "floating" ? FrameMode::Floating : FrameMode::FixedEnd;
        const int m = r.spec.num_creases();
        r.c = jr.contains("c") ? vecx_from_json(jr["c"]) : VecX::Zero(m);
        r.psi = jr.contains("psi") ? vecx_from_json(jr["psi"]) : VecX::Zero(m);
        if (r.c.size() != m || r.psi.size() != m)
            throw std::invalid_argument("c/psi arrays must have segments-1 entries");
        if (jr.contains("w")) r.w = vec_from_json(jr["w"]);
        if (jr.contains("t")) r.t = vec_from_json(jr["t"]);
        if (jr.contains("driver")) {
            SceneConfig::Driver d;
            d.axis = vec_from_json(jr["driver"].at("axis"));
            d.rate = jr["driver"].at("rate").get<double>();
            r.driver = d;
        }
        cfg.ribbons.push_back(std::move(r));
    }
    for (const json& jc : j.value("constraints", json::array())) {
        SceneConfig::Constraint c;
        const std::string type = jc.at("type").get<std::string>();
        if (type == "loop") {
            c.type = SceneConfig::Constraint::Type::Loop;
            c.ribbon = jc.at("ribbon").get<int>();
            c.orientable = jc.value("orientable", true);
        } else if (type == "pin") {
            c.type = SceneConfig::Constraint::Type::Pin;
            c.ribbon = jc.at("ribbon").get<int>();
            c.vertex = vertex_from_json(jc.at("vertex"));
            c.target = vec_from_json(jc.at("target"));
            c.hard = jc.value("hard", true);
            c.strength = jc.value("strength", 0.0);
            if (jc.contains("target_velocity")) c.target_velocity = vec_from_json(jc["target_velocity"]);
        } else if (type == "normal-guide") {
            c.type = SceneConfig::Constraint::Type::NormalGuide;
            c.ribbon = jc.at("ribbon").get<int>();
            c.element = jc.at("element").get<int>();
            c.target = vec_from_json(jc.at("target"));
            c.strength = jc.at("strength").get<double>();
            if (jc.contains("schedule")) {
                SceneConfig::Schedule s;
                s.axis = vec_from_json(jc["schedule"].at("axis"));
                s.rate = jc["schedule"].at("rate").get<double>();
                c.schedule = s;
            }
        } else if (type == "link") {
            c.type = SceneConfig::Constraint::Type::Link;
            c.ribbon = jc.at("ribbon").get<int>();
            c.vertex = vertex_from_json(jc.at("vertex"));
            c.ribbon_b = jc.at("ribbon_b").get<int>();
            c.vertex_b = vertex_from_json(jc.at("vertex_b"));
        } else {
            throw std::invalid_argument("unknown constraint type: " + type);
        }
        cfg.constraints.push_back(std::move(c));
    }
    for (const json& jc : j.value("colliders", json::array())) {
        const std::string type = jc.at("type").get<std::string>();
        if (type == "plane") {
            PlaneCollider p;
            p.normal = vec_from_json(jc.at("normal")).normalized();
            p.offset = jc.at("offset").get<double>();
            cfg.colliders.push_back(p);
        } else if (type == "sphere") {
            SphereCollider s;
            s.center = vec_from_json(jc.at("center"));
            s.radius = jc.at("radius").get<double>();
            cfg.colliders.push_back(s);
        } else {
            throw std::invalid_argument("unknown collider type: " + type);
        }
    }
    validate_scene(cfg);
    return cfg;
}

SceneConfig load_scene(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::invalid_argument("cannot open scene file: " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scene(ss.str());
}

void save_scene(const SceneConfig& cfg, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::invalid_argument("cannot write scene file: " + file.string());
    out << serialize_scene(cfg);
}

void validate_scene(const SceneConfig& cfg) {
    if (cfg.h <= 0) throw std::invalid_argument("timestep must be positive");
    if (cfg.frames < 0) throw std::invalid_argument("frame count must be nonnegative");
    const int R = static_cast<int>(cfg.ribbons.size());
    for (const auto& r : cfg.ribbons) {
        r.spec.validate();
        require_feasible(r.spec, r.c);
    }
    for (const auto& c : cfg.constraints) {
        auto check_ribbon = [&](int idx) {
            if (idx < 0 || idx >= R) throw std::invalid_argument("constraint references unknown ribbon");
        };
        check_ribbon(c.ribbon);
        if (c.type == SceneConfig::Constraint::Type::Link) check_ribbon(c.ribbon_b);
        if (c.type == SceneConfig::Constraint::Type::NormalGuide) {
            if (c.element < 0 || c.element >= cfg.ribbons[c.ribbon].spec.segments)
                throw std::invalid_argument("normal guide element out of range");
            if (c.strength < 0) throw std::invalid_argument("soft strengths must be nonnegative");
        }
        if (c.type == SceneConfig::Constraint::Type::Pin) {
            c.vertex.column(cfg.ribbons[c.ribbon].spec);  // throws when out of range
            if (!c.hard && c.strength < 0)
                throw std::invalid_argument("soft strengths must be nonnegative");
        }
    }
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
    void join(int a, int b) { parent[find(a)] = find(b); }
};

Mat4 spin_transform(const Vec3& axis, double angle) {
    Mat4 T = Mat4::Identity();
    T.topLeftCorner<3, 3>() = rotation_exp(axis.normalized() * angle);
    return T;
}

}  // namespace

void apply_schedules(const SceneConfig& cfg, SceneState& state, double t_next) {
    for (size_t r = 0; r < cfg.ribbons.size(); ++r) {
        auto& rib = state.ribbons[r];
        rib.pins.clear();
        rib.guides.clear();
        if (cfg.ribbons[r].driver && cfg.ribbons[r].frame == FrameMode::FixedEnd) {
            const auto& d = *cfg.ribbons[r].driver;
            rib.base = spin_transform(d.axis, d.rate * t_next);
        }
    }
    for (auto& uc : state.unit_constraints) uc.clear();

    std::vector<int> unit_of(state.ribbons.size());
    std::vector<int> local_of(state.ribbons.size());
    for (size_t u = 0; u < state.units.size(); ++u)
        for (size_t i = 0; i < state.units[u].size(); ++i) {
            unit_of[state.units[u][i]] = static_cast<int>(u);
            local_of[state.units[u][i]] = static_cast<int>(i);
        }

    for (const auto& c : cfg.constraints) {
        switch (c.type) {
            case SceneConfig::Constraint::Type::Loop: {
                HardConstraint hc;
                hc.kind = HardConstraint::Kind::Loop;
                hc.ribbon = local_of[c.ribbon];
                hc.orientable = c.orientable;
                state.unit_constraints[unit_of[c.ribbon]].push_back(hc);
                break;
            }
            case SceneConfig::Constraint::Type::Pin: {
                const Vec3 target = c.target + c.target_velocity * t_next;
                if (c.hard) {
                    HardConstraint hc;
                    hc.kind = HardConstraint::Kind::Pin;
                    hc.ribbon = local_of[c.ribbon];
                    hc.vertex = c.vertex;
                    hc.target = target;
                    state.unit_constraints[unit_of[c.ribbon]].push_back(hc);
                } else {
                    state.ribbons[c.ribbon].pins.push_back({c.vertex, target, c.strength});
                }
                break;
            }
            case SceneConfig::Constraint::Type::NormalGuide: {
                Vec3 target = c.target;
                if (c.schedule) {
                    target = rotation_exp(c.schedule->axis.normalized() * (c.schedule->rate * t_next)) *
                             c.target;
                }
                state.ribbons[c.ribbon].guides.push_back({c.element, target, c.strength});
                break;
            }
            case SceneConfig::Constraint::Type::Link: {
                HardConstraint hc;
                hc.kind = HardConstraint::Kind::Link;
                hc.ribbon = local_of[c.ribbon];
                hc.vertex = c.vertex;
                hc.ribbon_b = local_of[c.ribbon_b];
                hc.vertex_b = c.vertex_b;
                state.unit_constraints[unit_of[c.ribbon]].push_back(hc);
                break;
            }
        }
    }
}

SceneState instantiate(const SceneConfig& cfg) {
    validate_scene(cfg);
    SceneState state;
    state.gravity = cfg.gravity;
    state.h = cfg.h;
    state.kinetic = cfg.kinetic;
    state.solver = cfg.solver;
    state.collision = cfg.collision;
    state.colliders = cfg.colliders;

    for (const auto& r : cfg.ribbons) {
        GeneralizedCoords q;
        q.c = r.c;
        q.psi = r.psi;
        q.mode = r.frame;
        q.w = r.w;
        q.t = r.t;
        std::optional<Mat4> base;
        if (r.driver && r.frame == FrameMode::FixedEnd) base = Mat4::Identity();
        state.ribbons.push_back(RibbonState::from_coords(r.spec, q, base));
    }

    // hard links merge ribbons into one optimization unit
    UnionFind uf(static_cast<int>(cfg.ribbons.size()));
    for (const auto& c : cfg.constraints)
        if (c.type == SceneConfig::Constraint::Type::Link) uf.join(c.ribbon, c.ribbon_b);

    std::map<int, std::vector<int>> groups;
    for (int r = 0; r < static_cast<int>(cfg.ribbons.size()); ++r) groups[uf.find(r)].push_back(r);
    for (auto& [root, members] : groups) state.units.push_back(members);
    state.unit_constraints.resize(state.units.size());

    apply_schedules(cfg, state, 0.0);
    return state;
}

void write_obj(const std::vector<RibbonMesh>& meshes, const std::filesystem::path& file) {
    std::FILE* f = std::fopen(file.string().c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + file.string());
    int base = 1;
    for (size_t r = 0; r < meshes.size(); ++r) {
        std::fprintf(f, "g ribbon%zu\n", r);
        const auto& mesh = meshes[r];
        for (int v = 0; v < mesh.V.cols(); ++v)
            std::fprintf(f, "v %.17g %.17g %.17g\n", mesh.V(0, v), mesh.V(1, v), mesh.V(2, v));
        for (int t = 0; t < mesh.F.cols(); ++t)
            std::fprintf(f, "f %d %d %d\n", base + mesh.F(0, t), base + mesh.F(1, t),
                         base + mesh.F(2, t));
        base += static_cast<int>(mesh.V.cols());
    }
    std::fclose(f);
}

namespace {

double analytic_penetration(const SceneState& state) {
    double pen = 0;
    for (const auto& rib : state.ribbons) {
        for (int v = 0; v < rib.X.cols(); ++v) {
            const Vec3 x = rib.X.col(v);
            for (const auto& col : state.colliders) {
                double sd = 0;
                if (const auto* plane = std::get_if<PlaneCollider>(&col))
                    sd = plane->normal.dot(x) - plane->offset;
                else if (const auto* sph = std::get_if<SphereCollider>(&col))
                    sd = (x - sph->center).norm() - sph->radius;
                pen = std::max(pen, -sd);
            }
        }
    }
    return pen;
}

std::vector<RibbonMesh> scene_meshes(const SceneState& state) {
    std::vector<RibbonMesh> meshes;
    for (const auto& rib : state.ribbons) meshes.push_back(build_mesh(rib.X, rib.spec.segments));
    return meshes;
}

}  // namespace

RunResult run_scene(const SceneConfig& cfg, const std::filesystem::path& out_dir, bool quiet) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    SceneState state = instantiate(cfg);

    std::ofstream csv(out_dir / "metrics.csv");
    csv << "frame,time,f,v_bend,constraint_residual,inner_iters,outer_iters,"
           "opt_seconds,coll_seconds,contacts,penetration,warned\n";

    auto frame_path = [&](int frame) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "frame_%06d.obj", frame);
        return out_dir / buf;
    };
    write_obj(scene_meshes(state), frame_path(0));

    RunResult result;
    for (int frame = 0; frame < cfg.frames; ++frame) {
        apply_schedules(cfg, state, state.time + cfg.h);
        const FrameStats stats = timestep(state, cfg.threads);
        const double pen = analytic_penetration(state);
        result.max_penetration = std::max(result.max_penetration, pen);
        result.any_warning = result.any_warning || stats.warned;
        write_obj(scene_meshes(state), frame_path(frame + 1));
        csv << frame + 1 << ',' << state.time << ',' << stats.f << ',' << stats.v_bend << ','
            << stats.max_constraint_residual << ',' << stats.inner_iterations << ','
            << stats.outer_iterations << ',' << stats.opt_seconds << ',' << stats.coll_seconds
            << ',' << stats.contacts << ',' << pen << ',' << (stats.warned ? 1 : 0) << '\n';
        if (!quiet) {
            std::cout << "frame " << frame + 1 << "/" << cfg.frames << " f=" << stats.f
                      << " residual=" << stats.max_constraint_residual
                      << " inner=" << stats.inner_iterations << " contacts=" << stats.contacts
                      << (stats.warned ? " [warn]" : "") << "\n";
        }
        result.frames = frame + 1;
    }
    return result;
}

std::vector<std::string> preset_names() {
    return {"torsion",      "extreme-dragging", "helix-unroll", "mobius-chain", "falling",
            "double-chain", "rotate",           "rotate-lumped", "chain-impact"};
}

namespace {

SceneConfig::Ribbon standard_ribbon(int segments = 50, double length = 1.0, double width = 0.05) {
    SceneConfig::Ribbon r;
    r.spec = RibbonSpec(length, width, segments);
    r.c = VecX::Zero(segments - 1);
    r.psi = VecX::Zero(segments - 1);
    return r;
}

// closed regular-polygon initial guess: psi = 2 pi / n rolls the strip into a
// loop whose endpoints coincide exactly
void roll_circle(SceneConfig::Ribbon& r, double turns = 1.0) {
    r.psi.setConstant(2 * M_PI * turns / r.spec.segments);
}

// half-twisted closed seed: constant crease slope cbar distributes a half
// twist while psi closes the loop
void seed_mobius(SceneConfig::Ribbon& r) {
    const double cbar = 0.5;
    r.c.setConstant(cbar);
    r.psi.setConstant(2 * M_PI * std::sqrt(1 + cbar * cbar) / r.spec.segments);
}

}  // namespace

SceneConfig make_preset(const std::string& name) {
    SceneConfig cfg;
    cfg.out_dir = "out/" + name;

    if (name == "torsion") {
        auto r = standard_ribbon();
        // the perfectly flat state is a stationary point of any twist about
        // the centerline; seed a small generic perturbation
        const int n = r.spec.segments;
        for (int i = 0; i < n - 1; ++i) {
            r.c[i] = 0.02 * std::sin(M_PI * (i + 1) / n);
            r.psi[i] = 0.02 * std::sin(2 * M_PI * (i + 1) / n);
        }
        cfg.ribbons.push_back(r);
        cfg.gravity.setZero();
        cfg.frames = 100;
        SceneConfig::Constraint g;
        g.type = SceneConfig::Constraint::Type::NormalGuide;
        g.ribbon = 0;
        g.element = 49;
        g.target = Vec3::UnitZ();
        g.strength = 100.0;
        g.schedule = SceneConfig::Schedule{Vec3::UnitX(), 4 * M_PI};
        cfg.constraints.push_back(g);
    } else if (name == "extreme-dragging") {
        auto r = standard_ribbon();
        r.frame = FrameMode::Floating;
        roll_circle(r);
        cfg.ribbons.push_back(r);
        cfg.gravity.setZero();
        cfg.frames = 100;
        SceneConfig::Constraint loop;
        loop.type = SceneConfig::Constraint::Type::Loop;
        loop.orientable = true;
        cfg.constraints.push_back(loop);
        SceneConfig::Constraint pin;
        pin.type = SceneConfig::Constraint::Type::Pin;
        pin.vertex = {false, 25};
        pin.target = Vec3::Zero();
        pin.hard = false;
        pin.strength = 50.0;
        pin.target_velocity = Vec3(2.0, 0, 0);
        cfg.constraints.push_back(pin);
    } else if (name == "helix-unroll") {
        auto r = standard_ribbon();
        r.frame = FrameMode::Floating;
        roll_circle(r, 1.25);
        cfg.ribbons.push_back(r);
        cfg.gravity.setZero();
        cfg.frames = 100;
    } else if (name == "mobius-chain") {
        cfg.gravity.setZero();
        cfg.frames = 10;
        for (int k = 0; k < 9; ++k) {
            auto r = standard_ribbon();
            r.frame = FrameMode::Floating;
            seed_mobius(r);
            r.t = Vec3(0.22 * k, 0, 0);
            if (k % 2 == 1) r.w = Vec3(M_PI / 2, 0, 0);
            cfg.ribbons.push_back(r);
            SceneConfig::Constraint loop;
            loop.type = SceneConfig::Constraint::Type::Loop;
            loop.ribbon = k;
            loop.orientable = false;
            cfg.constraints.push_back(loop);
        }
    } else if (name == "falling") {
        auto r = standard_ribbon(150, 1.5, 0.05);
        r.frame = FrameMode::Floating;
        r.w = Vec3(0, -0.15, 0);
        r.t = Vec3(0, 0, 0.25);
        cfg.ribbons.push_back(r);
        cfg.frames = 100;
        cfg.colliders.push_back(PlaneCollider{Vec3::UnitZ(), 0.0});
    } else if (name == "double-chain") {
        cfg.frames = 20;
        cfg.colliders.push_back(PlaneCollider{Vec3::UnitZ(), 0.0});
        for (int chain = 0; chain < 2; ++chain) {
            for (int k = 0; k < 9; ++k) {
                auto r = standard_ribbon();
                r.frame = FrameMode::Floating;
                roll_circle(r);
                r.t = Vec3(0.22 * k, chain * 0.05, 0.35 + chain * 0.45);
                r.w = (k % 2 == 1) ? Vec3(M_PI / 2, 0, 0) : Vec3::Zero();
                cfg.ribbons.push_back(r);
                SceneConfig::Constraint loop;
                loop.type = SceneConfig::Constraint::Type::Loop;
                loop.ribbon = chain * 9 + k;
                loop.orientable = true;
                cfg.constraints.push_back(loop);
            }
        }
    } else if (name == "rotate" || name == "rotate-lumped") {
        auto r = standard_ribbon();
        r.driver = SceneConfig::Driver{Vec3::UnitX(), 2 * M_PI};
        cfg.ribbons.push_back(r);
        cfg.gravity.setZero();
        cfg.kinetic = name == "rotate" ? KineticMode::Full : KineticMode::Lumped;
        cfg.frames = 100;
        cfg.collision.enabled = false;
    } else if (name == "chain-impact") {
        // localized crosswise impact at a timestep large enough to make the
        // contact forces stiff; detection thickness widened to match the
        // per-step travel
        cfg.frames = 15;
        cfg.h = 0.02;
        cfg.collision.thickness = 0.01;
        auto a = standard_ribbon(20, 1.0, 0.05);
        cfg.ribbons.push_back(a);  // fixed-end strip along the x axis
        auto b = standard_ribbon(20, 1.0, 0.05);
        b.spec.density = 4.0;      // heavier impactor
        b.frame = FrameMode::Floating;
        b.w = Vec3(0, 0, M_PI / 2);  // crosswise above the first ribbon
        b.t = Vec3(0.5, -0.5, 0.025);
        cfg.ribbons.push_back(b);
    } else {
        throw std::invalid_argument("unknown preset: " + name);
    }
    return cfg;
}

std::vector<BenchRow> bench_gradient(const std::vector<int>& sizes, int repeats) {
    std::vector<BenchRow> rows;
    for (int n : sizes) {
        const RibbonSpec spec(1.0, 0.05, n);
        const GeneralizedCoords q = random_feasible_coords(spec, 1234 + n);
        const ReconState state = reconstruct(spec, q);
        ReconCotangents cot = ReconCotangents::zero(spec);
        cot.dc_direct = VecX::Zero(spec.num_creases());
        cot.dpsi_direct = VecX::Zero(spec.num_creases());
        std::mt19937_64 rng(99);
        std::uniform_real_distribution<double> u(-1, 1);
        for (int i = 0; i < cot.dX.cols(); ++i)
            for (int k = 0; k < 3; ++k) cot.dX(k, i) = u(rng);
        for (int i = 0; i < cot.dN.cols(); ++i)
            for (int k = 0; k < 3; ++k) cot.dN(k, i) = u(rng);

        using clock = std::chrono::steady_clock;
        auto measure = [&](auto&& fn) {
            double best = std::numeric_limits<double>::infinity();
            for (int trial = 0; trial < 3; ++trial) {
                int calls = 0;
                const auto start = clock::now();
                double elapsed = 0;
                do {
                    fn();
                    ++calls;
                    elapsed = std::chrono::duration<double>(clock::now() - start).count();
                } while (elapsed < 0.03 && (repeats <= 0 || calls < repeats));
                best = std::min(best, elapsed / calls);
            }
            return best;
        };
        volatile double sink = 0;
        const double chain = measure([&]() {
            const CoordGradient g = gradient_chain_rule(spec, q, state, cot);
            sink = sink + g.dc[0];
        });
        const double adjoint = measure([&]() {
            const CoordGradient g = gradient_adjoint(spec, q, state, cot);
            sink = sink + g.dc[0];
        });
        rows.push_back({n, chain, adjoint});
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "n,chain_seconds,adjoint_seconds\n";
    for (const auto& row : rows)
        out << row.n << ',' << row.chain_seconds << ',' << row.adjoint_seconds << '\n';
    return out.str();
}

}  // namespace ribsim
