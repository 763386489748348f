#pragma once

#include <filesystem>
#include <string>

#include "ribsim/solver.hpp"

namespace ribsim {

// Declarative scene description; serializes losslessly to JSON.
struct SceneConfig {
    struct Driver {  // prescribed frame rotation, fixed-end mode
        Vec3 axis = Vec3::UnitX();
        double rate = 0.0;  // rad/s
        bool operator==(const Driver&) const = default;
    };
    struct Ribbon {
        RibbonSpec spec;
        FrameMode frame = FrameMode::FixedEnd;
        VecX c, psi;  // empty = zeros
        Vec3 w = Vec3::Zero(), t = Vec3::Zero();
        std::optional<Driver> driver;
        bool operator==(const Ribbon& o) const;
    };
    struct Schedule {  // rotates a constraint target about an axis
        Vec3 axis = Vec3::UnitX();
        double rate = 0.0;
        bool operator==(const Schedule&) const = default;
    };
    struct Constraint {
        enum class Type { Loop, Pin, NormalGuide, Link } type = Type::Loop;
        int ribbon = 0;
        bool orientable = true;          // Loop
        VertexRef vertex;                // Pin / Link a
        Vec3 target = Vec3::Zero();      // Pin target or guide normal
        bool hard = true;                // Pin
        double strength = 0.0;           // soft terms
        int element = 0;                 // NormalGuide
        std::optional<Schedule> schedule;  // NormalGuide target rotation
        Vec3 target_velocity = Vec3::Zero();  // Pin target motion
        int ribbon_b = 0;                // Link
        VertexRef vertex_b;              // Link b
        bool operator==(const Constraint& o) const;
    };

    std::vector<Ribbon> ribbons;
    std::vector<Constraint> constraints;
    std::vector<Collider> colliders;
    Vec3 gravity = Vec3(0, 0, -9.8);
    double h = 0.01;
    int frames = 100;
    KineticMode kinetic = KineticMode::Full;
    int threads = 1;
    std::string out_dir = "out";
    SolverConfig solver;
    CollisionConfig collision;

    bool operator==(const SceneConfig& o) const;
};

SceneConfig load_scene(const std::filesystem::path& file);
void save_scene(const SceneConfig& config, const std::filesystem::path& file);
SceneConfig parse_scene(const std::string& text);  // throws with position info
std::string serialize_scene(const SceneConfig& config);

// Validates cross-references and spec invariants; throws on error.
void validate_scene(const SceneConfig& config);

// Builds the runtime state: reconstructs initial positions, partitions ribbons
// into optimization units joined by hard link constraints.
SceneState instantiate(const SceneConfig& config);

// Applies drivers / schedules for the step ending at time t_next.
void apply_schedules(const SceneConfig& config, SceneState& state, double t_next);

struct RunResult {
    int frames = 0;
    bool any_warning = false;
    double max_penetration = 0;
};

// Simulation driver: one OBJ per frame plus metrics.csv in out_dir.
RunResult run_scene(const SceneConfig& config, const std::filesystem::path& out_dir,
                    bool quiet = false);

// Built-in scenes mirroring the benchmark setups.
std::vector<std::string> preset_names();
SceneConfig make_preset(const std::string& name);

void write_obj(const std::vector<RibbonMesh>& meshes, const std::filesystem::path& file);

// Gradient-path timing harness; returns CSV text (n, chain_sec, adjoint_sec).
struct BenchRow {
    int n;
    double chain_seconds;
    double adjoint_seconds;
};
std::vector<BenchRow> bench_gradient(const std::vector<int>& sizes, int repeats = 0);
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace ribsim
