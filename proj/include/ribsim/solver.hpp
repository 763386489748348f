#pragma once

#include <optional>
#include <vector>

#include "ribsim/collision.hpp"
#include "ribsim/dynamics.hpp"
#include "ribsim/lbfgsb.hpp"

namespace ribsim {

struct SolverConfig {
    double mu = 1e3;           // augmented-Lagrangian penalty (constant schedule)
    double outer_tol = 1e-4;   // coordinate-change convergence threshold
    int outer_cap = 50;
    int inner_cap = 2000;      // L-BFGS-B iterations per outer pass
    int memory = 8;
    double grad_tol = 1e-6;
    bool use_adjoint = true;
};

struct SolveDiagnostics {
    int outer_iterations = 0;
    int inner_iterations = 0;
    double f = 0;
    double max_violation = 0;  // general inequality residual at exit
    bool converged = false;    // coordinate change + residual below tolerance
    bool line_search_failed = false;
    std::vector<double> f_history;  // per outer iteration, penalty excluded
};

// Augmented-Lagrangian state for one optimization unit: lambda <= 0 per
// inequality row, constant mu.
struct AugLagState {
    VecX lambda;
    double mu = 1e3;
    int outer_iteration = 0;
    double tolerance = 1e-4;
};

// Solve one timestep's optimization for a unit of ribbons coupled by hard
// constraints. problems/initial are parallel arrays; `hard` uses unit-local
// ribbon indices. Multipliers reset to zero each call.
std::vector<GeneralizedCoords> optimize_unit(const std::vector<StepProblem>& problems,
                                             const std::vector<GeneralizedCoords>& initial,
                                             const std::vector<HardConstraint>& hard,
                                             const SolverConfig& config,
                                             SolveDiagnostics* diag = nullptr);

// Single-ribbon convenience wrapper.
GeneralizedCoords optimize_step(const StepProblem& problem, const GeneralizedCoords& initial,
                                const std::vector<HardConstraint>& hard = {},
                                const SolverConfig& config = {},
                                SolveDiagnostics* diag = nullptr);

// Runtime state of one ribbon inside a scene.
struct RibbonState {
    RibbonSpec spec;
    GeneralizedCoords q;
    Mat3X X;   // post-collision world positions seeding the next kinetic term
    Mat3X V;
    VecX u_bottom, u_top;  // material coordinates X was sampled at
    std::vector<SoftPin> pins;
    std::vector<NormalGuide> guides;
    std::optional<Mat4> base;  // prescribed frame transform (updated by drivers)
    bool warned = false;

    static RibbonState from_coords(const RibbonSpec& spec, const GeneralizedCoords& q,
                                   const std::optional<Mat4>& base = std::nullopt);
};

struct SceneState {
    std::vector<RibbonState> ribbons;
    std::vector<std::vector<int>> units;            // partition of ribbon indices
    std::vector<std::vector<HardConstraint>> unit_constraints;  // unit-local indices
    std::vector<Collider> colliders;
    Vec3 gravity = Vec3(0, 0, -9.8);
    double h = 0.01;
    KineticMode kinetic = KineticMode::Full;
    SolverConfig solver;
    CollisionConfig collision;
    double time = 0;
    int frame = 0;

    // Every ribbon its own unit unless constraints couple them.
    void default_units();
};

struct FrameStats {
    double opt_seconds = 0;
    double coll_seconds = 0;
    int inner_iterations = 0;
    int outer_iterations = 0;
    double f = 0;
    double v_bend = 0;
    double max_constraint_residual = 0;
    int contacts = 0;
    double max_penetration_before = 0;
    bool collision_fallback = false;
    bool warned = false;
};

// One timestep: per-unit implicit optimization in parallel (substep 1), then a
// single global collision resolve (substep 2).
FrameStats timestep(SceneState& scene, int threads = 1);

StepProblem make_step_problem(const SceneState& scene, const RibbonState& rib);

}  // namespace ribsim
