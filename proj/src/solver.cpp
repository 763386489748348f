#include "ribsim/solver.hpp"

#include <chrono>
#include <numeric>
#include <thread>

namespace ribsim {

namespace {

struct UnitLayout {
    std::vector<int> offset;      // z offset per ribbon
    std::vector<int> width;       // substituted dof per ribbon
    int total = 0;

    explicit UnitLayout(const std::vector<StepProblem>& problems,
                        const std::vector<GeneralizedCoords>& qs) {
        offset.resize(problems.size());
        width.resize(problems.size());
        for (size_t r = 0; r < problems.size(); ++r) {
            offset[r] = total;
            width[r] = qs[r].dof();
            total += width[r];
        }
    }
};

VecX pack(const std::vector<GeneralizedCoords>& qs, const UnitLayout& layout) {
    VecX z(layout.total);
    for (size_t r = 0; r < qs.size(); ++r)
        z.segment(layout.offset[r], layout.width[r]) = substitute(qs[r]).stacked();
    return z;
}

std::vector<GeneralizedCoords> unpack(const VecX& z, const std::vector<StepProblem>& problems,
                                      const std::vector<GeneralizedCoords>& ref,
                                      const UnitLayout& layout) {
    std::vector<GeneralizedCoords> qs(problems.size());
    for (size_t r = 0; r < problems.size(); ++r) {
        const int m = problems[r].spec.num_creases();
        qs[r] = inverse_substitute(SubstitutedCoords::from_stacked(
            z.segment(layout.offset[r], layout.width[r]), m, ref[r].mode));
    }
    return qs;
}

// suffix sums turn d/dc into d/d<c1, dc>
VecX to_substituted_gradient(const CoordGradient& g, FrameMode mode) {
    const int m = static_cast<int>(g.dc.size());
    VecX out(2 * m + (mode == FrameMode::Floating ? 6 : 0));
    double acc = 0;
    VecX suffix(m);
    for (int i = m - 1; i >= 0; --i) {
        acc += g.dc[i];
        suffix[i] = acc;
    }
    out.head(m) = suffix;
    out.segment(m, m) = g.dpsi;
    if (mode == FrameMode::Floating) {
        out.segment(2 * m, 3) = g.dw;
        out.segment(2 * m + 3, 3) = g.dt;
    }
    return out;
}

struct GeneralConstraints {
    // rows: per ribbon the two end-slope inequalities, then hard-constraint
    // equalities as +/- pairs
    int rows = 0;
    struct EqualityBlock {
        int constraint;   // index into `hard`
        int first_row;    // rows [first_row, first_row + 2*size)
        int size;
    };
    std::vector<int> end_rows;  // first of the two rows per ribbon
    std::vector<EqualityBlock> blocks;
};

GeneralConstraints layout_constraints(const std::vector<StepProblem>& problems,
                                      const std::vector<HardConstraint>& hard) {
    GeneralConstraints gc;
    gc.end_rows.resize(problems.size());
    for (size_t r = 0; r < problems.size(); ++r) {
        gc.end_rows[r] = gc.rows;
        gc.rows += 2;
    }
    for (size_t h = 0; h < hard.size(); ++h) {
        const int sz = hard[h].residual_size();
        gc.blocks.push_back({static_cast<int>(h), gc.rows, sz});
        gc.rows += 2 * sz;
    }
    return gc;
}

}  // namespace

std::vector<GeneralizedCoords> optimize_unit(const std::vector<StepProblem>& problems,
                                             const std::vector<GeneralizedCoords>& initial,
                                             const std::vector<HardConstraint>& hard,
                                             const SolverConfig& config, SolveDiagnostics* diag) {
    const size_t R = problems.size();
    const UnitLayout layout(problems, initial);
    const GeneralConstraints gc = layout_constraints(problems, hard);

    std::vector<const RibbonSpec*> specs(R);
    for (size_t r = 0; r < R; ++r) specs[r] = &problems[r].spec;

    // box bounds in substituted coordinates
    VecX lower = VecX::Constant(layout.total, -std::numeric_limits<double>::infinity());
    VecX upper = VecX::Constant(layout.total, std::numeric_limits<double>::infinity());
    for (size_t r = 0; r < R; ++r) {
        const int m = problems[r].spec.num_creases();
        const double box = problems[r].spec.dc_max();
        lower.segment(layout.offset[r], m).setConstant(-box);
        upper.segment(layout.offset[r], m).setConstant(box);
    }

    AugLagState al;
    al.mu = config.mu;
    al.tolerance = config.outer_tol;
    al.lambda = VecX::Zero(gc.rows);

    SolveDiagnostics local;
    SolveDiagnostics& d = diag ? *diag : local;
    d = SolveDiagnostics{};

    // evaluate C(z) >= 0 rows for the current states
    auto constraint_values = [&](const std::vector<GeneralizedCoords>& qs,
                                 const std::vector<const ReconState*>& states) {
        VecX C(gc.rows);
        for (size_t r = 0; r < R; ++r) {
            const double end = qs[r].c[qs[r].c.size() - 1];
            const double box = problems[r].spec.dc_max();
            C[gc.end_rows[r]] = box - end;
            C[gc.end_rows[r] + 1] = box + end;
        }
        for (const auto& blk : gc.blocks) {
            const VecX e = hard[blk.constraint].residual(states, specs);
            for (int i = 0; i < blk.size; ++i) {
                C[blk.first_row + 2 * i] = e[i];
                C[blk.first_row + 2 * i + 1] = -e[i];
            }
        }
        return C;
    };

    double last_f = 0;
    VecX z = pack(initial, layout);
    VecX q_prev_stacked;
    {
        q_prev_stacked = VecX(layout.total);
        for (size_t r = 0; r < R; ++r)
            q_prev_stacked.segment(layout.offset[r], layout.width[r]) = initial[r].stacked();
    }

    std::vector<GeneralizedCoords> qs = initial;
    double final_violation = 0;

    for (int outer = 0; outer < config.outer_cap; ++outer) {
        d.outer_iterations = outer + 1;

        auto objective_cb = [&](const VecX& zv, VecX& grad) -> double {
            auto qcur = unpack(zv, problems, initial, layout);
            std::vector<ObjectiveEval> evals;
            evals.reserve(R);
            double f = 0;
            for (size_t r = 0; r < R; ++r) {
                evals.push_back(evaluate_objective(problems[r], qcur[r]));
                f += evals.back().f;
            }
            last_f = f;

            std::vector<const ReconState*> states(R);
            std::vector<ReconCotangents*> cots(R);
            for (size_t r = 0; r < R; ++r) {
                states[r] = &evals[r].state;
                cots[r] = &evals[r].cot;
            }
            const VecX C = constraint_values(qcur, states);

            // g = mu/2 * min(C + lambda/mu, 0)^2 summed over rows
            VecX row_weight = VecX::Zero(gc.rows);
            for (int i = 0; i < gc.rows; ++i) {
                const double v = C[i] + al.lambda[i] / al.mu;
                if (v < 0) {
                    f += 0.5 * al.mu * v * v;
                    row_weight[i] = al.mu * v;  // d(penalty)/dC_i
                }
            }
            for (const auto& blk : gc.blocks) {
                VecX wts(blk.size);
                for (int i = 0; i < blk.size; ++i)
                    wts[i] = row_weight[blk.first_row + 2 * i] - row_weight[blk.first_row + 2 * i + 1];
                if (!wts.isZero()) hard[blk.constraint].accumulate(states, specs, wts, cots);
            }

            grad.resize(layout.total);
            for (size_t r = 0; r < R; ++r) {
                const CoordGradient gq = problems[r].use_adjoint
                                             ? gradient_adjoint(problems[r].spec, qcur[r],
                                                                evals[r].state, evals[r].cot)
                                             : gradient_chain_rule(problems[r].spec, qcur[r],
                                                                   evals[r].state, evals[r].cot);
                grad.segment(layout.offset[r], layout.width[r]) =
                    to_substituted_gradient(gq, qcur[r].mode);
                // the end-slope rows depend on c_{n-1} = c1 + sum dc: every
                // c-slot of this ribbon carries d c_{n-1}/dz = 1
                const double wend = row_weight[gc.end_rows[r]] * (-1.0) +
                                    row_weight[gc.end_rows[r] + 1] * (1.0);
                if (wend != 0) {
                    const int m = problems[r].spec.num_creases();
                    grad.segment(layout.offset[r], m).array() += wend;
                }
            }
            return f;
        };

        BoxQNConfig qn;
        qn.memory = config.memory;
        qn.max_iterations = config.inner_cap;
        qn.grad_tol = config.grad_tol;
        const BoxQNResult inner = minimize_boxed(objective_cb, z, lower, upper, qn);
        z = inner.x;
        d.inner_iterations += inner.iterations;
        d.line_search_failed = d.line_search_failed || inner.line_search_failed;

        qs = unpack(z, problems, initial, layout);
        d.f = last_f;
        d.f_history.push_back(last_f);

        VecX q_stacked(layout.total);
        for (size_t r = 0; r < R; ++r)
            q_stacked.segment(layout.offset[r], layout.width[r]) = qs[r].stacked();
        const double change = (q_stacked - q_prev_stacked).norm();
        q_prev_stacked = q_stacked;

        std::vector<ReconState> states;
        states.reserve(R);
        std::vector<const ReconState*> state_ptrs(R);
        for (size_t r = 0; r < R; ++r) {
            states.push_back(reconstruct_unchecked(problems[r].spec, qs[r], problems[r].base));
            state_ptrs[r] = &states.back();
        }
        const VecX C = constraint_values(qs, state_ptrs);
        final_violation = (-C.cwiseMin(0.0)).maxCoeff();
        d.max_violation = final_violation;

        // Alg. 2 convergence on coordinate change, strengthened by requiring
        // the general-constraint residual to sit below tolerance as well.
        if (change < config.outer_tol && final_violation <= config.outer_tol) {
            d.converged = true;
            break;
        }
        for (int i = 0; i < gc.rows; ++i)
            al.lambda[i] = std::min(al.lambda[i] + al.mu * C[i], 0.0);
        al.outer_iteration = outer + 1;
    }
    return qs;
}

GeneralizedCoords optimize_step(const StepProblem& problem, const GeneralizedCoords& initial,
                                const std::vector<HardConstraint>& hard,
                                const SolverConfig& config, SolveDiagnostics* diag) {
    return optimize_unit({problem}, {initial}, hard, config, diag)[0];
}

RibbonState RibbonState::from_coords(const RibbonSpec& spec, const GeneralizedCoords& q,
                                     const std::optional<Mat4>& base) {
    RibbonState st;
    st.spec = spec;
    st.q = q;
    st.base = base;
    const ReconState recon = reconstruct(spec, q, base);
    st.X = recon.X;
    st.V = Mat3X::Zero(3, spec.num_rim_vertices());
    st.u_bottom = recon.rim.bottom_u;
    st.u_top = recon.rim.top_u;
    return st;
}

void SceneState::default_units() {
    units.clear();
    unit_constraints.clear();
    for (size_t r = 0; r < ribbons.size(); ++r) units.push_back({static_cast<int>(r)});
    unit_constraints.resize(units.size());
}

StepProblem make_step_problem(const SceneState& scene, const RibbonState& rib) {
    StepProblem p;
    p.spec = rib.spec;
    p.Xprev = rib.X;
    p.Vprev = rib.V;
    p.uprev_bottom = rib.u_bottom;
    p.uprev_top = rib.u_top;
    p.h = scene.h;
    p.gravity = scene.gravity;
    p.kinetic = scene.kinetic;
    p.use_adjoint = scene.solver.use_adjoint;
    p.base = rib.base;
    p.pins = rib.pins;
    p.guides = rib.guides;
    return p;
}

FrameStats timestep(SceneState& scene, int threads) {
    using clock = std::chrono::steady_clock;
    FrameStats stats;
    const size_t U = scene.units.size();

    struct UnitResult {
        std::vector<GeneralizedCoords> q;
        std::vector<ReconState> recon;
        std::vector<Mat3X> vel;
        SolveDiagnostics diag;
    };
    std::vector<UnitResult> results(U);

    const auto t0 = clock::now();
    auto solve_unit = [&](size_t u) {
        const auto& members = scene.units[u];
        std::vector<StepProblem> problems;
        std::vector<GeneralizedCoords> initial;
        problems.reserve(members.size());
        for (int r : members) {
            problems.push_back(make_step_problem(scene, scene.ribbons[r]));
            initial.push_back(scene.ribbons[r].q);
        }
        UnitResult& out = results[u];
        out.q = optimize_unit(problems, initial, scene.unit_constraints[u], scene.solver, &out.diag);
        for (size_t i = 0; i < members.size(); ++i) {
            out.recon.push_back(
                reconstruct_unchecked(problems[i].spec, out.q[i], problems[i].base));
            out.vel.push_back(update_velocity(problems[i], out.recon.back()));
        }
    };

    const int nthreads = std::max(1, threads);
    if (nthreads == 1 || U <= 1) {
        for (size_t u = 0; u < U; ++u) solve_unit(u);
    } else {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        for (int k = 0; k < std::min<size_t>(nthreads, U); ++k) {
            pool.emplace_back([&]() {
                size_t u;
                while ((u = next.fetch_add(1)) < U) solve_unit(u);
            });
        }
        for (auto& th : pool) th.join();
    }
    stats.opt_seconds = std::chrono::duration<double>(clock::now() - t0).count();

    for (size_t u = 0; u < U; ++u) {
        stats.inner_iterations += results[u].diag.inner_iterations;
        stats.outer_iterations = std::max(stats.outer_iterations, results[u].diag.outer_iterations);
        stats.f += results[u].diag.f;
        stats.max_constraint_residual =
            std::max(stats.max_constraint_residual, results[u].diag.max_violation);
        stats.warned = stats.warned || !results[u].diag.converged;
    }

    // substep 2: global collision projection on the predicted meshes
    const auto t1 = clock::now();
    std::vector<RibbonMesh> meshes;
    std::vector<std::pair<size_t, size_t>> owner;  // (unit, member) per mesh
    for (size_t u = 0; u < U; ++u)
        for (size_t i = 0; i < scene.units[u].size(); ++i) {
            meshes.push_back(build_mesh(results[u].recon[i].X, scene.ribbons[scene.units[u][i]].spec.segments));
            owner.push_back({u, i});
        }

    std::vector<ContactConstraint> contacts;
    if (scene.collision.enabled) {
        contacts = detect(meshes, scene.colliders, scene.collision);
        stats.contacts = static_cast<int>(contacts.size());
        std::vector<Mat3X> tilde;
        for (const auto& mesh : meshes) tilde.push_back(mesh.V);
        for (const auto& c : contacts)
            stats.max_penetration_before = std::max(stats.max_penetration_before, -c.value(tilde));
    }

    std::vector<Mat3X> corrected;
    if (!contacts.empty()) {
        ResolveResult rr = resolve(meshes, contacts, scene.collision.stiffness);
        corrected = std::move(rr.X);
        stats.collision_fallback = rr.fallback_used;
    } else {
        for (const auto& mesh : meshes) corrected.push_back(mesh.V);
    }
    stats.coll_seconds = std::chrono::duration<double>(clock::now() - t1).count();

    for (size_t m = 0; m < meshes.size(); ++m) {
        const auto [u, i] = owner[m];
        const int r = scene.units[u][i];
        RibbonState& rib = scene.ribbons[r];
        rib.q = results[u].q[i];
        const ReconState& recon = results[u].recon[i];
        rib.X = corrected[m];
        rib.V = results[u].vel[i] + (corrected[m] - recon.X) / scene.h;
        rib.u_bottom = recon.rim.bottom_u;
        rib.u_top = recon.rim.top_u;
        rib.warned = rib.warned || !results[u].diag.converged;
        stats.v_bend += [&]() {
            double vb = 0;
            const double coef = rib.spec.alpha * rib.spec.segments * rib.spec.width / rib.spec.length;
            for (int k = 0; k < rib.spec.num_creases(); ++k)
                vb += coef * (1 + rib.q.c[k] * rib.q.c[k]) * rib.q.psi[k] * rib.q.psi[k];
            return vb;
        }();
    }

    scene.time += scene.h;
    scene.frame += 1;
    return stats;
}

}  // namespace ribsim
