#pragma once

#include <functional>

#include "ribsim/types.hpp"

namespace ribsim {

struct BoxQNConfig {
    int memory = 8;            // stored (s, y) pairs
    int max_iterations = 2000;
    double grad_tol = 1e-6;    // infinity norm of the projected gradient
    double armijo_c1 = 1e-4;
    int max_line_search = 60;
    // stop after this many consecutive steps whose decrease is below
    // stall_rel * max(1, |f|); keeps kinked objectives from burning the cap
    int stall_patience = 20;
    double stall_rel = 1e-14;
};

struct BoxQNResult {
    VecX x;
    double f = 0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    bool line_search_failed = false;
    bool stalled = false;
};

using ObjectiveFn = std::function<double(const VecX&, VecX&)>;

// Bound-constrained limited-memory quasi-Newton minimizer: gradient projection
// identifies the active bounds, an L-BFGS two-loop direction drives the free
// variables, and a projected backtracking line search enforces decrease. The
// iterate never leaves the box. Line-search failure is non-fatal: the best
// iterate so far is returned with the flag set.
BoxQNResult minimize_boxed(const ObjectiveFn& fg, const VecX& x0, const VecX& lower,
                           const VecX& upper, const BoxQNConfig& config = {});

}  // namespace ribsim
