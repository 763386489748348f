#include "ribsim/lbfgsb.hpp"

#include <deque>

namespace ribsim {

namespace {

VecX project(const VecX& x, const VecX& lo, const VecX& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

BoxQNResult minimize_boxed(const ObjectiveFn& fg, const VecX& x0, const VecX& lower,
                           const VecX& upper, const BoxQNConfig& config) {
    const int dim = static_cast<int>(x0.size());
    if (lower.size() != dim || upper.size() != dim)
        throw std::invalid_argument("bound vectors must match x0");
    if ((lower.array() > upper.array()).any())
        throw std::invalid_argument("lower bound exceeds upper bound");

    BoxQNResult res;
    res.x = project(x0, lower, upper);

    VecX g(dim);
    res.f = fg(res.x, g);
    res.evaluations = 1;

    std::deque<std::pair<VecX, VecX>> pairs;  // (s, y)
    double gamma = 1.0;
    int stall_count = 0;

    VecX d(dim), alpha_buf(config.memory);

    for (int iter = 0; iter < config.max_iterations; ++iter) {
        res.iterations = iter;
        const VecX pg = res.x - project(res.x - g, lower, upper);
        if (pg.lpNorm<Eigen::Infinity>() <= config.grad_tol) {
            res.converged = true;
            return res;
        }

        // variables pinned at a bound with the gradient pushing outward
        Eigen::Array<bool, Eigen::Dynamic, 1> binding(dim);
        for (int i = 0; i < dim; ++i) {
            const double span = std::max(1.0, std::abs(upper[i]) + std::abs(lower[i]));
            const double eps = 1e-12 * span;
            binding[i] = (res.x[i] <= lower[i] + eps && g[i] > 0) ||
                         (res.x[i] >= upper[i] - eps && g[i] < 0);
        }

        // two-loop recursion on the free variables
        d = -g;
        for (int i = 0; i < dim; ++i)
            if (binding[i]) d[i] = 0;
        int np = static_cast<int>(pairs.size());
        for (int i = np - 1; i >= 0; --i) {
            const auto& [s, y] = pairs[i];
            const double rho_i = 1.0 / s.dot(y);
            alpha_buf[i] = rho_i * s.dot(d);
            d -= alpha_buf[i] * y;
        }
        d *= gamma;
        for (int i = 0; i < np; ++i) {
            const auto& [s, y] = pairs[i];
            const double rho_i = 1.0 / s.dot(y);
            const double beta = rho_i * y.dot(d);
            d += (alpha_buf[i] - beta) * s;
        }
        for (int i = 0; i < dim; ++i) {
            if (binding[i]) d[i] = -g[i] * gamma;
        }
        if (g.dot(d) >= 0) {  // not a descent direction: restart from steepest descent
            pairs.clear();
            d = -g;
            for (int i = 0; i < dim; ++i)
                if (binding[i]) d[i] = -g[i];
        }

        // projected weak-Wolfe line search: backtrack on the Armijo condition,
        // expand while the new slope says the step is still too short
        double step = 1.0;
        if (pairs.empty()) {
            const double gmax = g.lpNorm<Eigen::Infinity>();
            if (gmax > 1.0) step = 1.0 / gmax;
        }
        bool accepted = false;
        VecX x_new(dim), g_new(dim);
        double f_new = res.f;
        auto try_step = [&](double t, VecX& xt, VecX& gt, double& ft) {
            xt = project(res.x + t * d, lower, upper);
            const VecX dx = xt - res.x;
            if (dx.lpNorm<Eigen::Infinity>() == 0) return false;
            ft = fg(xt, gt);
            ++res.evaluations;
            return ft <= res.f + config.armijo_c1 * g.dot(dx);
        };
        for (int ls = 0; ls < config.max_line_search; ++ls) {
            if (try_step(step, x_new, g_new, f_new)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.line_search_failed = true;
            return res;  // best-so-far iterate
        }
        const double slope0 = g.dot(d);
        for (int grow = 0; grow < 20 && g_new.dot(d) < 0.9 * slope0; ++grow) {
            VecX x_try(dim), g_try(dim);
            double f_try;
            if (!try_step(2 * step, x_try, g_try, f_try) || f_try > f_new) break;
            step *= 2;
            x_new.swap(x_try);
            g_new.swap(g_try);
            f_new = f_try;
        }

        const VecX s = x_new - res.x;
        const VecX ydiff = g_new - g;
        const double sy = s.dot(ydiff);
        if (sy > 1e-10 * s.norm() * ydiff.norm()) {
            pairs.emplace_back(s, ydiff);
            if (static_cast<int>(pairs.size()) > config.memory) pairs.pop_front();
            gamma = sy / ydiff.squaredNorm();
        }

        if (res.f - f_new <= config.stall_rel * std::max(1.0, std::abs(res.f))) {
            if (++stall_count >= config.stall_patience) {
                res.x = x_new;
                res.f = f_new;
                res.stalled = true;
                res.iterations = iter + 1;
                return res;
            }
        } else {
            stall_count = 0;
        }

        res.x = x_new;
        res.f = f_new;
        g = g_new;
    }
    res.iterations = config.max_iterations;
    return res;
}

}  // namespace ribsim
