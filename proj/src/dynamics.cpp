#include "ribsim/dynamics.hpp"

#include <Eigen/Sparse>

namespace ribsim {

namespace {

Mat4 pattern_base(const RibbonSpec& spec) {
    const double lw_n = spec.length * spec.width / spec.segments;
    Mat4 base;
    const double a = lw_n / 9, b = lw_n / 18, c = lw_n / 36;
    base << a, b, b, c,
            b, a, c, b,
            b, c, a, b,
            c, b, b, a;
    return base;
}

}  // namespace

Mat4 MassMatrix::pattern_slope(const RibbonSpec& spec) {
    const double w2 = spec.width * spec.width;
    Mat4 s = Mat4::Zero();
    s(0, 0) = -w2 / 36;
    s(0, 2) = s(2, 0) = -w2 / 72;
    s(2, 2) = -w2 / 36;
    s(1, 1) = w2 / 36;
    s(1, 3) = s(3, 1) = w2 / 72;
    s(3, 3) = w2 / 36;
    return s;
}

MassMatrix::MassMatrix(const RibbonSpec& spec, const VecX& c)
    : n_(spec.segments), base_(pattern_base(spec)), slope_(pattern_slope(spec)) {
    dc_.resize(n_);
    for (int i = 0; i < n_; ++i) {
        const double ci = (i == 0) ? 0.0 : c[i - 1];
        const double cip = (i + 1 == n_) ? 0.0 : c[i];
        dc_[i] = cip - ci;
    }
}

double MassMatrix::element_total(int i) const {
    return element_pattern(i).sum();
}

namespace {
inline std::array<int, 4> element_columns(int n, int i) {
    return {i, n + 1 + i, i + 1, n + 2 + i};
}
}  // namespace

double MassMatrix::quadratic_form(const Mat3X& v) const {
    double acc = 0;
    for (int i = 0; i < n_; ++i) {
        const Mat4 p = element_pattern(i);
        const auto cols = element_columns(n_, i);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) acc += p(a, b) * v.col(cols[a]).dot(v.col(cols[b]));
    }
    return acc;
}

void MassMatrix::apply(const Mat3X& v, Mat3X& out) const {
    for (int i = 0; i < n_; ++i) {
        const Mat4 p = element_pattern(i);
        const auto cols = element_columns(n_, i);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) out.col(cols[a]) += p(a, b) * v.col(cols[b]);
    }
}

Mat3X MassMatrix::apply(const Mat3X& v) const {
    Mat3X out = Mat3X::Zero(3, v.cols());
    apply(v, out);
    return out;
}

double MassMatrix::quadratic_form_slope(const Mat3X& v, int element) const {
    return bilinear_slope(v, v, element);
}

double MassMatrix::bilinear_slope(const Mat3X& u, const Mat3X& v, int element) const {
    const auto cols = element_columns(n_, element);
    double acc = 0;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            if (slope_(a, b) != 0) acc += slope_(a, b) * u.col(cols[a]).dot(v.col(cols[b]));
        }
    return acc;
}

Eigen::SparseMatrix<double> MassMatrix::assembled_scalar() const {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(16 * n_);
    for (int i = 0; i < n_; ++i) {
        const Mat4 p = element_pattern(i);
        const auto cols = element_columns(n_, i);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) trips.emplace_back(cols[a], cols[b], p(a, b));
    }
    Eigen::SparseMatrix<double> M(2 * (n_ + 1), 2 * (n_ + 1));
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

Resampler::Resampler(VecX coords, Mat3X values)
    : coords_(std::move(coords)), values_(std::move(values)) {
    if (coords_.size() != values_.cols() || coords_.size() < 2)
        throw std::invalid_argument("resampler needs matching coords/values, at least two");
    for (int i = 0; i + 1 < coords_.size(); ++i)
        if (!(coords_[i] < coords_[i + 1]))
            throw std::invalid_argument("resampler coords must be strictly increasing");
}

int Resampler::segment(double u) const {
    const double* begin = coords_.data();
    const double* end = begin + coords_.size();
    int idx = static_cast<int>(std::lower_bound(begin, end, u) - begin);
    return std::clamp(idx - 1, 0, static_cast<int>(coords_.size()) - 2);
}

Vec3 Resampler::value(double u) const {
    const int k = segment(u);
    const double t = (u - coords_[k]) / (coords_[k + 1] - coords_[k]);
    return (1 - t) * values_.col(k) + t * values_.col(k + 1);
}

Vec3 Resampler::slope(double u) const {
    const int k = segment(u);
    return (values_.col(k + 1) - values_.col(k)) / (coords_[k + 1] - coords_[k]);
}

void Resampler::sample(const VecX& queries, Mat3X& values, Mat3X& slopes) const {
    values.resize(3, queries.size());
    slopes.resize(3, queries.size());
    for (int i = 0; i < queries.size(); ++i) {
        const double u = std::clamp(queries[i], coords_[0], coords_[coords_.size() - 1]);
        values.col(i) = value(u);
        slopes.col(i) = slope(u);
    }
}

StepProblem StepProblem::at_rest(const RibbonSpec& spec, const GeneralizedCoords& q, double h,
                                 const Vec3& gravity) {
    StepProblem p;
    p.spec = spec;
    ReconState st = reconstruct(spec, q);
    p.Xprev = st.X;
    p.Vprev = Mat3X::Zero(3, spec.num_rim_vertices());
    p.uprev_bottom = st.rim.bottom_u;
    p.uprev_top = st.rim.top_u;
    p.h = h;
    p.gravity = gravity;
    return p;
}

double lumped_mass(const RibbonSpec& spec, int i) {
    const double m_elem = spec.density * spec.length * spec.width / spec.segments;
    const bool interior = (i > 0 && i < spec.segments);
    return interior ? m_elem : m_elem / 2;
}

double potential_energy(const StepProblem& p, const GeneralizedCoords& q, const ReconState& state,
                        EnergyBreakdown& parts, ReconCotangents& cot) {
    const RibbonSpec& spec = p.spec;
    const int n = spec.segments;
    const double rho = spec.density;

    // bending: alpha * n w (1 + c^2) psi^2 / l per crease, quadratic in psi
    const double bend_coef = spec.alpha * n * spec.width / spec.length;
    for (int i = 0; i < spec.num_creases(); ++i) {
        const double one_c2 = 1.0 + q.c[i] * q.c[i];
        parts.v_bend += bend_coef * one_c2 * q.psi[i] * q.psi[i];
        cot.dpsi_direct[i] += 2 * bend_coef * one_c2 * q.psi[i];
        cot.dc_direct[i] += 2 * bend_coef * q.c[i] * q.psi[i] * q.psi[i];
        parts.v_reg += spec.beta * q.c[i] * q.c[i];
        cot.dc_direct[i] += 2 * spec.beta * q.c[i];
    }

    if (!p.gravity.isZero()) {
        MassMatrix M(spec, q.c);
        Mat3X gb(3, spec.num_rim_vertices());
        gb.colwise() = p.gravity;
        const Mat3X Mg = M.apply(gb);
        double vg = 0;
        for (int j = 0; j < state.X.cols(); ++j) vg += Mg.col(j).dot(state.X.col(j));
        parts.v_grav = -rho * vg;
        cot.dX -= rho * Mg;
        for (int k = 1; k < n; ++k) {
            const double d = M.bilinear_slope(gb, state.X, k - 1) - M.bilinear_slope(gb, state.X, k);
            cot.dc_direct[k - 1] += -rho * d;
        }
    }

    for (const auto& pin : p.pins) parts.v_user += pin_energy(spec, state, pin, cot);
    for (const auto& g : p.guides) parts.v_user += normal_guide_energy(state, g, cot);
    return parts.potential();
}

ObjectiveEval evaluate_objective(const StepProblem& p, const GeneralizedCoords& q) {
    const RibbonSpec& spec = p.spec;
    const int n = spec.segments;
    const int nv = spec.num_rim_vertices();
    const double rho = spec.density;

    ObjectiveEval ev;
    ev.state = reconstruct_unchecked(spec, q, p.base);
    ev.cot = ReconCotangents::zero(spec);
    ev.cot.dc_direct = VecX::Zero(spec.num_creases());
    ev.cot.dpsi_direct = VecX::Zero(spec.num_creases());

    if (p.kinetic == KineticMode::Full) {
        Resampler pos_b(p.uprev_bottom, p.Xprev.leftCols(n + 1));
        Resampler pos_t(p.uprev_top, p.Xprev.rightCols(n + 1));
        Resampler vel_b(p.uprev_bottom, p.Vprev.leftCols(n + 1));
        Resampler vel_t(p.uprev_top, p.Vprev.rightCols(n + 1));

        Mat3X P(3, nv), Pslope(3, nv), W(3, nv), Wslope(3, nv);
        {
            Mat3X v, s;
            pos_b.sample(ev.state.rim.bottom_u, v, s);
            P.leftCols(n + 1) = v;
            Pslope.leftCols(n + 1) = s;
            pos_t.sample(ev.state.rim.top_u, v, s);
            P.rightCols(n + 1) = v;
            Pslope.rightCols(n + 1) = s;
            vel_b.sample(ev.state.rim.bottom_u, v, s);
            W.leftCols(n + 1) = v;
            Wslope.leftCols(n + 1) = s;
            vel_t.sample(ev.state.rim.top_u, v, s);
            W.rightCols(n + 1) = v;
            Wslope.rightCols(n + 1) = s;
        }

        const Mat3X r = (ev.state.X - P) / p.h - W;
        MassMatrix M(spec, q.c);
        ev.parts.kinetic = 0.5 * rho * M.quadratic_form(r);
        const Mat3X Mr = M.apply(r);
        ev.cot.dX += (rho / p.h) * Mr;

        const double hw = spec.width / 2;
        for (int k = 1; k < n; ++k) {
            // mass blocks of the two elements adjacent to crease k depend on c_k
            double d = 0.5 * rho * (M.quadratic_form_slope(r, k - 1) - M.quadratic_form_slope(r, k));
            // query coordinates of the two rim vertices on crease k move with c_k
            const Vec3 drb = -Pslope.col(k) / p.h - Wslope.col(k);
            const Vec3 drt = -Pslope.col(n + 1 + k) / p.h - Wslope.col(n + 1 + k);
            d += rho * (Mr.col(k).dot(drb) * (-hw) + Mr.col(n + 1 + k).dot(drt) * hw);
            ev.cot.dc_direct[k - 1] += d;
        }
    } else {
        for (int i = 0; i <= n; ++i) {
            const Vec3 sum_new = ev.state.x(i) + ev.state.y(i);
            const Vec3 sum_old = p.Xprev.col(i) + p.Xprev.col(n + 1 + i);
            const Vec3 vbar = 0.5 * (p.Vprev.col(i) + p.Vprev.col(n + 1 + i));
            const Vec3 rl = (sum_new - sum_old) / (2 * p.h) - vbar;
            const double m = lumped_mass(spec, i);
            ev.parts.kinetic += 0.5 * m * rl.squaredNorm();
            const Vec3 w = m * rl / (2 * p.h);
            ev.cot.dX.col(i) += w;
            ev.cot.dX.col(n + 1 + i) += w;
        }
    }

    potential_energy(p, q, ev.state, ev.parts, ev.cot);
    ev.f = ev.parts.total();
    return ev;
}

CoordGradient objective_gradient(const StepProblem& p, const GeneralizedCoords& q,
                                 const ObjectiveEval& ev) {
    return p.use_adjoint ? gradient_adjoint(p.spec, q, ev.state, ev.cot)
                         : gradient_chain_rule(p.spec, q, ev.state, ev.cot);
}

double objective(const StepProblem& p, const GeneralizedCoords& q, CoordGradient* grad) {
    ObjectiveEval ev = evaluate_objective(p, q);
    if (grad) *grad = objective_gradient(p, q, ev);
    return ev.f;
}

Mat3X update_velocity(const StepProblem& p, const ReconState& state) {
    const int n = p.spec.segments;
    Resampler pos_b(p.uprev_bottom, p.Xprev.leftCols(n + 1));
    Resampler pos_t(p.uprev_top, p.Xprev.rightCols(n + 1));
    Mat3X V(3, p.spec.num_rim_vertices());
    Mat3X v, s;
    pos_b.sample(state.rim.bottom_u, v, s);
    V.leftCols(n + 1) = (state.X.leftCols(n + 1) - v) / p.h;
    pos_t.sample(state.rim.top_u, v, s);
    V.rightCols(n + 1) = (state.X.rightCols(n + 1) - v) / p.h;
    return V;
}

}  // namespace ribsim
