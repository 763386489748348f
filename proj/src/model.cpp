#include "ribsim/model.hpp"

#include <random>
#include <sstream>

namespace ribsim {

VecX GeneralizedCoords::stacked() const {
    const int m = static_cast<int>(c.size());
    VecX v(dof());
    v.head(m) = c;
    v.segment(m, m) = psi;
    if (mode == FrameMode::Floating) {
        v.segment(2 * m, 3) = w;
        v.segment(2 * m + 3, 3) = t;
    }
    return v;
}

GeneralizedCoords GeneralizedCoords::from_stacked(const VecX& v, int num_creases, FrameMode mode) {
    GeneralizedCoords q;
    q.c = v.head(num_creases);
    q.psi = v.segment(num_creases, num_creases);
    q.mode = mode;
    if (mode == FrameMode::Floating) {
        q.w = v.segment(2 * num_creases, 3);
        q.t = v.segment(2 * num_creases + 3, 3);
    }
    return q;
}

VecX SubstitutedCoords::stacked() const {
    const int m = static_cast<int>(dc.size()) + 1;
    VecX v(2 * m + (mode == FrameMode::Floating ? 6 : 0));
    v[0] = c1;
    v.segment(1, m - 1) = dc;
    v.segment(m, m) = psi;
    if (mode == FrameMode::Floating) {
        v.segment(2 * m, 3) = w;
        v.segment(2 * m + 3, 3) = t;
    }
    return v;
}

SubstitutedCoords SubstitutedCoords::from_stacked(const VecX& v, int num_creases, FrameMode mode) {
    SubstitutedCoords s;
    s.c1 = v[0];
    s.dc = v.segment(1, num_creases - 1);
    s.psi = v.segment(num_creases, num_creases);
    s.mode = mode;
    if (mode == FrameMode::Floating) {
        s.w = v.segment(2 * num_creases, 3);
        s.t = v.segment(2 * num_creases + 3, 3);
    }
    return s;
}

std::vector<ConstraintViolation> feasibility_check(const RibbonSpec& spec, const VecX& c) {
    std::vector<ConstraintViolation> out;
    const double dc_max = spec.dc_max();
    const int m = spec.num_creases();
    if (c.size() != m) throw std::invalid_argument("crease vector has wrong size");

    auto check = [&](double value, int index, const std::string& what) {
        const double slack = dc_max - std::abs(value);
        if (slack < 0) out.push_back({what, index, slack});
    };
    check(c[0], 1, "|c_1| <= dc_max");
    check(c[m - 1], m, "|c_{n-1}| <= dc_max");
    for (int j = 0; j + 1 < m; ++j) {
        check(c[j + 1] - c[j], j + 1, "|c_{j+1} - c_j| <= dc_max");
    }
    return out;
}

void require_feasible(const RibbonSpec& spec, const VecX& c) {
    auto violations = feasibility_check(spec, c);
    if (violations.empty()) return;
    std::ostringstream msg;
    msg << "infeasible crease vector:";
    for (const auto& v : violations) {
        msg << " [" << v.constraint << " at index " << v.index << ", slack " << v.slack << "]";
    }
    throw std::invalid_argument(msg.str());
}

MaterialRim material_rim_positions_unchecked(const RibbonSpec& spec, const VecX& c) {
    const int n = spec.segments;
    MaterialRim rim;
    rim.bottom_u.resize(n + 1);
    rim.top_u.resize(n + 1);
    const double seg = spec.segment_length();
    const double hw = spec.width / 2;
    for (int j = 0; j <= n; ++j) {
        const double cj = (j == 0 || j == n) ? 0.0 : c[j - 1];
        rim.bottom_u[j] = seg * j - hw * cj;
        rim.top_u[j] = seg * j + hw * cj;
    }
    return rim;
}

MaterialRim material_rim_positions(const RibbonSpec& spec, const VecX& c) {
    require_feasible(spec, c);
    return material_rim_positions_unchecked(spec, c);
}

SubstitutedCoords substitute(const GeneralizedCoords& q) {
    SubstitutedCoords s;
    const int m = static_cast<int>(q.c.size());
    s.c1 = q.c[0];
    s.dc.resize(m - 1);
    for (int i = 1; i < m; ++i) s.dc[i - 1] = q.c[i] - q.c[i - 1];
    s.psi = q.psi;
    s.mode = q.mode;
    s.w = q.w;
    s.t = q.t;
    return s;
}

GeneralizedCoords inverse_substitute(const SubstitutedCoords& s) {
    GeneralizedCoords q;
    const int m = static_cast<int>(s.dc.size()) + 1;
    q.c.resize(m);
    q.c[0] = s.c1;
    for (int i = 1; i < m; ++i) q.c[i] = q.c[i - 1] + s.dc[i - 1];
    q.psi = s.psi;
    q.mode = s.mode;
    q.w = s.w;
    q.t = s.t;
    return q;
}

GeneralizedCoords random_feasible_coords(const RibbonSpec& spec, std::uint64_t seed,
                                         FrameMode mode, double psi_range) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int m = spec.num_creases();
    const double dc_max = spec.dc_max();

    GeneralizedCoords q;
    q.mode = mode;
    q.c.resize(m);
    double scale = 1.0;
    while (true) {
        const double box = dc_max * scale;
        q.c[0] = u(rng) * box;
        for (int i = 1; i < m; ++i) q.c[i] = q.c[i - 1] + u(rng) * box;
        if (std::abs(q.c[m - 1]) <= dc_max) break;
        scale *= 0.85;
    }
    q.psi.resize(m);
    for (int i = 0; i < m; ++i) q.psi[i] = u(rng) * psi_range;
    if (mode == FrameMode::Floating) {
        for (int k = 0; k < 3; ++k) {
            q.w[k] = u(rng) * 3.0;
            q.t[k] = u(rng);
        }
    }
    return q;
}

}  // namespace ribsim
