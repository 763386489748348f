#include "ribsim/constraints.hpp"

namespace ribsim {

Eigen::Matrix<double, 9, 1> loop_residual(const ReconState& state, bool orientable) {
    const int n = state.segments();
    Eigen::Matrix<double, 9, 1> r;
    if (orientable) {
        r.segment<3>(0) = state.x(0) - state.x(n);
        r.segment<3>(3) = state.y(0) - state.y(n);
        r.segment<3>(6) = state.N.col(0) - state.N.col(n - 1);
    } else {
        r.segment<3>(0) = state.x(0) - state.y(n);
        r.segment<3>(3) = state.y(0) - state.x(n);
        r.segment<3>(6) = state.N.col(0) + state.N.col(n - 1);
    }
    return r;
}

void loop_residual_accumulate(const ReconState& state, bool orientable,
                              const Eigen::Matrix<double, 9, 1>& weights, ReconCotangents& cot) {
    const int n = state.segments();
    const Vec3 wx = weights.segment<3>(0);
    const Vec3 wy = weights.segment<3>(3);
    const Vec3 wn = weights.segment<3>(6);
    cot.dX.col(0) += wx;
    cot.dX.col(n + 1) += wy;
    cot.dN.col(0) += wn;
    if (orientable) {
        cot.dX.col(n) -= wx;
        cot.dX.col(2 * n + 1) -= wy;
        cot.dN.col(n - 1) -= wn;
    } else {
        cot.dX.col(2 * n + 1) -= wx;  // y_n
        cot.dX.col(n) -= wy;          // x_n
        cot.dN.col(n - 1) += wn;
    }
}

double normal_guide_energy(const ReconState& state, const NormalGuide& g, ReconCotangents& cot) {
    const Vec3 d = state.N.col(g.element) - g.target;
    cot.dN.col(g.element) += g.strength * d;
    return 0.5 * g.strength * d.squaredNorm();
}

double pin_energy(const RibbonSpec& spec, const ReconState& state, const SoftPin& pin,
                  ReconCotangents& cot) {
    const int col = pin.vertex.column(spec);
    const Vec3 d = state.X.col(col) - pin.target;
    cot.dX.col(col) += pin.strength * d;
    return 0.5 * pin.strength * d.squaredNorm();
}

Vec3 pin_residual(const RibbonSpec& spec, const ReconState& state, const VertexRef& v,
                  const Vec3& target) {
    return state.X.col(v.column(spec)) - target;
}

void pin_residual_accumulate(const RibbonSpec& spec, const VertexRef& v, const Vec3& weights,
                             ReconCotangents& cot) {
    cot.dX.col(v.column(spec)) += weights;
}

VecX HardConstraint::residual(const std::vector<const ReconState*>& states,
                              const std::vector<const RibbonSpec*>& specs) const {
    switch (kind) {
        case Kind::Loop:
            return loop_residual(*states[ribbon], orientable);
        case Kind::Pin:
            return pin_residual(*specs[ribbon], *states[ribbon], vertex, target);
        case Kind::Link: {
            const Vec3 a = states[ribbon]->X.col(vertex.column(*specs[ribbon]));
            const Vec3 b = states[ribbon_b]->X.col(vertex_b.column(*specs[ribbon_b]));
            return a - b;
        }
    }
    return VecX();
}

void HardConstraint::accumulate(const std::vector<const ReconState*>& states,
                                const std::vector<const RibbonSpec*>& specs, const VecX& weights,
                                std::vector<ReconCotangents*>& cots) const {
    switch (kind) {
        case Kind::Loop:
            loop_residual_accumulate(*states[ribbon], orientable, weights, *cots[ribbon]);
            break;
        case Kind::Pin:
            pin_residual_accumulate(*specs[ribbon], vertex, weights, *cots[ribbon]);
            break;
        case Kind::Link:
            cots[ribbon]->dX.col(vertex.column(*specs[ribbon])) += weights;
            cots[ribbon_b]->dX.col(vertex_b.column(*specs[ribbon_b])) -= weights;
            break;
    }
}

}  // namespace ribsim
