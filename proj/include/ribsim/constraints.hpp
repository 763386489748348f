#pragma once

#include <vector>

#include "ribsim/kinematics.hpp"

namespace ribsim {

// Selects one rim vertex of a ribbon: bottom rim x_j or top rim y_j.
struct VertexRef {
    bool top = false;
    int j = 0;

    int column(const RibbonSpec& spec) const {
        if (j < 0 || j > spec.segments) throw std::out_of_range("vertex selector out of range");
        return top ? spec.segments + 1 + j : j;
    }
};

// Loop closure between the two ends of a ribbon. Orientable: x_0 = x_n,
// y_0 = y_n, n_0 = n_{n-1}. Non-orientable: x_0 = y_n, y_0 = x_n,
// n_0 = -n_{n-1}. Nine equality components, handled as paired inequalities by
// the augmented-Lagrangian machinery.
Eigen::Matrix<double, 9, 1> loop_residual(const ReconState& state, bool orientable);

// Accumulate d(weightsᵀ residual)/d{X,N} into the cotangents.
void loop_residual_accumulate(const ReconState& state, bool orientable,
                              const Eigen::Matrix<double, 9, 1>& weights, ReconCotangents& cot);

// Soft torsional forcing K/2 |n_j - n0|^2 on one element normal.
struct NormalGuide {
    int element = 0;
    Vec3 target = Vec3::UnitZ();  // unit target normal
    double strength = 0.0;
};

double normal_guide_energy(const ReconState& state, const NormalGuide& g, ReconCotangents& cot);

// Quadratic position pin (soft) or equality residual (hard).
struct SoftPin {
    VertexRef vertex;
    Vec3 target = Vec3::Zero();
    double strength = 0.0;
};

double pin_energy(const RibbonSpec& spec, const ReconState& state, const SoftPin& pin,
                  ReconCotangents& cot);

Vec3 pin_residual(const RibbonSpec& spec, const ReconState& state, const VertexRef& v,
                  const Vec3& target);
void pin_residual_accumulate(const RibbonSpec& spec, const VertexRef& v, const Vec3& weights,
                             ReconCotangents& cot);

// Hard constraint attached to one optimization unit, evaluated against the
// reconstructed states of its ribbons (indices are unit-local).
struct HardConstraint {
    enum class Kind { Loop, Pin, Link } kind = Kind::Loop;
    int ribbon = 0;       // unit-local ribbon index
    bool orientable = true;  // Loop
    VertexRef vertex;     // Pin / Link endpoint a
    Vec3 target = Vec3::Zero();  // Pin
    int ribbon_b = 0;     // Link
    VertexRef vertex_b;   // Link endpoint b

    int residual_size() const { return kind == Kind::Loop ? 9 : 3; }
    VecX residual(const std::vector<const ReconState*>& states,
                  const std::vector<const RibbonSpec*>& specs) const;
    void accumulate(const std::vector<const ReconState*>& states,
                    const std::vector<const RibbonSpec*>& specs, const VecX& weights,
                    std::vector<ReconCotangents*>& cots) const;
};

}  // namespace ribsim
