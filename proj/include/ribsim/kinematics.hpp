#pragma once

#include <optional>
#include <vector>

#include "ribsim/model.hpp"

namespace ribsim {

// Rigid rotation by angle psi_k about the crease line through (k*l/n, 0, 0)
// with direction (c_k, 1, 0)/sqrt(1+c_k^2). Sign convention: positive psi
// bends the downstream ribbon toward +z when c = 0.
struct CreaseTransform {
    Mat4 T = Mat4::Identity();
    double c = 0.0, psi = 0.0;
    int k = 0;
    double axis_point_x = 0.0;  // k*l/n
};

CreaseTransform crease_transform(const RibbonSpec& spec, int k, double c_k, double psi_k);

// Closed-form entrywise derivatives of the crease transform.
Mat4 crease_transform_dc(const RibbonSpec& spec, int k, double c_k, double psi_k);
Mat4 crease_transform_dpsi(const RibbonSpec& spec, int k, double c_k, double psi_k);

// Floating-frame transform T_0 = [exp(w) t; 0 1].
Mat4 global_frame(const Vec3& w, const Vec3& t);

// World-space reconstruction of one ribbon: rim positions, element normals and
// the cached prefix products Pi_j = T_0 * ... * T_j shared by the gradient
// passes.
struct ReconState {
    Mat3X X;                  // 3 x 2(n+1): columns [x_0..x_n, y_0..y_n]
    Mat3X N;                  // 3 x n element normals
    std::vector<Mat4> T;      // T_0..T_n (T_n = Id)
    std::vector<Mat4> prefix; // prefix[j] = T_0 * ... * T_j
    MaterialRim rim;

    int segments() const { return static_cast<int>(N.cols()); }
    Vec3 x(int j) const { return X.col(j); }
    Vec3 y(int j) const { return X.col(segments() + 1 + j); }
};

// Public entry, validates feasibility of q.c. `base` overrides T_0 in
// fixed-end mode (prescribed frame driving); ignored in floating mode.
ReconState reconstruct(const RibbonSpec& spec, const GeneralizedCoords& q,
                       const std::optional<Mat4>& base = std::nullopt);
// Solver-internal entry without the feasibility gate.
ReconState reconstruct_unchecked(const RibbonSpec& spec, const GeneralizedCoords& q,
                                 const std::optional<Mat4>& base = std::nullopt);

// Gradient of a scalar functional through the reconstruction chain.
struct CoordGradient {
    VecX dc;    // n-1
    VecX dpsi;  // n-1
    Vec3 dw = Vec3::Zero();
    Vec3 dt = Vec3::Zero();

    VecX stacked(FrameMode mode) const;
};

// Cotangents of f with respect to the reconstruction outputs plus any direct
// dependence on the coordinates themselves.
struct ReconCotangents {
    Mat3X dX;  // 3 x 2(n+1), may be zero
    Mat3X dN;  // 3 x n, may be zero
    VecX dc_direct;    // n-1 (empty = zero)
    VecX dpsi_direct;  // n-1 (empty = zero)

    static ReconCotangents zero(const RibbonSpec& spec);
};

// O(n^2) sweep following the explicit chain rule over the transform products.
CoordGradient gradient_chain_rule(const RibbonSpec& spec, const GeneralizedCoords& q,
                                  const ReconState& state, const ReconCotangents& cot);

// O(n) reverse sweep accumulating the adjoint matrix A with the update
// A <- T_j^{-T} A T_{j+1}^T and Frobenius contractions against dT_j.
CoordGradient gradient_adjoint(const RibbonSpec& spec, const GeneralizedCoords& q,
                               const ReconState& state, const ReconCotangents& cot);

}  // namespace ribsim
