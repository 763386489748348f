#pragma once

#include <Eigen/SparseCore>
#include <optional>
#include <vector>

#include "ribsim/constraints.hpp"
#include "ribsim/kinematics.hpp"

namespace ribsim {

// Consistent mass over rim-vertex DOFs, assembled from per-element 12x12
// blocks (4x4 scalar pattern kron Id3). Element pattern = base + dc_i * slope
// with dc_i = c_{i+1} - c_i, so only the per-element dc values are stored.
class MassMatrix {
  public:
    MassMatrix(const RibbonSpec& spec, const VecX& c);

    // Scalar pattern of element i in vertex order (x_i, y_i, x_{i+1}, y_{i+1}).
    Mat4 element_pattern(int i) const { return base_ + dc_[i] * slope_; }
    static Mat4 pattern_slope(const RibbonSpec& spec);

    double element_total(int i) const;  // sum of pattern entries (= lw/n)

    // v^T M v over 3-vector blocks laid out like ReconState::X.
    double quadratic_form(const Mat3X& v) const;
    // out += M v
    void apply(const Mat3X& v, Mat3X& out) const;
    Mat3X apply(const Mat3X& v) const;
    // v^T (dM/d dc_i) v restricted to element i.
    double quadratic_form_slope(const Mat3X& v, int element) const;
    // a^T (dM/d dc_i) b restricted to element i.
    double bilinear_slope(const Mat3X& a, const Mat3X& b, int element) const;

    // Assembled scalar pattern, 2(n+1) x 2(n+1); kron with Id3 gives the full
    // 6(n+1) matrix over DOFs.
    Eigen::SparseMatrix<double> assembled_scalar() const;

    int segments() const { return n_; }

  private:
    int n_;
    VecX dc_;  // n entries, boundary creases fixed at zero
    Mat4 base_, slope_;
};

// Piecewise-linear 1D interpolation of rim quantities between two material
// meshings. Ties at interior knots resolve to the left segment.
class Resampler {
  public:
    Resampler(VecX coords, Mat3X values);

    Vec3 value(double u) const;
    Vec3 slope(double u) const;  // derivative wrt the query coordinate
    void sample(const VecX& queries, Mat3X& values, Mat3X& slopes) const;

  private:
    int segment(double u) const;
    VecX coords_;
    Mat3X values_;
};

enum class KineticMode { Full, Lumped };

// One timestep's objective data for a single ribbon.
struct StepProblem {
    RibbonSpec spec;
    Mat3X Xprev;             // 3 x 2(n+1), world positions (not necessarily developable)
    Mat3X Vprev;             // 3 x 2(n+1)
    VecX uprev_bottom, uprev_top;  // material coords the previous frame was sampled at
    double h = 0.01;
    Vec3 gravity = Vec3::Zero();
    KineticMode kinetic = KineticMode::Full;
    bool use_adjoint = true;
    std::optional<Mat4> base;  // prescribed frame transform (fixed-end drivers)
    std::vector<SoftPin> pins;
    std::vector<NormalGuide> guides;

    static StepProblem at_rest(const RibbonSpec& spec, const GeneralizedCoords& q, double h,
                               const Vec3& gravity);
};

struct EnergyBreakdown {
    double kinetic = 0, v_bend = 0, v_grav = 0, v_reg = 0, v_user = 0;
    double potential() const { return v_bend + v_grav + v_reg + v_user; }
    double total() const { return kinetic + potential(); }
};

// Objective value with the reconstruction state and cotangents left open so
// constraint penalties can be appended before the gradient sweep.
struct ObjectiveEval {
    double f = 0;
    EnergyBreakdown parts;
    ReconState state;
    ReconCotangents cot;
};

// Bending + gravity + regularizer + user terms with direct partials folded
// into `cot`. Returns the potential value.
double potential_energy(const StepProblem& p, const GeneralizedCoords& q, const ReconState& state,
                        EnergyBreakdown& parts, ReconCotangents& cot);

ObjectiveEval evaluate_objective(const StepProblem& p, const GeneralizedCoords& q);
CoordGradient objective_gradient(const StepProblem& p, const GeneralizedCoords& q,
                                 const ObjectiveEval& eval);

// Convenience wrapper: value (+ gradient when grad != nullptr).
double objective(const StepProblem& p, const GeneralizedCoords& q, CoordGradient* grad = nullptr);

// V^{n+1} = (X^{n+1} - R(ubar^{n+1}, X^n)) / h at the new material coordinates.
Mat3X update_velocity(const StepProblem& p, const ReconState& state);

// Lumped mass of centerline vertex i: rho*l*w/n split half-half between the
// two adjacent centerline vertices of each element.
double lumped_mass(const RibbonSpec& spec, int i);

}  // namespace ribsim
