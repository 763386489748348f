#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "ribsim/types.hpp"

namespace ribsim {

// Immutable geometry/material description of one ribbon. The strip has
// longitude dimension `length`, latitude dimension `width`, and its centerline
// is evenly segmented into `segments` elements separated by creases.
struct RibbonSpec {
    double length = 1.0;    // l, meters
    double width = 0.05;    // w, meters
    int segments = 50;      // n >= 2
    double density = 1.0;   // rho, kg/m^2
    double alpha = 1.0;     // bending stiffness
    double beta = 0.1;      // ruling regularizer
    double margin = 0.95;   // crease margin factor in (0, 1]

    RibbonSpec() = default;
    RibbonSpec(double l, double w, int n, double rho = 1.0, double a = 1.0,
               double b = 0.1, double m = 0.95)
        : length(l), width(w), segments(n), density(rho), alpha(a), beta(b), margin(m) {
        validate();
    }

    void validate() const {
        if (!(length > 0) || !(width > 0)) throw std::invalid_argument("ribbon dimensions must be positive");
        if (segments < 2) throw std::invalid_argument("ribbon needs at least 2 segments");
        if (!(width < length)) throw std::invalid_argument("ribbon requires width < length");
        if (!(margin > 0) || margin > 1.0) throw std::invalid_argument("crease margin must be in (0,1]");
        if (density <= 0) throw std::invalid_argument("density must be positive");
        if (alpha < 0 || beta < 0) throw std::invalid_argument("stiffnesses must be nonnegative");
    }

    // Largest admissible crease-slope difference between neighbors.
    double dc_max() const { return margin * 2.0 * length / (width * segments); }
    // Length of one centerline element.
    double segment_length() const { return length / segments; }
    int num_creases() const { return segments - 1; }  // interior creases 1..n-1
    int num_rim_vertices() const { return 2 * (segments + 1); }
};

enum class FrameMode { FixedEnd, Floating };

// Configuration <c, psi, w, t> of one ribbon. Boundary conventions c_0 = c_n = 0
// and T_n = Id are implicit. w/t are meaningful only in Floating mode.
struct GeneralizedCoords {
    VecX c;      // n-1 crease slopes, c_i = tan(theta_i)
    VecX psi;    // n-1 bending angles, radians
    FrameMode mode = FrameMode::FixedEnd;
    Vec3 w = Vec3::Zero();  // rotation vector of the floating frame
    Vec3 t = Vec3::Zero();  // translation of the floating frame

    static GeneralizedCoords rest(const RibbonSpec& spec, FrameMode mode = FrameMode::FixedEnd) {
        GeneralizedCoords q;
        q.c = VecX::Zero(spec.num_creases());
        q.psi = VecX::Zero(spec.num_creases());
        q.mode = mode;
        return q;
    }

    int dof() const {
        return 2 * static_cast<int>(c.size()) + (mode == FrameMode::Floating ? 6 : 0);
    }

    // Stacked layout [c, psi (, w, t)].
    VecX stacked() const;
    static GeneralizedCoords from_stacked(const VecX& v, int num_creases, FrameMode mode);
};

// Box-substituted coordinates <c_1, dc, psi (, w, t)> with dc_i = c_i - c_{i-1}.
struct SubstitutedCoords {
    double c1 = 0.0;
    VecX dc;  // n-2 entries
    VecX psi;
    FrameMode mode = FrameMode::FixedEnd;
    Vec3 w = Vec3::Zero();
    Vec3 t = Vec3::Zero();

    VecX stacked() const;
    static SubstitutedCoords from_stacked(const VecX& v, int num_creases, FrameMode mode);
};

struct ConstraintViolation {
    std::string constraint;  // human-readable inequality
    int index = -1;          // offending crease index
    double slack = 0.0;      // negative when violated
};

// Evaluates every crease inequality; returns the violated ones with slack.
std::vector<ConstraintViolation> feasibility_check(const RibbonSpec& spec, const VecX& c);

inline bool is_feasible(const RibbonSpec& spec, const VecX& c) {
    return feasibility_check(spec, c).empty();
}

// Throws std::invalid_argument listing offending indices when c is infeasible.
void require_feasible(const RibbonSpec& spec, const VecX& c);

// Material-space rim positions (z = 0 plane, homogeneous form used by the
// crease transforms). Bottom rim: <lj/n - w c_j/2, -w/2, 0, 1>; top rim
// mirrored. c_0 = c_n = 0 is applied internally.
struct MaterialRim {
    VecX bottom_u;  // n+1 longitudinal coordinates of x-rim
    VecX top_u;     // n+1 longitudinal coordinates of y-rim

    Vec4 bottom(const RibbonSpec& spec, int j) const {
        return Vec4(bottom_u[j], -spec.width / 2, 0, 1);
    }
    Vec4 top(const RibbonSpec& spec, int j) const {
        return Vec4(top_u[j], spec.width / 2, 0, 1);
    }
};

// Requires feasible c (throws otherwise).
MaterialRim material_rim_positions(const RibbonSpec& spec, const VecX& c);
// Same, without the feasibility gate; used inside solver iterations where the
// augmented-Lagrangian loop is allowed to visit slightly infeasible points.
MaterialRim material_rim_positions_unchecked(const RibbonSpec& spec, const VecX& c);

SubstitutedCoords substitute(const GeneralizedCoords& q);
GeneralizedCoords inverse_substitute(const SubstitutedCoords& s);

// Uniform-ish random feasible configuration: increments drawn inside the box,
// rejection on the end-slope constraint with progressive shrinking, so it
// terminates for any spec. Used by the benchmark harness and tests.
GeneralizedCoords random_feasible_coords(const RibbonSpec& spec, std::uint64_t seed,
                                         FrameMode mode = FrameMode::FixedEnd,
                                         double psi_range = 3.14159265358979323846);

}  // namespace ribsim
