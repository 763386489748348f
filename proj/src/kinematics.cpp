#include "ribsim/kinematics.hpp"

#include <cmath>

namespace ribsim {

CreaseTransform crease_transform(const RibbonSpec& spec, int k, double c, double psi) {
    if (k < 1 || k > spec.segments - 1) throw std::invalid_argument("crease index out of range");
    const double a = spec.segment_length() * k;
    const double d = 1.0 + c * c;
    const double s = std::sqrt(d);
    const double C = std::cos(psi), S = std::sin(psi);

    CreaseTransform out;
    out.c = c;
    out.psi = psi;
    out.k = k;
    out.axis_point_x = a;

    Mat4& T = out.T;
    T(0, 0) = (C + c * c) / d;
    T(0, 1) = c * (1 - C) / d;
    T(0, 2) = -S / s;
    T(0, 3) = a * (1 - C) / d;
    T(1, 0) = c * (1 - C) / d;
    T(1, 1) = (1 + c * c * C) / d;
    T(1, 2) = c * S / s;
    T(1, 3) = a * c * (C - 1) / d;
    T(2, 0) = S / s;
    T(2, 1) = -c * S / s;
    T(2, 2) = C;
    T(2, 3) = -a * S / s;
    T.row(3) << 0, 0, 0, 1;
    return out;
}

Mat4 crease_transform_dc(const RibbonSpec& spec, int k, double c, double psi) {
    const double a = spec.segment_length() * k;
    const double d = 1.0 + c * c;
    const double d2 = d * d;
    const double s3 = d * std::sqrt(d);
    const double C = std::cos(psi), S = std::sin(psi);
    const double omc = 1.0 - C;

    Mat4 D = Mat4::Zero();
    D(0, 0) = 2 * c * omc / d2;
    D(0, 1) = omc * (1 - c * c) / d2;
    D(0, 2) = S * c / s3;
    D(0, 3) = -2 * a * c * omc / d2;
    D(1, 0) = omc * (1 - c * c) / d2;
    D(1, 1) = -2 * c * omc / d2;
    D(1, 2) = S / s3;
    D(1, 3) = -a * omc * (1 - c * c) / d2;
    D(2, 0) = -S * c / s3;
    D(2, 1) = -S / s3;
    D(2, 3) = a * S * c / s3;
    return D;
}

Mat4 crease_transform_dpsi(const RibbonSpec& spec, int k, double c, double psi) {
    const double a = spec.segment_length() * k;
    const double d = 1.0 + c * c;
    const double s = std::sqrt(d);
    const double C = std::cos(psi), S = std::sin(psi);

    Mat4 D = Mat4::Zero();
    D(0, 0) = -S / d;
    D(0, 1) = c * S / d;
    D(0, 2) = -C / s;
    D(0, 3) = a * S / d;
    D(1, 0) = c * S / d;
    D(1, 1) = -c * c * S / d;
    D(1, 2) = c * C / s;
    D(1, 3) = -a * c * S / d;
    D(2, 0) = C / s;
    D(2, 1) = -c * C / s;
    D(2, 2) = -S;
    D(2, 3) = -a * C / s;
    return D;
}

Mat4 global_frame(const Vec3& w, const Vec3& t) {
    Mat4 T = Mat4::Identity();
    T.topLeftCorner<3, 3>() = rotation_exp(w);
    T.topRightCorner<3, 1>() = t;
    return T;
}

ReconState reconstruct_unchecked(const RibbonSpec& spec, const GeneralizedCoords& q,
                                 const std::optional<Mat4>& base) {
    const int n = spec.segments;
    ReconState st;
    st.rim = material_rim_positions_unchecked(spec, q.c);
    st.T.resize(n + 1);
    st.prefix.resize(n + 1);
    st.X.resize(3, 2 * (n + 1));
    st.N.resize(3, n);

    if (q.mode == FrameMode::Floating) {
        st.T[0] = global_frame(q.w, q.t);
    } else {
        st.T[0] = base.value_or(Mat4::Identity());
    }
    for (int k = 1; k < n; ++k) st.T[k] = crease_transform(spec, k, q.c[k - 1], q.psi[k - 1]).T;
    st.T[n] = Mat4::Identity();

    Mat4 P = st.T[0];
    st.prefix[0] = P;
    const Vec4 nbar(0, 0, 1, 0);
    for (int j = 0; j <= n; ++j) {
        if (j > 0) {
            P = P * st.T[j];
            st.prefix[j] = P;
        }
        st.X.col(j) = (P * st.rim.bottom(spec, j)).head<3>();
        st.X.col(n + 1 + j) = (P * st.rim.top(spec, j)).head<3>();
        if (j < n) st.N.col(j) = (P * nbar).head<3>();
    }
    return st;
}

ReconState reconstruct(const RibbonSpec& spec, const GeneralizedCoords& q,
                       const std::optional<Mat4>& base) {
    require_feasible(spec, q.c);
    return reconstruct_unchecked(spec, q, base);
}

VecX CoordGradient::stacked(FrameMode mode) const {
    const int m = static_cast<int>(dc.size());
    VecX v(2 * m + (mode == FrameMode::Floating ? 6 : 0));
    v.head(m) = dc;
    v.segment(m, m) = dpsi;
    if (mode == FrameMode::Floating) {
        v.segment(2 * m, 3) = dw;
        v.segment(2 * m + 3, 3) = dt;
    }
    return v;
}

ReconCotangents ReconCotangents::zero(const RibbonSpec& spec) {
    ReconCotangents cot;
    cot.dX = Mat3X::Zero(3, spec.num_rim_vertices());
    cot.dN = Mat3X::Zero(3, spec.segments);
    return cot;
}

namespace {

CoordGradient make_gradient(const RibbonSpec& spec, const ReconCotangents& cot) {
    CoordGradient g;
    const int m = spec.num_creases();
    g.dc = cot.dc_direct.size() ? cot.dc_direct : VecX::Zero(m);
    g.dpsi = cot.dpsi_direct.size() ? cot.dpsi_direct : VecX::Zero(m);
    return g;
}

// Contribution of the material-space rim motion dxbar_j/dc_j = (-w/2, 0, 0, 0)
// (mirrored on the top rim); only the transformed first column of Pi_j enters.
double material_term(const RibbonSpec& spec, const Mat4& prefix_j, const Vec3& dfdx,
                     const Vec3& dfdy) {
    const Vec3 col0 = prefix_j.block<3, 1>(0, 0);
    return 0.5 * spec.width * col0.dot(dfdy - dfdx);
}

}  // namespace

CoordGradient gradient_chain_rule(const RibbonSpec& spec, const GeneralizedCoords& q,
                                  const ReconState& state, const ReconCotangents& cot) {
    const int n = spec.segments;
    CoordGradient g = make_gradient(spec, cot);

    auto dfdx = [&](int j) -> Vec3 { return cot.dX.col(j); };
    auto dfdy = [&](int j) -> Vec3 { return cot.dX.col(n + 1 + j); };

    for (int j = 1; j < n; ++j) {
        g.dc[j - 1] += material_term(spec, state.prefix[j], dfdx(j), dfdy(j));
    }

    // d x_j / d c_k = B_k x_j with B_k = Pi_{k-1} dT_k Pi_k^{-1}; likewise for
    // y_j, n_j and the psi derivative. One B per crease, O(n) contractions each.
    for (int k = 1; k < n; ++k) {
        const Mat4 inv = rigid_inverse(state.prefix[k]);
        const Mat4 Bc = state.prefix[k - 1] * crease_transform_dc(spec, k, q.c[k - 1], q.psi[k - 1]) * inv;
        const Mat4 Bp = state.prefix[k - 1] * crease_transform_dpsi(spec, k, q.c[k - 1], q.psi[k - 1]) * inv;
        double acc_c = 0, acc_p = 0;
        for (int j = k; j <= n; ++j) {
            const Vec4 xh(state.x(j).x(), state.x(j).y(), state.x(j).z(), 1.0);
            const Vec4 yh(state.y(j).x(), state.y(j).y(), state.y(j).z(), 1.0);
            acc_c += dfdx(j).dot((Bc * xh).head<3>()) + dfdy(j).dot((Bc * yh).head<3>());
            acc_p += dfdx(j).dot((Bp * xh).head<3>()) + dfdy(j).dot((Bp * yh).head<3>());
            if (j < n) {
                const Vec4 nh(state.N(0, j), state.N(1, j), state.N(2, j), 0.0);
                acc_c += cot.dN.col(j).dot((Bc * nh).head<3>());
                acc_p += cot.dN.col(j).dot((Bp * nh).head<3>());
            }
        }
        g.dc[k - 1] += acc_c;
        g.dpsi[k - 1] += acc_p;
    }

    if (q.mode == FrameMode::Floating) {
        const Mat4 inv0 = rigid_inverse(state.T[0]);
        for (int k = 0; k < 3; ++k) {
            Mat4 dT0 = Mat4::Zero();
            dT0.topLeftCorner<3, 3>() = rotation_exp_derivative(q.w, k);
            const Mat4 Bw = dT0 * inv0;
            double acc = 0;
            for (int j = 0; j <= n; ++j) {
                const Vec4 xh(state.x(j).x(), state.x(j).y(), state.x(j).z(), 1.0);
                const Vec4 yh(state.y(j).x(), state.y(j).y(), state.y(j).z(), 1.0);
                acc += dfdx(j).dot((Bw * xh).head<3>()) + dfdy(j).dot((Bw * yh).head<3>());
                if (j < n) {
                    const Vec4 nh(state.N(0, j), state.N(1, j), state.N(2, j), 0.0);
                    acc += cot.dN.col(j).dot((Bw * nh).head<3>());
                }
            }
            g.dw[k] = acc;
        }
        Vec3 dt = Vec3::Zero();
        for (int j = 0; j <= n; ++j) dt += dfdx(j) + dfdy(j);
        g.dt = dt;
    }
    return g;
}

CoordGradient gradient_adjoint(const RibbonSpec& spec, const GeneralizedCoords& q,
                               const ReconState& state, const ReconCotangents& cot) {
    const int n = spec.segments;
    CoordGradient g = make_gradient(spec, cot);

    const Vec4 nbar(0, 0, 1, 0);
    Mat4 T = state.prefix[n];  // running product, peeled right-to-left
    Mat4 A = Mat4::Zero();

    for (int j = n; j >= 0; --j) {
        const Vec3 dfdx = cot.dX.col(j);
        const Vec3 dfdy = cot.dX.col(n + 1 + j);
        if (j >= 1 && j < n) {
            g.dc[j - 1] += material_term(spec, T, dfdx, dfdy);
        }
        T = T * rigid_inverse(state.T[j]);  // now Pi_{j-1}

        if (j < n) A = rigid_inverse(state.T[j]).transpose() * A * state.T[j + 1].transpose();

        Vec4 xbar = state.rim.bottom(spec, j);
        Vec4 ybar = state.rim.top(spec, j);
        Mat4 G = Vec4(dfdx.x(), dfdx.y(), dfdx.z(), 0) * xbar.transpose() +
                 Vec4(dfdy.x(), dfdy.y(), dfdy.z(), 0) * ybar.transpose();
        if (j < n) {
            const Vec3 dfdn = cot.dN.col(j);
            G += Vec4(dfdn.x(), dfdn.y(), dfdn.z(), 0) * nbar.transpose();
        }
        A += T.transpose() * G;

        if (j >= 1 && j < n) {
            g.dc[j - 1] += A.cwiseProduct(crease_transform_dc(spec, j, q.c[j - 1], q.psi[j - 1])).sum();
            g.dpsi[j - 1] += A.cwiseProduct(crease_transform_dpsi(spec, j, q.c[j - 1], q.psi[j - 1])).sum();
        } else if (j == 0 && q.mode == FrameMode::Floating) {
            for (int k = 0; k < 3; ++k) {
                Mat4 dT0 = Mat4::Zero();
                dT0.topLeftCorner<3, 3>() = rotation_exp_derivative(q.w, k);
                g.dw[k] = A.cwiseProduct(dT0).sum();
                g.dt[k] = A(k, 3);
            }
        }
    }
    return g;
}

}  // namespace ribsim
