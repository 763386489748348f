#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace ribsim {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using VecX = Eigen::VectorXd;
using Mat3X = Eigen::Matrix3Xd;

// Rigid inverse of a homogeneous transform [R t; 0 1].
inline Mat4 rigid_inverse(const Mat4& T) {
    Mat4 inv = Mat4::Identity();
    inv.topLeftCorner<3, 3>() = T.topLeftCorner<3, 3>().transpose();
    inv.topRightCorner<3, 1>() = -inv.topLeftCorner<3, 3>() * T.topRightCorner<3, 1>();
    return inv;
}

inline Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

// Rotation exp([w]x) via Rodrigues, stable near w = 0.
inline Mat3 rotation_exp(const Vec3& w) {
    const double theta2 = w.squaredNorm();
    const Mat3 K = skew(w);
    if (theta2 < 1e-16) {
        return Mat3::Identity() + K + 0.5 * K * K;
    }
    const double theta = std::sqrt(theta2);
    return Mat3::Identity() + (std::sin(theta) / theta) * K +
           ((1.0 - std::cos(theta)) / theta2) * K * K;
}

// d exp([w]x) / d w_k. Closed form from Gallego & Yezzi; Taylor fallback at w = 0.
inline Mat3 rotation_exp_derivative(const Vec3& w, int k) {
    const double theta2 = w.squaredNorm();
    const Vec3 e = Vec3::Unit(k);
    if (theta2 < 1e-16) {
        // exp ~ I + [w]x + [w]x^2/2  =>  d/dw_k ~ [e_k]x + ([e]x[w]x + [w]x[e]x)/2
        return skew(e) + 0.5 * (skew(e) * skew(w) + skew(w) * skew(e));
    }
    const Mat3 R = rotation_exp(w);
    const Vec3 cross = w.cross((Mat3::Identity() - R) * e);
    return ((w(k) * skew(w) + skew(cross)) * R) / theta2;
}

}  // namespace ribsim
