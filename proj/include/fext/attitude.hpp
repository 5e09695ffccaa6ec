#pragma once

// Quaternion and Modified Rodrigues Parameter algebra.
//
// Conventions:
//   * quaternions are scalar first, q = [q0, qv] = [cos(theta/2), u sin(theta/2)];
//   * the product is the Hamilton product;
//   * an attitude quaternion rotates body-frame vectors into the global frame,
//     v_g = q (0, v_b) q^-1;
//   * error quaternions are applied on the left, q = dq (x) q_ref, i.e. they are
//     perturbations expressed in the global frame.

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace fext {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Cross-product matrix, skew(a) * b == a.cross(b).
Mat3 skew(const Vec3& v);

class AttitudeQuaternion {
public:
    /// Identity rotation.
    AttitudeQuaternion() = default;

    /// Normalizes (w, v). Throws std::invalid_argument for non-finite or zero input.
    AttitudeQuaternion(double w, const Vec3& v);

    static AttitudeQuaternion identity() { return {}; }
    static AttitudeQuaternion from_coeffs(const Vec4& wxyz);
    /// Rotation by `angle` radians about `axis` (need not be unit length, must be non-zero).
    static AttitudeQuaternion from_axis_angle(const Vec3& axis, double angle);
    /// exp map of a rotation vector (angle * axis), valid at zero.
    static AttitudeQuaternion from_rotation_vector(const Vec3& rv);
    /// Heading-only rotation about global z.
    static AttitudeQuaternion from_yaw(double yaw) { return from_rotation_vector(Vec3(0.0, 0.0, yaw)); }

    double w() const { return w_; }
    const Vec3& vec() const { return v_; }
    Vec4 coeffs() const { return Vec4(w_, v_.x(), v_.y(), v_.z()); }

    /// Same rotation with w >= 0 (short-arc representative of the double cover).
    AttitudeQuaternion canonical() const;
    AttitudeQuaternion operator-() const;

    /// Rotation angle in [0, pi] of the canonical representative.
    double angle() const;
    /// Inverse of from_rotation_vector on the canonical representative.
    Vec3 rotation_vector() const;

    Vec3 rotate(const Vec3& v) const;

private:
    double w_{1.0};
    Vec3 v_{Vec3::Zero()};
};

/// Three-parameter attitude perturbation, rho = dqv / (1 + dq0).
struct MrpVector {
    MrpVector() = default;
    /// Throws std::invalid_argument if any component is non-finite.
    explicit MrpVector(const Vec3& rho);

    const Vec3& value() const { return rho_; }

private:
    Vec3 rho_{Vec3::Zero()};
};

/// Both orientations of the attitude, explicitly labelled.
struct RotationMatrix {
    Mat3 body_to_global;  ///< R^T: v_global = body_to_global * v_body
    Mat3 global_to_body;  ///< R:   v_body   = global_to_body * v_global
};

AttitudeQuaternion quat_multiply(const AttitudeQuaternion& a, const AttitudeQuaternion& b);
AttitudeQuaternion quat_inverse(const AttitudeQuaternion& q);
RotationMatrix quat_to_rotmat(const AttitudeQuaternion& q);

inline AttitudeQuaternion operator*(const AttitudeQuaternion& a, const AttitudeQuaternion& b)
{
    return quat_multiply(a, b);
}

/// Singularity guard: dq0 must exceed -1 + kMrpSingularityMargin.
inline constexpr double kMrpSingularityMargin = 1e-6;

/// Throws NearSingularRotation when dq0 <= -1 + kMrpSingularityMargin.
MrpVector error_quat_to_mrp(const AttitudeQuaternion& dq);
AttitudeQuaternion mrp_to_error_quat(const MrpVector& rho);

/// MRP of a (x) b^-1 after resolving the double cover to the short arc.
MrpVector relative_mrp(const AttitudeQuaternion& a, const AttitudeQuaternion& b);
/// mrp_to_error_quat(rho) (x) reference.
AttitudeQuaternion apply_mrp(const MrpVector& rho, const AttitudeQuaternion& reference);

/// 4x4 transition acting on [q0, qv] coefficients that advances the attitude
/// by a constant body rate `omega` for `dt` seconds. Orthogonal.
Mat4 angular_rate_transition(const Vec3& omega, double dt);

/// angular_rate_transition(omega, dt) * q, renormalized.
AttitudeQuaternion integrate_body_rate(const AttitudeQuaternion& q, const Vec3& omega, double dt);

}  // namespace fext
