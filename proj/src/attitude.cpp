#include "fext/attitude.hpp"

#include "fext/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace fext {

Mat3 skew(const Vec3& v)
{
    Mat3 m;
    m << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

AttitudeQuaternion::AttitudeQuaternion(double w, const Vec3& v)
{
    const double n = std::sqrt(w * w + v.squaredNorm());
    if (!std::isfinite(n) || n == 0.0) {
        throw std::invalid_argument("AttitudeQuaternion: zero or non-finite coefficients");
    }
    w_ = w / n;
    v_ = v / n;
}

AttitudeQuaternion AttitudeQuaternion::from_coeffs(const Vec4& wxyz)
{
    return {wxyz(0), wxyz.tail<3>()};
}

AttitudeQuaternion AttitudeQuaternion::from_axis_angle(const Vec3& axis, double angle)
{
    const double n = axis.norm();
    if (!(n > 0.0) || !std::isfinite(n) || !std::isfinite(angle)) {
        throw std::invalid_argument("from_axis_angle: axis must be finite and non-zero");
    }
    return {std::cos(0.5 * angle), std::sin(0.5 * angle) * axis / n};
}

AttitudeQuaternion AttitudeQuaternion::from_rotation_vector(const Vec3& rv)
{
    const double angle = rv.norm();
    if (angle < 1e-12) {
        return {1.0, 0.5 * rv};
    }
    return from_axis_angle(rv, angle);
}

AttitudeQuaternion AttitudeQuaternion::canonical() const
{
    return w_ < 0.0 ? -*this : *this;
}

AttitudeQuaternion AttitudeQuaternion::operator-() const
{
    AttitudeQuaternion q;
    q.w_ = -w_;
    q.v_ = -v_;
    return q;
}

double AttitudeQuaternion::angle() const
{
    return 2.0 * std::atan2(v_.norm(), std::abs(w_));
}

Vec3 AttitudeQuaternion::rotation_vector() const
{
    const AttitudeQuaternion c = canonical();
    const double s = c.v_.norm();
    if (s < 1e-12) {
        return 2.0 * c.v_ / c.w_;
    }
    return (2.0 * std::atan2(s, c.w_) / s) * c.v_;
}

Vec3 AttitudeQuaternion::rotate(const Vec3& v) const
{
    // v + 2w (qv x v) + 2 qv x (qv x v)
    const Vec3 t = 2.0 * v_.cross(v);
    return v + w_ * t + v_.cross(t);
}

MrpVector::MrpVector(const Vec3& rho)
    : rho_(rho)
{
    if (!rho.allFinite()) {
        throw std::invalid_argument("MrpVector: non-finite component");
    }
}

AttitudeQuaternion quat_multiply(const AttitudeQuaternion& a, const AttitudeQuaternion& b)
{
    const double w = a.w() * b.w() - a.vec().dot(b.vec());
    const Vec3 v = a.w() * b.vec() + b.w() * a.vec() + a.vec().cross(b.vec());
    return {w, v};
}

AttitudeQuaternion quat_inverse(const AttitudeQuaternion& q)
{
    return {q.w(), -q.vec()};
}

RotationMatrix quat_to_rotmat(const AttitudeQuaternion& q)
{
    const double w = q.w();
    const Vec3& v = q.vec();
    RotationMatrix r;
    r.body_to_global = (2.0 * w * w - 1.0) * Mat3::Identity() + 2.0 * v * v.transpose() + 2.0 * w * skew(v);
    r.global_to_body = r.body_to_global.transpose();
    return r;
}

MrpVector error_quat_to_mrp(const AttitudeQuaternion& dq)
{
    if (dq.w() <= -1.0 + kMrpSingularityMargin) {
        throw NearSingularRotation("error_quat_to_mrp: perturbation is a near full turn (dq0 ~ -1)");
    }
    return MrpVector(dq.vec() / (1.0 + dq.w()));
}

AttitudeQuaternion mrp_to_error_quat(const MrpVector& rho)
{
    const Vec3& p = rho.value();
    const double n2 = p.squaredNorm();
    const double w = (1.0 - n2) / (1.0 + n2);
    // 1 + w == 2 / (1 + n2), evaluated directly to avoid cancellation for large rho.
    return {w, (2.0 / (1.0 + n2)) * p};
}

MrpVector relative_mrp(const AttitudeQuaternion& a, const AttitudeQuaternion& b)
{
    return error_quat_to_mrp(quat_multiply(a, quat_inverse(b)).canonical());
}

AttitudeQuaternion apply_mrp(const MrpVector& rho, const AttitudeQuaternion& reference)
{
    return quat_multiply(mrp_to_error_quat(rho), reference);
}

Mat4 angular_rate_transition(const Vec3& omega, double dt)
{
    const double rate = omega.norm();
    const double theta = rate * dt;
    const double c = std::cos(0.5 * theta);
    const Vec3 psi = theta < 1e-8 ? Vec3(0.5 * dt * omega) : Vec3(std::sin(0.5 * theta) * omega / rate);

    Mat4 m;
    m(0, 0) = c;
    m.block<1, 3>(0, 1) = -psi.transpose();
    m.block<3, 1>(1, 0) = psi;
    m.block<3, 3>(1, 1) = c * Mat3::Identity() - skew(psi);
    return m;
}

AttitudeQuaternion integrate_body_rate(const AttitudeQuaternion& q, const Vec3& omega, double dt)
{
    return AttitudeQuaternion::from_coeffs(angular_rate_transition(omega, dt) * q.coeffs());
}

}  // namespace fext
