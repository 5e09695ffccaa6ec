#pragma once

// Shared helpers for the unit tests: seeded random draws and independent
// rotation oracles that do not go through the library's quaternion code.

#include "fext/attitude.hpp"
#include "fext/rigid_body.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace fext::test {

inline std::mt19937_64& rng()
{
    static std::mt19937_64 engine(20240611);
    return engine;
}

inline double uniform(double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng());
}

inline double normal()
{
    return std::normal_distribution<double>(0.0, 1.0)(rng());
}

inline Vec3 random_vec3(double scale = 1.0)
{
    return Vec3(uniform(-scale, scale), uniform(-scale, scale), uniform(-scale, scale));
}

inline Vec3 random_unit()
{
    Vec3 v;
    do {
        v = Vec3(normal(), normal(), normal());
    } while (v.norm() < 1e-6);
    return v.normalized();
}

inline AttitudeQuaternion random_quat()
{
    Vec4 c;
    do {
        c = Vec4(normal(), normal(), normal(), normal());
    } while (c.norm() < 1e-6);
    return AttitudeQuaternion::from_coeffs(c.normalized());
}

/// Rodrigues formula: active rotation by `angle` about unit `axis`.
inline Mat3 rodrigues(const Vec3& axis, double angle)
{
    const Vec3 u = axis.normalized();
    Mat3 k;
    k << 0.0, -u.z(), u.y(), u.z(), 0.0, -u.x(), -u.y(), u.x(), 0.0;
    return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

inline bool unit_norm(const AttitudeQuaternion& q, double tol = 1e-9)
{
    return std::abs(q.coeffs().norm() - 1.0) < tol;
}

/// Motor speeds that hold the vehicle still against gravity with zero motor torque.
inline MotorSpeeds hover_speeds(const VehicleParams& p, double extra_thrust_n = 0.0)
{
    const double per_motor = (p.mass_kg * p.gravity_mps2.z() + extra_thrust_n) / 4.0;
    Vec4 w;
    for (int i = 0; i < 4; ++i) {
        w(i) = std::sqrt(per_motor / p.thrust_coeff(i));
    }
    return MotorSpeeds(w);
}

}  // namespace fext::test
