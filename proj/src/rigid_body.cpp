#include "fext/rigid_body.hpp"

#include "fext/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace fext {
namespace {

bool is_positive_diagonal(const Mat3& m)
{
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            if (r == c ? !(m(r, c) > 0.0) || !std::isfinite(m(r, c)) : m(r, c) != 0.0) {
                return false;
            }
        }
    }
    return true;
}

Vec4 squared(const MotorSpeeds& speeds)
{
    return speeds.rad_s.array().square().matrix();
}

}  // namespace

void VehicleParams::validate() const
{
    if (!(mass_kg > 0.0)) {
        throw ConfigError("vehicle: mass must be positive");
    }
    if (!inertia_kgm2.isApprox(inertia_kgm2.transpose(), 1e-12)) {
        throw ConfigError("vehicle: inertia must be symmetric");
    }
    if ((Eigen::SelfAdjointEigenSolver<Mat3>(inertia_kgm2, Eigen::EigenvaluesOnly).eigenvalues().array() <= 0.0).any()) {
        throw ConfigError("vehicle: inertia must be positive definite");
    }
    if (!(arm_m > 0.0)) {
        throw ConfigError("vehicle: arm length must be positive");
    }
    if (!(thrust_coeff.array() > 0.0).all() || !(drag_coeff.array() > 0.0).all()) {
        throw ConfigError("vehicle: thrust and drag coefficients must be positive");
    }
    if (!(dt_s > 0.0)) {
        throw ConfigError("vehicle: time step must be positive");
    }
    if (!gravity_mps2.allFinite()) {
        throw ConfigError("vehicle: gravity must be finite");
    }
}

MotorSpeeds::MotorSpeeds(const Vec4& speeds)
    : rad_s(speeds)
{
    if (!speeds.allFinite() || (speeds.array() < 0.0).any()) {
        throw std::invalid_argument("MotorSpeeds: speeds must be finite and non-negative");
    }
}

bool VehicleState::finite() const
{
    return attitude.coeffs().allFinite() && angular_velocity.allFinite() && position.allFinite()
        && velocity.allFinite() && torque_ext.allFinite() && force_ext.allFinite();
}

NoiseConfig NoiseConfig::defaults()
{
    NoiseConfig n;
    n.thrust = (Vec3(0.25, 0.25, 1.0) * 0.05 * 0.05).asDiagonal();
    n.motor_torque = Mat3::Identity() * 0.005 * 0.005;
    n.force_ext = Mat3::Identity() * 5e-4 * 5e-4;
    n.torque_ext = Mat3::Identity() * 5e-5 * 5e-5;
    n.meas_position = Mat3::Identity() * 0.001 * 0.001;
    n.meas_attitude = Mat3::Identity() * 0.0005 * 0.0005;
    return n;
}

void NoiseConfig::validate() const
{
    const std::pair<const Mat3*, const char*> blocks[] = {
        {&thrust, "thrust"},         {&motor_torque, "motor_torque"},   {&force_ext, "force_ext"},
        {&torque_ext, "torque_ext"}, {&meas_position, "meas_position"}, {&meas_attitude, "meas_attitude"},
    };
    for (const auto& [m, name] : blocks) {
        if (!is_positive_diagonal(*m)) {
            throw ConfigError(std::string("noise: ") + name + " covariance must be diagonal with positive entries");
        }
    }
}

Mat12 NoiseConfig::process_block() const
{
    Mat12 q = Mat12::Zero();
    q.block<3, 3>(0, 0) = motor_torque;
    q.block<3, 3>(3, 3) = torque_ext;
    q.block<3, 3>(6, 6) = thrust;
    q.block<3, 3>(9, 9) = force_ext;
    return q;
}

Mat6 NoiseConfig::measurement_block() const
{
    Mat6 g = Mat6::Zero();
    g.block<3, 3>(0, 0) = meas_position;
    g.block<3, 3>(3, 3) = meas_attitude;
    return g;
}

double mrp_std_from_angle(double std_rad)
{
    return std::tan(0.25 * std_rad);
}

double collective_thrust(const VehicleParams& params, const MotorSpeeds& speeds)
{
    return params.thrust_coeff.dot(squared(speeds));
}

Vec3 motor_torques(const VehicleParams& params, const MotorSpeeds& speeds)
{
    const Vec4 c = params.thrust_coeff.cwiseProduct(squared(speeds));
    const Vec4 m = params.drag_coeff.cwiseProduct(squared(speeds));
    return {
        params.arm_m * (c(0) + c(1) - c(2) - c(3)),
        params.arm_m * (-c(0) + c(1) + c(2) - c(3)),
        m(0) - m(1) + m(2) - m(3),
    };
}

Vec3 translational_acceleration(const VehicleState& s, const MotorSpeeds& speeds, const Vec3& thrust_noise,
                                const VehicleParams& params)
{
    const Vec3 thrust_body = Vec3(0.0, 0.0, collective_thrust(params, speeds)) + thrust_noise;
    return (s.attitude.rotate(thrust_body) + s.force_ext) / params.mass_kg - params.gravity_mps2;
}

VehicleState process_step(const VehicleState& s, const MotorSpeeds& speeds, const ProcessNoiseSample& noise,
                          const VehicleParams& params)
{
    const double dt = params.dt_s;
    const Vec3 acc = translational_acceleration(s, speeds, noise.thrust, params);

    const Vec3& w = s.angular_velocity;
    const Vec3 torque_ext_body = quat_inverse(s.attitude).rotate(s.torque_ext);
    const Vec3 net_torque = torque_ext_body + motor_torques(params, speeds) + noise.motor_torque
        - w.cross(params.inertia_kgm2 * w);

    VehicleState next;
    next.position = s.position + dt * s.velocity + 0.5 * dt * dt * acc;
    next.velocity = s.velocity + dt * acc;
    next.attitude = integrate_body_rate(s.attitude, w, dt);
    next.angular_velocity = w + dt * params.inertia_kgm2.llt().solve(net_torque);
    next.force_ext = s.force_ext + noise.force_ext;
    next.torque_ext = s.torque_ext + noise.torque_ext;
    return next;
}

}  // namespace fext
