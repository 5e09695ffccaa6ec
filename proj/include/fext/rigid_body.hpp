#pragma once

// Discrete-time quadrotor process model shared by the truth simulator and the
// estimator. "X" configuration: every motor sits `arm_m` from the body x and y
// axes; motors 2 and 4 spin about +body-z.

#include "fext/attitude.hpp"

#include <Eigen/Core>

namespace fext {

using Mat12 = Eigen::Matrix<double, 12, 12>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

struct VehicleParams {
    double mass_kg{0.48};
    Mat3 inertia_kgm2{Eigen::Vector3d(3.4e-3, 3.4e-3, 4.7e-3).asDiagonal()};
    double arm_m{0.13};
    Vec4 thrust_coeff{Vec4::Constant(8.2e-7)};  ///< k_i, N/(rad/s)^2
    Vec4 drag_coeff{Vec4::Constant(1.5e-8)};    ///< p_i, N m/(rad/s)^2
    Vec3 gravity_mps2{0.0, 0.0, 9.81};
    double dt_s{0.005};

    /// Throws ConfigError on a violated invariant.
    void validate() const;
};

struct MotorSpeeds {
    Vec4 rad_s{Vec4::Zero()};

    MotorSpeeds() = default;
    /// Throws std::invalid_argument for negative or non-finite speeds.
    explicit MotorSpeeds(const Vec4& speeds);
};

struct VehicleState {
    AttitudeQuaternion attitude;               ///< body -> global
    Vec3 angular_velocity{Vec3::Zero()};       ///< body frame, rad/s
    Vec3 position{Vec3::Zero()};               ///< global, m
    Vec3 velocity{Vec3::Zero()};               ///< global, m/s
    Vec3 torque_ext{Vec3::Zero()};             ///< global, N m
    Vec3 force_ext{Vec3::Zero()};              ///< global, N

    bool finite() const;
};

struct ProcessNoiseSample {
    Vec3 thrust{Vec3::Zero()};        ///< eta_ct, body frame, N
    Vec3 motor_torque{Vec3::Zero()};  ///< eta_tau_m, body frame, N m
    Vec3 force_ext{Vec3::Zero()};     ///< eta_fe, N per step
    Vec3 torque_ext{Vec3::Zero()};    ///< eta_tau_e, N m per step
};

/// Process covariances are per step (5 ms by default); measurement covariances
/// are per sample. Attitude measurement noise lives in MRP space.
struct NoiseConfig {
    Mat3 thrust{Mat3::Zero()};
    Mat3 motor_torque{Mat3::Zero()};
    Mat3 force_ext{Mat3::Zero()};
    Mat3 torque_ext{Mat3::Zero()};
    Mat3 meas_position{Mat3::Zero()};
    Mat3 meas_attitude{Mat3::Zero()};

    /// Default estimator tuning for the 200 Hz mocap setup.
    static NoiseConfig defaults();

    /// All six matrices diagonal with strictly positive entries, else ConfigError.
    void validate() const;

    /// Stacked as (tau_m, tau_e, c_t, f_e).
    Mat12 process_block() const;
    /// Stacked as (position, attitude MRP).
    Mat6 measurement_block() const;
};

/// MRP standard deviation equivalent to an attitude error of `std_rad` radians.
double mrp_std_from_angle(double std_rad);

double collective_thrust(const VehicleParams& params, const MotorSpeeds& speeds);

/// Body-frame motor torque (tau_x, tau_y, tau_z).
Vec3 motor_torques(const VehicleParams& params, const MotorSpeeds& speeds);

/// One explicit step of the translational and rotational dynamics with the
/// external wrench as a random walk. With zero noise the wrench is held.
VehicleState process_step(const VehicleState& s, const MotorSpeeds& speeds, const ProcessNoiseSample& noise,
                          const VehicleParams& params);

/// Global-frame acceleration used by the translational update.
Vec3 translational_acceleration(const VehicleState& s, const MotorSpeeds& speeds, const Vec3& thrust_noise,
                                const VehicleParams& params);

}  // namespace fext
