#pragma once

// Momentum-based external wrench observer with low-pass filtered inputs and
// outputs. Velocities are obtained from first differences of the measured pose.

#include "fext/attitude.hpp"
#include "fext/rigid_body.hpp"
#include "fext/usque.hpp"

#include <Eigen/Core>

namespace fext {

/// First-order discrete low-pass, y_k = y_{k-1} + a (u_k - y_{k-1}),
/// a = T / (T + 1 / (2 pi f_c)). An infinite cutoff passes the input through.
struct LowPassFilter {
    double cutoff_hz{1.0};
    Eigen::VectorXd state;

    LowPassFilter() = default;
    /// Zero initial state of the given dimension.
    LowPassFilter(double cutoff, Eigen::Index dimension);

    /// Throws ConfigError unless 0 < cutoff < 0.5/dt (or cutoff is +inf).
    void validate(double dt) const;
    double coefficient(double dt) const;
    void reset(const Eigen::VectorXd& value) { state = value; }
};

Eigen::VectorXd lowpass_step(LowPassFilter& filter, const Eigen::VectorXd& input, double dt);

struct ObserverConfig {
    double force_gain{2.0};          ///< 1/s
    double torque_gain{2.0};         ///< 1/s
    double position_cutoff_hz{8.0};  ///< on differentiated position
    double rate_cutoff_hz{5.0};      ///< on differentiated attitude
    double output_cutoff_hz{3.0};    ///< on the wrench estimates

    void validate(double dt) const;
};

struct ObserverState {
    Vec3 force_ext{Vec3::Zero()};        ///< filtered output, global, N
    Vec3 torque_ext{Vec3::Zero()};       ///< filtered output, global, N m
    Vec3 force_raw{Vec3::Zero()};        ///< observer estimate before output filtering
    Vec3 torque_body_raw{Vec3::Zero()};  ///< body-frame torque estimate before output filtering
    Eigen::Matrix<double, 6, 1> integral{Eigen::Matrix<double, 6, 1>::Zero()};  ///< momentum residual integrals
    Vec3 initial_momentum{Vec3::Zero()};
    Vec3 initial_angular_momentum{Vec3::Zero()};

    LowPassFilter velocity_filter;
    LowPassFilter rate_filter;
    LowPassFilter output_filter;

    Vec3 last_position{Vec3::Zero()};
    AttitudeQuaternion last_attitude;
    double last_time_s{0.0};
    bool initialized{false};
};

/// Advances the observer by one pose sample. `speeds` are the motor speeds
/// applied over the interval ending at `y`.
ObserverState observer_step(const ObserverState& obs, const PoseMeasurement& y, const MotorSpeeds& speeds,
                            const VehicleParams& params, const ObserverConfig& config);

class NonlinearObserver {
public:
    NonlinearObserver(VehicleParams params, ObserverConfig config);

    void step(const PoseMeasurement& y, const MotorSpeeds& speeds);

    const ObserverState& state() const { return state_; }

private:
    VehicleParams params_;
    ObserverConfig config_;
    ObserverState state_;
};

}  // namespace fext
