#include "fext/nl_observer.hpp"

#include "fext/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace fext {

LowPassFilter::LowPassFilter(double cutoff, Eigen::Index dimension)
    : cutoff_hz(cutoff), state(Eigen::VectorXd::Zero(dimension))
{
}

void LowPassFilter::validate(double dt) const
{
    if (std::isinf(cutoff_hz) && cutoff_hz > 0.0) {
        return;
    }
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 / dt)) {
        throw ConfigError("low-pass cutoff must lie in (0, Nyquist)");
    }
}

double LowPassFilter::coefficient(double dt) const
{
    if (std::isinf(cutoff_hz)) {
        return 1.0;
    }
    return dt / (dt + 1.0 / (2.0 * std::numbers::pi * cutoff_hz));
}

Eigen::VectorXd lowpass_step(LowPassFilter& filter, const Eigen::VectorXd& input, double dt)
{
    if (filter.state.size() != input.size()) {
        filter.state = Eigen::VectorXd::Zero(input.size());
    }
    const double a = filter.coefficient(dt);
    if (a == 1.0) {
        filter.state = input;  // exact pass-through; y + (u - y) can round
    } else {
        filter.state += a * (input - filter.state);
    }
    return filter.state;
}

void ObserverConfig::validate(double dt) const
{
    if (!(force_gain > 0.0) || !(torque_gain > 0.0)) {
        throw ConfigError("observer: gains must be positive");
    }
    LowPassFilter(position_cutoff_hz, 3).validate(dt);
    LowPassFilter(rate_cutoff_hz, 3).validate(dt);
    LowPassFilter(output_cutoff_hz, 6).validate(dt);
}

ObserverState observer_step(const ObserverState& obs, const PoseMeasurement& y, const MotorSpeeds& speeds,
                            const VehicleParams& params, const ObserverConfig& config)
{
    ObserverState next = obs;
    if (!obs.initialized) {
        next.velocity_filter = LowPassFilter(config.position_cutoff_hz, 3);
        next.rate_filter = LowPassFilter(config.rate_cutoff_hz, 3);
        next.output_filter = LowPassFilter(config.output_cutoff_hz, 6);
        next.last_position = y.position;
        next.last_attitude = y.attitude;
        next.last_time_s = y.timestamp_s;
        next.initialized = true;
        return next;
    }

    const double dt = y.timestamp_s - obs.last_time_s;
    if (!(dt > 0.0)) {
        throw std::invalid_argument("observer_step: measurements must have increasing timestamps");
    }

    const Vec3 velocity = lowpass_step(next.velocity_filter, (y.position - obs.last_position) / dt, dt);
    const Vec3 body_rate_raw = quat_multiply(quat_inverse(obs.last_attitude), y.attitude).rotation_vector() / dt;
    const Vec3 body_rate = lowpass_step(next.rate_filter, body_rate_raw, dt);

    const Mat3& inertia = params.inertia_kgm2;
    const Vec3 thrust_global = y.attitude.rotate(Vec3(0.0, 0.0, collective_thrust(params, speeds)));

    next.integral.head<3>() += dt * (thrust_global - params.mass_kg * params.gravity_mps2 + obs.force_raw);
    next.force_raw = config.force_gain
        * (params.mass_kg * velocity - obs.initial_momentum - next.integral.head<3>());

    next.integral.tail<3>() += dt * (motor_torques(params, speeds) - body_rate.cross(inertia * body_rate)
                                     + obs.torque_body_raw);
    next.torque_body_raw = config.torque_gain
        * (inertia * body_rate - obs.initial_angular_momentum - next.integral.tail<3>());

    Eigen::Matrix<double, 6, 1> raw;
    raw << next.force_raw, y.attitude.rotate(next.torque_body_raw);
    const Eigen::VectorXd out = lowpass_step(next.output_filter, raw, dt);
    next.force_ext = out.head<3>();
    next.torque_ext = out.tail<3>();

    next.last_position = y.position;
    next.last_attitude = y.attitude;
    next.last_time_s = y.timestamp_s;
    return next;
}

NonlinearObserver::NonlinearObserver(VehicleParams params, ObserverConfig config)
    : params_(std::move(params)), config_(config)
{
    params_.validate();
    config_.validate(params_.dt_s);
}

void NonlinearObserver::step(const PoseMeasurement& y, const MotorSpeeds& speeds)
{
    state_ = observer_step(state_, y, speeds, params_, config_);
}

}  // namespace fext
