#include "fext/simulator.hpp"

#include "fext/errors.hpp"

#include <boost/random/normal_distribution.hpp>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <utility>

namespace fext {
namespace {

Vec3 gaussian3(const Mat3& cov, Rng& rng)
{
    boost::random::normal_distribution<double> normal;
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        v(i) = std::sqrt(cov(i, i)) * normal(rng);
    }
    return v;
}

bool diagonal_non_negative(const Mat3& m)
{
    return m.allFinite() && m.isDiagonal(0.0) && (m.diagonal().array() >= 0.0).all();
}

/// Seed of the second, independent stream used for truth process noise.
constexpr std::uint64_t kProcessStreamSalt = 0x9E3779B97F4A7C15ULL;

Vec3 initial_position(const Trajectory& t)
{
    struct Visitor {
        Vec3 operator()(const Hover& h) const { return h.point_m; }
        Vec3 operator()(const WaypointGrid& g) const { return g.origin_m; }
        Vec3 operator()(const TrackFan& f) const { return f.start_m; }
    };
    return std::visit(Visitor{}, t);
}

double initial_yaw(const Trajectory& t)
{
    return std::visit([](const auto& tr) { return tr.yaw_rad; }, t);
}

}  // namespace

// ---------------------------------------------------------------- disturbances

void FanModel::validate() const
{
    if (!position_m.allFinite() || !velocity_mps.allFinite() || !std::isfinite(move_start_s)) {
        throw ConfigError("fan: position, velocity and move start must be finite");
    }
    if (std::abs(axis.norm() - 1.0) > 1e-9) {
        throw ConfigError("fan: axis must be a unit vector");
    }
    if (axis.cross(Vec3::UnitZ()).norm() < 1e-6) {
        throw ConfigError("fan: axis must not be vertical");
    }
    if (!(peak_force_n >= 0.0) || !(decay_length_m > 0.0) || !(radial_width_m > 0.0) || !(peak_torque_nm >= 0.0)
        || !(peak_radius_m > 0.0)) {
        throw ConfigError("fan: scales must be positive");
    }
}

Vec3 FanModel::position_at(double t_s) const
{
    return position_m + std::max(t_s - move_start_s, 0.0) * velocity_mps;
}

double FanModel::lateral_offset(const Vec3& p, double t_s) const
{
    const Vec3 lateral = axis.cross(Vec3::UnitZ()).normalized();
    return (p - position_at(t_s)).dot(lateral);
}

double FanModel::axial_distance(const Vec3& p, double t_s) const
{
    return (p - position_at(t_s)).dot(axis);
}

Wrench FanModel::evaluate(const Vec3& p, double t_s) const
{
    Wrench w;
    const double d = axial_distance(p, t_s);
    if (d <= 0.0) {
        return w;
    }
    const Vec3 radial = (p - position_at(t_s)) - d * axis;
    const double r2 = radial.squaredNorm();
    w.force = axis * peak_force_n * std::exp(-d / decay_length_m) * std::exp(-r2 / (2.0 * radial_width_m * radial_width_m));
    const double u = lateral_offset(p, t_s) / peak_radius_m;
    w.torque = Vec3(0.0, 0.0, peak_torque_nm * u * std::exp(0.5 * (1.0 - u * u)));
    return w;
}

void StepMass::validate() const
{
    if (!(mass_kg >= 0.0) || !offset_m.allFinite() || !std::isfinite(onset_s)) {
        throw ConfigError("step mass: mass must be non-negative and offset/onset finite");
    }
}

Wrench StepMass::evaluate(const VehicleState& s, double t_s, const Vec3& gravity) const
{
    Wrench w;
    if (t_s < onset_s) {
        return w;
    }
    w.force = -mass_kg * gravity;
    w.torque = s.attitude.rotate(offset_m).cross(w.force);
    return w;
}

std::optional<Wrench> evaluate_disturbance(const Disturbance& d, const VehicleState& s, double t_s,
                                           const Vec3& gravity)
{
    struct Visitor {
        const VehicleState& s;
        double t;
        const Vec3& g;
        std::optional<Wrench> operator()(const NoDisturbance&) const { return std::nullopt; }
        std::optional<Wrench> operator()(const StepMass& m) const { return m.evaluate(s, t, g); }
        std::optional<Wrench> operator()(const FanModel& f) const { return f.evaluate(s.position, t); }
    };
    return std::visit(Visitor{s, t_s, gravity}, d);
}

// ---------------------------------------------------------------- trajectories

void WaypointGrid::validate() const
{
    if (cells_x < 1 || cells_y < 1 || !(spacing_m > 0.0) || !(dwell_s > 0.0) || !(transit_s > 0.0)
        || !origin_m.allFinite() || !std::isfinite(yaw_rad)) {
        throw ConfigError("grid: need at least one cell and positive spacing, dwell and transit");
    }
}

std::vector<Vec3> WaypointGrid::cells() const
{
    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(cells_x * cells_y));
    for (int iy = 0; iy < cells_y; ++iy) {
        for (int j = 0; j < cells_x; ++j) {
            const int ix = iy % 2 == 0 ? j : cells_x - 1 - j;
            out.push_back(origin_m + Vec3(ix * spacing_m, iy * spacing_m, 0.0));
        }
    }
    return out;
}

double WaypointGrid::duration_s() const
{
    return cells_x * cells_y * (transit_s + dwell_s);
}

Reference WaypointGrid::at(double t_s) const
{
    const auto pts = cells();
    const double period = transit_s + dwell_s;
    Reference ref;
    ref.yaw_rad = yaw_rad;
    if (t_s >= duration_s()) {
        ref.position = pts.back();
        return ref;
    }
    const auto i = static_cast<std::size_t>(std::max(0.0, std::floor(t_s / period)));
    const double local = t_s - static_cast<double>(i) * period;
    const Vec3& target = pts[i];
    const Vec3& from = pts[i == 0 ? 0 : i - 1];
    if (local < transit_s) {
        ref.position = from + (target - from) * (local / transit_s);
        ref.velocity = (target - from) / transit_s;
    } else {
        ref.position = target;
        ref.segment = static_cast<int>(i);
    }
    return ref;
}

// ---------------------------------------------------------------- sensors

void SensorModel::validate() const
{
    if (!diagonal_non_negative(position_cov) || !diagonal_non_negative(attitude_cov)) {
        throw ConfigError("sensor: covariances must be diagonal and non-negative");
    }
    if (!(motor_max_rad_s > 0.0) || motor_bits < 1 || motor_bits > 24) {
        throw ConfigError("sensor: motor range must be positive and bits in [1, 24]");
    }
}

MotorSpeeds quantize_speeds(const MotorSpeeds& speeds, double max_rad_s, int bits)
{
    const double levels = std::ldexp(1.0, bits) - 1.0;
    const double step = max_rad_s / levels;
    Vec4 q;
    for (int i = 0; i < 4; ++i) {
        q(i) = std::clamp(std::round(speeds.rad_s(i) / step), 0.0, levels) * step;
    }
    return MotorSpeeds(q);
}

SensorSample sensor_sample(const VehicleState& truth, const MotorSpeeds& applied, const SensorModel& model,
                           double timestamp_s, Rng& rng)
{
    SensorSample out;
    out.pose.position = truth.position + gaussian3(model.position_cov, rng);
    out.pose.attitude = apply_mrp(MrpVector(gaussian3(model.attitude_cov, rng)), truth.attitude);
    out.pose.timestamp_s = timestamp_s;
    out.speeds = model.quantize_motors ? quantize_speeds(applied, model.motor_max_rad_s, model.motor_bits) : applied;
    return out;
}

ProcessNoiseSample sample_process_noise(const NoiseConfig& noise, Rng& rng)
{
    ProcessNoiseSample eta;
    eta.motor_torque = gaussian3(noise.motor_torque, rng);
    eta.torque_ext = gaussian3(noise.torque_ext, rng);
    eta.thrust = gaussian3(noise.thrust, rng);
    eta.force_ext = gaussian3(noise.force_ext, rng);
    return eta;
}

// ---------------------------------------------------------------- control

void ControllerGains::validate() const
{
    if (!(pos_kp > 0.0) || !(pos_kd > 0.0) || !(pos_ki >= 0.0) || !(pos_integral_limit_m_s >= 0.0)
        || !(att_kp > 0.0) || !(att_kd > 0.0) || !(max_speed_rad_s > 0.0)) {
        throw ConfigError("controller: gains and limits must be positive");
    }
    if (!(max_tilt_rad > 0.0) || !(max_tilt_rad < 1.5)) {
        throw ConfigError("controller: max tilt must lie in (0, 1.5) rad");
    }
}

ControlOutput mix(double thrust_n, const Vec3& torque_nm, const VehicleParams& params, double max_speed_rad_s)
{
    const Vec4& k = params.thrust_coeff;
    const Vec4& p = params.drag_coeff;
    const double l = params.arm_m;
    Mat4 a;
    a.row(0) = k.transpose();
    a.row(1) = l * k.cwiseProduct(Vec4(1.0, 1.0, -1.0, -1.0)).transpose();
    a.row(2) = l * k.cwiseProduct(Vec4(-1.0, 1.0, 1.0, -1.0)).transpose();
    a.row(3) = p.cwiseProduct(Vec4(1.0, -1.0, 1.0, -1.0)).transpose();

    const Vec4 wrench(thrust_n, torque_nm.x(), torque_nm.y(), torque_nm.z());
    const Vec4 squared = a.partialPivLu().solve(wrench);
    const double max_sq = max_speed_rad_s * max_speed_rad_s;

    ControlOutput out;
    Vec4 speeds;
    for (int i = 0; i < 4; ++i) {
        const double clamped = std::clamp(squared(i), 0.0, max_sq);
        out.saturated = out.saturated || clamped != squared(i);
        speeds(i) = std::sqrt(clamped);
    }
    out.speeds = MotorSpeeds(speeds);
    out.thrust_n = thrust_n;
    out.torque_nm = torque_nm;
    return out;
}

FlightController::FlightController(VehicleParams params, ControllerGains gains)
    : params_(std::move(params)), gains_(gains)
{
    params_.validate();
    gains_.validate();
}

ControlOutput FlightController::update(const VehicleState& state, const Reference& ref)
{
    const double dt = params_.dt_s;
    const Vec3 e = ref.position - state.position;
    const Vec3 ev = ref.velocity - state.velocity;
    integral_ = (integral_ + dt * e).cwiseMax(-gains_.pos_integral_limit_m_s).cwiseMin(gains_.pos_integral_limit_m_s);

    Vec3 acc = gains_.pos_kp * e + gains_.pos_kd * ev + gains_.pos_ki * integral_ + params_.gravity_mps2;
    acc.z() = std::max(acc.z(), 0.2 * params_.gravity_mps2.norm());
    const double horizontal = acc.head<2>().norm();
    const double max_horizontal = std::tan(gains_.max_tilt_rad) * acc.z();
    if (horizontal > max_horizontal) {
        acc.head<2>() *= max_horizontal / horizontal;
    }

    const Vec3 force = params_.mass_kg * acc;
    const Vec3 z_body = force.normalized();
    const Vec3 heading(std::cos(ref.yaw_rad), std::sin(ref.yaw_rad), 0.0);
    const Vec3 y_body = z_body.cross(heading).normalized();
    const Vec3 x_body = y_body.cross(z_body);
    Mat3 r_des;
    r_des << x_body, y_body, z_body;
    const Eigen::Quaterniond qd(r_des);
    const AttitudeQuaternion desired(qd.w(), qd.vec());

    const Vec3 attitude_error = (quat_inverse(state.attitude) * desired).canonical().rotation_vector();
    const Vec3& w = state.angular_velocity;
    const Mat3& inertia = params_.inertia_kgm2;
    const Vec3 torque = inertia * (gains_.att_kp * attitude_error - gains_.att_kd * w) + w.cross(inertia * w);
    const double thrust = std::max(force.dot(state.attitude.rotate(Vec3::UnitZ())), 0.0);

    ControlOutput out = mix(thrust, torque, params_, gains_.max_speed_rad_s);
    saturated_once_ = saturated_once_ || out.saturated;
    return out;
}

VehicleState truth_step(const VehicleState& s, const MotorSpeeds& speeds, const std::optional<Wrench>& wrench,
                        const VehicleParams& params, const ProcessNoiseSample& noise)
{
    VehicleState applied = s;
    if (wrench) {
        applied.force_ext = wrench->force;
        applied.torque_ext = wrench->torque;
    }
    return process_step(applied, speeds, noise, params);
}

// ---------------------------------------------------------------- scenario

void EstimatorSettings::validate() const
{
    const double stds[] = {init_attitude_std,     init_rate_std_rad_s, init_position_std_m,
                           init_velocity_std_mps, init_torque_std_nm,  init_force_std_n};
    for (double s : stds) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw ConfigError("estimator: initial standard deviations must be positive");
        }
    }
    if (!(usque_config.kappa > 0.0)) {
        throw ConfigError("estimator: kappa must be positive");
    }
    if (!(usque_config.gate_threshold > 0.0) || !(usque_config.max_innovation_condition > 1.0)) {
        throw ConfigError("estimator: gate threshold and condition limit must be positive");
    }
}

GaussianBelief EstimatorSettings::initial_belief(const VehicleState& truth) const
{
    GaussianBelief b;
    b.mean = truth;
    b.mean.torque_ext.setZero();
    b.mean.force_ext.setZero();
    StateVector sd;
    sd << Vec3::Constant(init_attitude_std), Vec3::Constant(init_rate_std_rad_s), Vec3::Constant(init_position_std_m),
        Vec3::Constant(init_velocity_std_mps), Vec3::Constant(init_torque_std_nm), Vec3::Constant(init_force_std_n);
    b.cov = sd.cwiseAbs2().asDiagonal();
    return b;
}

void Scenario::validate() const
{
    if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
        throw ConfigError("scenario: duration must be positive");
    }
    params.validate();
    noise.validate();
    sensor.validate();
    controller.validate();
    std::visit(
        [](const auto& d) {
            if constexpr (!std::is_same_v<std::decay_t<decltype(d)>, NoDisturbance>) {
                d.validate();
            }
        },
        disturbance);
    if (const auto* grid = std::get_if<WaypointGrid>(&trajectory)) {
        grid->validate();
    }
    if (const auto* track = std::get_if<TrackFan>(&trajectory)) {
        track->admittance.validate();
        if (!std::holds_alternative<FanModel>(disturbance)) {
            throw ConfigError("scenario: fan tracking needs a fan disturbance");
        }
    }
    sensor_divisor();
}

int Scenario::sensor_divisor() const
{
    if (!(sensor_rate_hz > 0.0)) {
        throw ConfigError("scenario: sensor rate must be positive");
    }
    const double ratio = 1.0 / (params.dt_s * sensor_rate_hz);
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
        throw ConfigError("scenario: sensor rate must divide the physics rate evenly");
    }
    return static_cast<int>(rounded);
}

ScenarioResult run_scenario(const Scenario& scenario, const EstimatorSettings& estimators)
{
    scenario.validate();
    estimators.validate();
    const auto* track = std::get_if<TrackFan>(&scenario.trajectory);
    if (track && !estimators.usque && !estimators.observer) {
        throw ConfigError("scenario: fan tracking needs an estimator");
    }

    const VehicleParams& params = scenario.params;
    const double dt = params.dt_s;
    const auto steps = static_cast<long>(std::llround(scenario.duration_s / dt));
    const int divisor = scenario.sensor_divisor();

    Rng sensor_rng(scenario.seed);
    Rng process_rng(scenario.seed ^ kProcessStreamSalt);

    VehicleState truth;
    truth.position = initial_position(scenario.trajectory);
    truth.attitude = AttitudeQuaternion::from_yaw(initial_yaw(scenario.trajectory));

    FlightController controller(params, scenario.controller);

    std::optional<UsqueEstimator> ukf;
    std::optional<NonlinearObserver> observer;
    ScenarioResult result;
    if (estimators.usque) {
        ukf.emplace(estimators.initial_belief(truth), params, scenario.noise, estimators.usque_config);
        result.log.estimators.emplace_back(kUsqueId);
    }
    if (estimators.observer) {
        estimators.observer_config.validate(dt * divisor);
        observer.emplace(params, estimators.observer_config);
        result.log.estimators.emplace_back(kObserverId);
    }

    double track_y = track ? track->start_m.y() : 0.0;
    double tau_z_estimate = 0.0;
    MotorSpeeds reported;
    result.log.rows.reserve(static_cast<std::size_t>(steps));

    for (long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const double t_next = static_cast<double>(k + 1) * dt;

        Reference ref;
        if (const auto* hover = std::get_if<Hover>(&scenario.trajectory)) {
            ref.position = hover->point_m;
            ref.yaw_rad = hover->yaw_rad;
        } else if (const auto* grid = std::get_if<WaypointGrid>(&scenario.trajectory)) {
            ref = grid->at(t);
        } else {
            const double cmd = admittance_command(tau_z_estimate, track->admittance);
            ref.position = Vec3(track->start_m.x(), track_y, track->start_m.z());
            ref.velocity = Vec3(0.0, cmd, 0.0);
            ref.yaw_rad = track->yaw_rad;
            track_y += dt * cmd;
        }

        const ControlOutput control = controller.update(truth, ref);
        const auto wrench = evaluate_disturbance(scenario.disturbance, truth, t, params.gravity_mps2);
        ProcessNoiseSample eta;
        if (scenario.truth_turbulence || scenario.truth_wrench_walk) {
            eta = sample_process_noise(scenario.noise, process_rng);
            if (!scenario.truth_turbulence) {
                eta.thrust.setZero();
                eta.motor_torque.setZero();
            }
            if (!scenario.truth_wrench_walk) {
                eta.force_ext.setZero();
                eta.torque_ext.setZero();
            }
        }
        truth = truth_step(truth, control.speeds, wrench, params, eta);

        LogRow row;
        row.time_s = t_next;
        row.segment = ref.segment;
        row.reference = ref.position;
        row.truth = pack_state(truth);

        std::optional<PoseMeasurement> pose;
        const SensorSample sample = sensor_sample(truth, control.speeds, scenario.sensor, t_next, sensor_rng);
        reported = sample.speeds;
        if ((k + 1) % divisor == 0) {
            pose = sample.pose;
            row.has_measurement = true;
            row.meas_position = sample.pose.position;
            row.meas_attitude = sample.pose.attitude.coeffs();
        }
        row.motor_speeds = reported.rad_s;

        if (ukf) {
            try {
                ukf->step(reported, pose);
            } catch (const std::exception& ex) {
                throw ModuleError("usque_estimator", ex.what());
            }
            row.estimates.push_back(make_estimate(ukf->belief()));
            tau_z_estimate = ukf->belief().mean.torque_ext.z();
        }
        if (observer) {
            if (pose) {
                try {
                    observer->step(*pose, reported);
                } catch (const std::exception& ex) {
                    throw ModuleError("nl_observer", ex.what());
                }
            }
            row.estimates.push_back(make_wrench_estimate(observer->state().force_ext, observer->state().torque_ext));
            if (!ukf) {
                tau_z_estimate = observer->state().torque_ext.z();
            }
        }
        result.log.rows.push_back(std::move(row));
    }
    result.actuator_saturated = controller.saturated_once();
    return result;
}

}  // namespace fext
