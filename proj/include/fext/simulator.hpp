#pragma once

// Ground-truth world for the estimators: disturbance models, reference
// trajectories, an inner-loop flight controller, sensor models, and the
// scenario runner that logs everything per step.
//
// Random numbers come from boost::random::mt19937_64 with
// boost::random::normal_distribution, whose algorithms are fixed by Boost and
// therefore give the same streams on every platform.

#include "fext/control_apps.hpp"
#include "fext/nl_observer.hpp"
#include "fext/rigid_body.hpp"
#include "fext/timeseries.hpp"
#include "fext/usque.hpp"

#include <boost/random/mersenne_twister.hpp>

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace fext {

using Rng = boost::random::mt19937_64;

struct Wrench {
    Vec3 force{Vec3::Zero()};   ///< global, N
    Vec3 torque{Vec3::Zero()};  ///< global, N m
};

/// Synthetic fan flow field. With d the axial distance in front of the fan
/// and r the radial distance from its axis:
///   |f| = F0 exp(-d/d0) exp(-r^2 / (2 sigma_r^2)) along the axis, zero for d <= 0,
///   tau_z = T0 (s/r_peak) exp((1 - (s/r_peak)^2) / 2) for d > 0,
/// where s is the horizontal offset along axis x e_z. The fan may translate
/// at a constant velocity after `move_start_s`.
struct FanModel {
    Vec3 position_m{Vec3::Zero()};
    Vec3 axis{Vec3::UnitX()};
    double peak_force_n{0.6};
    double decay_length_m{1.4426950408889634};  ///< 0.3 N at 1 m on axis
    double radial_width_m{0.5};
    double peak_torque_nm{0.04};
    double peak_radius_m{0.5};
    Vec3 velocity_mps{Vec3::Zero()};
    double move_start_s{0.0};

    /// Throws ConfigError on a non-unit or vertical axis or non-positive scales.
    void validate() const;

    Vec3 position_at(double t_s) const;
    /// Signed horizontal offset of `p` from the fan axis at time t.
    double lateral_offset(const Vec3& p, double t_s) const;
    double axial_distance(const Vec3& p, double t_s) const;
    Wrench evaluate(const Vec3& p, double t_s) const;
};

/// Test mass hung from the body at `offset_m` (body frame), attached at `onset_s`.
struct StepMass {
    double mass_kg{0.053};
    Vec3 offset_m{Vec3::Zero()};
    double onset_s{5.0};

    void validate() const;
    /// Gravity on the mass, with torque = R offset x F in the global frame.
    Wrench evaluate(const VehicleState& s, double t_s, const Vec3& gravity) const;
};

struct NoDisturbance {};

using Disturbance = std::variant<NoDisturbance, StepMass, FanModel>;

/// Scenario wrench at a pose. NoDisturbance yields nullopt: the state keeps its
/// own wrench (zero, or a random walk when truth process noise is enabled).
std::optional<Wrench> evaluate_disturbance(const Disturbance& d, const VehicleState& s, double t_s,
                                           const Vec3& gravity);

struct Reference {
    Vec3 position{Vec3::Zero()};
    Vec3 velocity{Vec3::Zero()};
    double yaw_rad{0.0};
    int segment{-1};
};

struct Hover {
    Vec3 point_m{0.0, 0.0, 1.0};
    double yaw_rad{0.0};
};

/// Serpentine grid survey. Each cell gets a straight transit from the previous
/// cell followed by a dwell; only the dwell carries a segment index.
struct WaypointGrid {
    Vec3 origin_m{0.0, 0.0, 1.0};  ///< first cell
    int cells_x{5};
    int cells_y{5};
    double spacing_m{0.5};
    double dwell_s{5.0};
    double transit_s{1.5};
    double yaw_rad{0.0};

    void validate() const;
    std::vector<Vec3> cells() const;
    double duration_s() const;
    Reference at(double t_s) const;
};

/// Hold x and z; the y reference integrates the admittance command computed
/// from the estimated yaw torque.
struct TrackFan {
    Vec3 start_m{2.3, 0.8, 1.0};
    double yaw_rad{0.0};
    AdmittanceConfig admittance;
};

using Trajectory = std::variant<Hover, WaypointGrid, TrackFan>;

struct SensorModel {
    Mat3 position_cov{Mat3::Identity() * 1e-6};        ///< m^2
    Mat3 attitude_cov{Mat3::Identity() * 2.5e-7};      ///< MRP^2
    double motor_max_rad_s{2550.0};
    int motor_bits{8};
    bool quantize_motors{true};

    void validate() const;
};

/// Round to the nearest of 2^bits evenly spaced levels over [0, max].
MotorSpeeds quantize_speeds(const MotorSpeeds& speeds, double max_rad_s, int bits);

struct SensorSample {
    PoseMeasurement pose;
    MotorSpeeds speeds;
};

/// Position plus Gaussian noise; attitude perturbed by a global-frame MRP of
/// covariance attitude_cov; motor speeds optionally quantized.
SensorSample sensor_sample(const VehicleState& truth, const MotorSpeeds& applied, const SensorModel& model,
                           double timestamp_s, Rng& rng);

/// Draws eta with the per-step covariances of `noise`.
ProcessNoiseSample sample_process_noise(const NoiseConfig& noise, Rng& rng);

struct ControllerGains {
    double pos_kp{16.0};  ///< 1/s^2
    double pos_kd{7.0};   ///< 1/s
    double pos_ki{1.0};   ///< 1/s^3
    double pos_integral_limit_m_s{2.0};
    double max_tilt_rad{0.5};
    double att_kp{400.0};  ///< 1/s^2
    double att_kd{36.0};   ///< 1/s
    double max_speed_rad_s{2550.0};

    void validate() const;
};

struct ControlOutput {
    MotorSpeeds speeds;
    double thrust_n{0.0};
    Vec3 torque_nm{Vec3::Zero()};
    bool saturated{false};
};

/// Motor speeds realising (c_t, tau_m) through the inverse of the thrust and
/// torque maps, clamped to [0, max]. `saturated` reports any clamping.
ControlOutput mix(double thrust_n, const Vec3& torque_nm, const VehicleParams& params, double max_speed_rad_s);

/// Cascaded PID position loop, thrust-vector attitude target, PD attitude loop
/// with gyroscopic feed-forward. Holds the position integrator.
class FlightController {
public:
    FlightController(VehicleParams params, ControllerGains gains);

    ControlOutput update(const VehicleState& state, const Reference& ref);

    bool saturated_once() const { return saturated_once_; }

private:
    VehicleParams params_;
    ControllerGains gains_;
    Vec3 integral_{Vec3::Zero()};
    bool saturated_once_{false};
};

/// Truth propagation: process_step with the scenario wrench substituted for
/// the random walk. Without a wrench the state's own wrench is kept.
VehicleState truth_step(const VehicleState& s, const MotorSpeeds& speeds, const std::optional<Wrench>& wrench,
                        const VehicleParams& params, const ProcessNoiseSample& noise = {});

struct EstimatorSettings {
    bool usque{true};
    bool observer{true};
    UsqueConfig usque_config;
    ObserverConfig observer_config;
    /// Initial standard deviations (attitude in MRP units).
    double init_attitude_std{0.01};
    double init_rate_std_rad_s{0.05};
    double init_position_std_m{0.01};
    double init_velocity_std_mps{0.05};
    double init_torque_std_nm{0.05};
    double init_force_std_n{0.5};

    void validate() const;
    GaussianBelief initial_belief(const VehicleState& truth) const;
};

struct Scenario {
    double duration_s{20.0};
    Disturbance disturbance{NoDisturbance{}};
    Trajectory trajectory{Hover{}};
    std::uint64_t seed{1};
    VehicleParams params;
    NoiseConfig noise{NoiseConfig::defaults()};  ///< estimator tuning
    SensorModel sensor;
    double sensor_rate_hz{200.0};
    ControllerGains controller;
    /// Perturb the truth thrust and motor torque with draws from `noise`
    /// (unmodelled aerodynamics). Also keeps reported motor speeds moving so
    /// their quantization error averages out instead of freezing into a bias.
    bool truth_turbulence{true};
    /// Let the truth wrench random-walk with draws from `noise` when no
    /// disturbance is configured.
    bool truth_wrench_walk{false};

    /// Throws ConfigError on any violated invariant.
    void validate() const;
    /// Physics steps between pose samples.
    int sensor_divisor() const;
};

struct ScenarioResult {
    TimeSeriesLog log;
    bool actuator_saturated{false};
};

/// Deterministic in the seed. Rows are logged at t = k T, k = 1..N.
ScenarioResult run_scenario(const Scenario& scenario, const EstimatorSettings& estimators);

inline constexpr const char* kUsqueId = "usque";
inline constexpr const char* kObserverId = "observer";

}  // namespace fext
