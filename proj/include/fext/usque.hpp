#pragma once

// Unscented quaternion estimator for the quadrotor state and external wrench.
//
// The belief carries the attitude mean as a full quaternion and all attitude
// uncertainty as an MRP perturbation about it. Minimal 18-dim coordinates are
// ordered (d_rho, omega, x, x_dot, tau_e, f_e); process noise is appended as
// (eta_tau_m, eta_tau_e, eta_ct, eta_fe) for prediction (L = 30) and the
// measurement noise (eta_x, eta_rho) for correction (L = 24).

#include "fext/attitude.hpp"
#include "fext/rigid_body.hpp"

#include <Eigen/Core>

#include <optional>

namespace fext {

inline constexpr int kStateDim = 18;
inline constexpr int kProcessNoiseDim = 12;
inline constexpr int kMeasurementDim = 6;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using StateCovariance = Eigen::Matrix<double, kStateDim, kStateDim>;
using MeasurementVector = Eigen::Matrix<double, kMeasurementDim, 1>;
using MeasurementCovariance = Eigen::Matrix<double, kMeasurementDim, kMeasurementDim>;
using StateMeasurementCovariance = Eigen::Matrix<double, kStateDim, kMeasurementDim>;

/// Offsets of each block in the minimal state.
namespace state_index {
inline constexpr int attitude = 0;
inline constexpr int angular_velocity = 3;
inline constexpr int position = 6;
inline constexpr int velocity = 9;
inline constexpr int torque_ext = 12;
inline constexpr int force_ext = 15;
}  // namespace state_index

struct GaussianBelief {
    VehicleState mean;
    StateCovariance cov{StateCovariance::Identity()};
    double timestamp_s{0.0};

    /// Throws std::invalid_argument unless cov is symmetric (1e-10) and PSD (eig >= -1e-10).
    void validate() const;
};

struct PoseMeasurement {
    Vec3 position{Vec3::Zero()};
    AttitudeQuaternion attitude;
    double timestamp_s{0.0};
};

struct CorrectionArtifacts {
    StateMeasurementCovariance gain{StateMeasurementCovariance::Zero()};
    StateMeasurementCovariance cross_cov{StateMeasurementCovariance::Zero()};
    MeasurementCovariance innovation_cov{MeasurementCovariance::Identity()};
    MeasurementVector innovation{MeasurementVector::Zero()};  ///< (position residual, MRP residual)
    MeasurementVector predicted_measurement{MeasurementVector::Zero()};
    StateVector correction{StateVector::Zero()};
    double mahalanobis_sq{0.0};
    bool rejected{false};
};

struct UsqueConfig {
    double kappa{2.0};
    bool gate_enabled{false};
    double gate_threshold{12.592};  ///< chi-square 95% quantile, 6 DoF
    double max_innovation_condition{1e12};
};

/// Minimal coordinates of `s` with the attitude expressed as an MRP about `reference`.
StateVector to_minimal(const VehicleState& s, const AttitudeQuaternion& reference);
VehicleState from_minimal(const StateVector& v, const AttitudeQuaternion& reference);

GaussianBelief predict(const GaussianBelief& prior, const MotorSpeeds& speeds, const NoiseConfig& noise,
                       const VehicleParams& params, double kappa = 2.0);

struct CorrectionResult {
    GaussianBelief posterior;
    CorrectionArtifacts artifacts;
};

CorrectionResult correct(const GaussianBelief& predicted, const PoseMeasurement& y, const NoiseConfig& noise,
                         const UsqueConfig& config = {});

/// Sequential filter: predict every step, correct when a pose is available.
class UsqueEstimator {
public:
    UsqueEstimator(GaussianBelief initial, VehicleParams params, NoiseConfig noise, UsqueConfig config = {});

    const GaussianBelief& step(const MotorSpeeds& speeds, const std::optional<PoseMeasurement>& y);

    const GaussianBelief& belief() const { return belief_; }
    const std::optional<CorrectionArtifacts>& last_correction() const { return last_correction_; }
    const VehicleParams& params() const { return params_; }
    const NoiseConfig& noise() const { return noise_; }

private:
    GaussianBelief belief_;
    VehicleParams params_;
    NoiseConfig noise_;
    UsqueConfig config_;
    std::optional<CorrectionArtifacts> last_correction_;
};

}  // namespace fext
