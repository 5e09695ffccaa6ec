#include "fext/usque.hpp"

#include "fext/errors.hpp"
#include "fext/unscented.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace fext {
namespace {

constexpr int kPredictDim = kStateDim + kProcessNoiseDim;
constexpr int kCorrectDim = kStateDim + kMeasurementDim;

using PredictVector = Eigen::Matrix<double, kPredictDim, 1>;
using PredictCovariance = Eigen::Matrix<double, kPredictDim, kPredictDim>;
using CorrectVector = Eigen::Matrix<double, kCorrectDim, 1>;
using CorrectCovariance = Eigen::Matrix<double, kCorrectDim, kCorrectDim>;

ProcessNoiseSample unstack_noise(const Eigen::Ref<const Eigen::Matrix<double, kProcessNoiseDim, 1>>& eta)
{
    ProcessNoiseSample n;
    n.motor_torque = eta.segment<3>(0);
    n.torque_ext = eta.segment<3>(3);
    n.thrust = eta.segment<3>(6);
    n.force_ext = eta.segment<3>(9);
    return n;
}

StateCovariance symmetrized(const StateCovariance& p)
{
    return 0.5 * (p + p.transpose());
}

}  // namespace

void GaussianBelief::validate() const
{
    if (!cov.allFinite() || !mean.finite()) {
        throw std::invalid_argument("GaussianBelief: non-finite entries");
    }
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        throw std::invalid_argument("GaussianBelief: covariance not symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<StateCovariance> eig(cov, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10) {
        throw std::invalid_argument("GaussianBelief: covariance not positive semi-definite");
    }
}

StateVector to_minimal(const VehicleState& s, const AttitudeQuaternion& reference)
{
    StateVector v;
    v.segment<3>(state_index::attitude) = relative_mrp(s.attitude, reference).value();
    v.segment<3>(state_index::angular_velocity) = s.angular_velocity;
    v.segment<3>(state_index::position) = s.position;
    v.segment<3>(state_index::velocity) = s.velocity;
    v.segment<3>(state_index::torque_ext) = s.torque_ext;
    v.segment<3>(state_index::force_ext) = s.force_ext;
    return v;
}

VehicleState from_minimal(const StateVector& v, const AttitudeQuaternion& reference)
{
    VehicleState s;
    s.attitude = apply_mrp(MrpVector(v.segment<3>(state_index::attitude)), reference);
    s.angular_velocity = v.segment<3>(state_index::angular_velocity);
    s.position = v.segment<3>(state_index::position);
    s.velocity = v.segment<3>(state_index::velocity);
    s.torque_ext = v.segment<3>(state_index::torque_ext);
    s.force_ext = v.segment<3>(state_index::force_ext);
    return s;
}

GaussianBelief predict(const GaussianBelief& prior, const MotorSpeeds& speeds, const NoiseConfig& noise,
                       const VehicleParams& params, double kappa)
{
    const AttitudeQuaternion& prior_q = prior.mean.attitude;

    PredictVector z = PredictVector::Zero();
    z.head<kStateDim>() = to_minimal(prior.mean, prior_q);
    PredictCovariance sigma = PredictCovariance::Zero();
    sigma.topLeftCorner<kStateDim, kStateDim>() = prior.cov;
    sigma.bottomRightCorner<kProcessNoiseDim, kProcessNoiseDim>() = noise.process_block();

    const auto set = unscented::generate_sigma_points<kPredictDim>(z, sigma, kappa);

    std::vector<VehicleState> propagated;
    propagated.reserve(static_cast<std::size_t>(set.size()));
    for (int i = 0; i < set.size(); ++i) {
        const StateVector si = set.points.col(i).head<kStateDim>();
        const VehicleState state = from_minimal(si, prior_q);
        propagated.push_back(process_step(state, speeds, unstack_noise(set.points.col(i).tail<kProcessNoiseDim>()), params));
    }

    // Attitudes are re-expressed relative to the propagated central point.
    const AttitudeQuaternion reference = propagated.front().attitude;
    Eigen::Matrix<double, kStateDim, Eigen::Dynamic> minimal(kStateDim, set.size());
    for (int i = 0; i < set.size(); ++i) {
        minimal.col(i) = to_minimal(propagated[static_cast<std::size_t>(i)], reference);
    }

    const StateVector mean = unscented::weighted_mean<kStateDim>(minimal, set.weights);
    GaussianBelief out;
    out.cov = symmetrized(unscented::weighted_covariance<kStateDim>(minimal, mean, set.weights));
    out.mean = from_minimal(mean, reference);
    out.timestamp_s = prior.timestamp_s + params.dt_s;
    return out;
}

CorrectionResult correct(const GaussianBelief& predicted, const PoseMeasurement& y, const NoiseConfig& noise,
                         const UsqueConfig& config)
{
    const AttitudeQuaternion& pred_q = predicted.mean.attitude;

    CorrectVector z = CorrectVector::Zero();
    z.head<kStateDim>() = to_minimal(predicted.mean, pred_q);
    CorrectCovariance sigma = CorrectCovariance::Zero();
    sigma.topLeftCorner<kStateDim, kStateDim>() = predicted.cov;
    sigma.bottomRightCorner<kMeasurementDim, kMeasurementDim>() = noise.measurement_block();

    const auto set = unscented::generate_sigma_points<kCorrectDim>(z, sigma, config.kappa);

    const Eigen::Matrix<double, kStateDim, Eigen::Dynamic> states = set.points.topRows<kStateDim>();
    Eigen::Matrix<double, kMeasurementDim, Eigen::Dynamic> meas(kMeasurementDim, set.size());
    for (int i = 0; i < set.size(); ++i) {
        const auto p = set.points.col(i);
        meas.col(i).head<3>() = p.segment<3>(state_index::position) + p.segment<3>(kStateDim);
        meas.col(i).tail<3>() = p.segment<3>(state_index::attitude) + p.segment<3>(kStateDim + 3);
    }

    CorrectionArtifacts art;
    const StateVector state_mean = unscented::weighted_mean<kStateDim>(states, set.weights);
    art.predicted_measurement = unscented::weighted_mean<kMeasurementDim>(meas, set.weights);
    art.innovation_cov = unscented::weighted_covariance<kMeasurementDim>(meas, art.predicted_measurement, set.weights);
    art.cross_cov = unscented::weighted_cross_covariance<kStateDim, kMeasurementDim>(
        states, state_mean, meas, art.predicted_measurement, set.weights);

    const Eigen::SelfAdjointEigenSolver<MeasurementCovariance> eig(art.innovation_cov, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    const double condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(condition <= config.max_innovation_condition)) {
        throw InnovationCovarianceSingular("correct: innovation covariance is singular or ill-conditioned", condition);
    }

    const Eigen::LLT<MeasurementCovariance> llt(art.innovation_cov);
    art.gain = llt.solve(art.cross_cov.transpose()).transpose();

    MeasurementVector measured;
    measured.head<3>() = y.position;
    measured.tail<3>() = relative_mrp(y.attitude, pred_q).value();
    art.innovation = measured - art.predicted_measurement;
    art.mahalanobis_sq = art.innovation.dot(llt.solve(art.innovation));

    if (config.gate_enabled && art.mahalanobis_sq > config.gate_threshold) {
        art.rejected = true;
        return {predicted, art};
    }

    art.correction = art.gain * art.innovation;

    CorrectionResult result{predicted, art};
    GaussianBelief& post = result.posterior;
    post.cov = symmetrized(predicted.cov - art.gain * art.cross_cov.transpose());
    post.mean = from_minimal(z.head<kStateDim>() + art.correction, pred_q);
    return result;
}

UsqueEstimator::UsqueEstimator(GaussianBelief initial, VehicleParams params, NoiseConfig noise, UsqueConfig config)
    : belief_(std::move(initial)), params_(std::move(params)), noise_(std::move(noise)), config_(config)
{
    params_.validate();
    noise_.validate();
    belief_.validate();
}

const GaussianBelief& UsqueEstimator::step(const MotorSpeeds& speeds, const std::optional<PoseMeasurement>& y)
{
    belief_ = predict(belief_, speeds, noise_, params_, config_.kappa);
    last_correction_.reset();
    if (y) {
        CorrectionResult r = correct(belief_, *y, noise_, config_);
        belief_ = std::move(r.posterior);
        last_correction_ = r.artifacts;
    }
    return belief_;
}

}  // namespace fext
