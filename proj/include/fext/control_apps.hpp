#pragma once

// Applications built on the wrench estimate: the yaw-torque admittance law,
// grid-survey wrench maps, and step-response / accuracy metrics.

#include "fext/timeseries.hpp"

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fext {

struct AdmittanceConfig {
    double gain_mps_per_nm{8.0};
    double limit_mps{0.3};
    double deadband_nm{0.005};

    void validate() const;
};

/// Lateral velocity command, clamp(k_p * deadband(tau_z), +/-limit). The deadband
/// shrinks the torque toward zero so the law stays continuous, odd and monotone.
double admittance_command(double torque_z_nm, const AdmittanceConfig& config);

struct WrenchMapCell {
    Eigen::Vector2d position{Eigen::Vector2d::Zero()};
    Vec3 force_mean{Vec3::Zero()};
    Vec3 torque_mean{Vec3::Zero()};
    Vec3 force_std{Vec3::Zero()};
    Vec3 torque_std{Vec3::Zero()};
    std::size_t samples{0};
};

/// Per-cell statistics of one estimator's wrench over each dwell segment.
/// `cells[i]` is the grid position of segment i. Samples within `settle_s` of
/// the start of a segment are discarded. Throws EmptyCell if a cell has none left.
std::vector<WrenchMapCell> build_wrench_map(const TimeSeriesLog& log, const std::string& estimator,
                                            const std::vector<Eigen::Vector2d>& cells, double settle_s = 1.5);

/// Columns: x,y,fx,fy,fz,tx,ty,tz,fx_std,fy_std,fz_std,tx_std,ty_std,tz_std,n
void write_wrench_map_csv(std::ostream& out, const std::vector<WrenchMapCell>& cells);

/// 10-90% rise time of `values` toward `final_value` from `initial_value`,
/// searching from `onset_s`. Crossings are linearly interpolated.
/// Throws NoStepDetected if either threshold is never crossed.
double rise_time_10_90(std::span<const double> times, std::span<const double> values, double onset_s,
                       double initial_value, double final_value);

inline constexpr std::array<const char*, 6> kWrenchChannels = {"fx", "fy", "fz", "tx", "ty", "tz"};

struct StepInfo {
    int channel{0};  ///< index into kWrenchChannels
    double onset_s{0.0};
    double initial_value{0.0};
    double final_value{0.0};
};

/// Largest step in the true wrench; throws NoStepDetected when no channel
/// changes by more than `threshold`.
StepInfo detect_step(const TimeSeriesLog& log, double threshold = 1e-3);

/// Rise time of one estimator on the detected step channel.
double step_rise_time(const TimeSeriesLog& log, const std::string& estimator, double threshold = 1e-3);

struct ChannelStats {
    double mean{0.0};
    double std{0.0};
    double rmse{0.0};  ///< against truth over the same window
};

struct EstimatorMetrics {
    std::string estimator;
    std::optional<double> rise_time_s;
    std::optional<std::string> step_channel;
    std::array<ChannelStats, 6> steady{};  ///< over the final steady window
    double force_rmse_n{0.0};              ///< whole run, norm of the 3-vector error
    double torque_rmse_nm{0.0};
    double steady_force_rmse_n{0.0};  ///< norm of the force error over the steady window
    double steady_torque_rmse_nm{0.0};
};

struct MetricsOptions {
    double steady_window_s{10.0};
    double step_threshold{1e-3};
};

struct MetricsSummary {
    double duration_s{0.0};
    std::size_t steps{0};
    std::vector<EstimatorMetrics> estimators;

    const EstimatorMetrics& at(const std::string& estimator) const;
};

/// Throws std::invalid_argument on an empty log.
MetricsSummary metrics(const TimeSeriesLog& log, const MetricsOptions& options = {});

}  // namespace fext
