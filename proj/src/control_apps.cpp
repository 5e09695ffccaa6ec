#include "fext/control_apps.hpp"

#include "fext/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace fext {
namespace {

double wrench_channel(const EstimateRecord& e, int channel)
{
    return channel < 3 ? e.force()(channel) : e.torque()(channel - 3);
}

double truth_channel(const LogRow& row, int channel)
{
    return channel < 3 ? row.truth_force()(channel) : row.truth_torque()(channel - 3);
}

/// Time at which the segment (t0, f0) -> (t1, f1) crosses `level`.
double interpolate_crossing(double t0, double f0, double t1, double f1, double level)
{
    if (f1 == f0) {
        return t1;
    }
    return t0 + (level - f0) * (t1 - t0) / (f1 - f0);
}

}  // namespace

void AdmittanceConfig::validate() const
{
    if (!(gain_mps_per_nm > 0.0) || !(limit_mps > 0.0) || !(deadband_nm >= 0.0)) {
        throw ConfigError("admittance: gain and limit must be positive, deadband non-negative");
    }
}

double admittance_command(double torque_z_nm, const AdmittanceConfig& config)
{
    const double shrunk = std::copysign(std::max(std::abs(torque_z_nm) - config.deadband_nm, 0.0), torque_z_nm);
    return std::clamp(config.gain_mps_per_nm * shrunk, -config.limit_mps, config.limit_mps);
}

std::vector<WrenchMapCell> build_wrench_map(const TimeSeriesLog& log, const std::string& estimator,
                                            const std::vector<Eigen::Vector2d>& cells, double settle_s)
{
    const std::size_t est = log.estimator_index(estimator);

    // Start time of every segment, then first and second moments of the kept samples.
    std::vector<double> start(cells.size(), std::numeric_limits<double>::infinity());
    for (const auto& row : log.rows) {
        if (row.segment >= 0 && static_cast<std::size_t>(row.segment) < cells.size()) {
            auto& s = start[static_cast<std::size_t>(row.segment)];
            s = std::min(s, row.time_s);
        }
    }

    using Vec6 = Eigen::Matrix<double, 6, 1>;
    std::vector<Vec6> sum(cells.size(), Vec6::Zero());
    std::vector<Vec6> sum_sq(cells.size(), Vec6::Zero());
    std::vector<std::size_t> count(cells.size(), 0);
    for (const auto& row : log.rows) {
        if (row.segment < 0 || static_cast<std::size_t>(row.segment) >= cells.size()) {
            continue;
        }
        const auto seg = static_cast<std::size_t>(row.segment);
        if (row.time_s < start[seg] + settle_s) {
            continue;
        }
        Vec6 w;
        w << row.estimates[est].force(), row.estimates[est].torque();
        sum[seg] += w;
        sum_sq[seg] += w.cwiseAbs2();
        ++count[seg];
    }

    std::vector<WrenchMapCell> out;
    out.reserve(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (count[i] == 0) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "wrench map: no samples for cell %zu at (%.3f, %.3f)", i, cells[i].x(),
                          cells[i].y());
            throw EmptyCell(buf);
        }
        const double n = static_cast<double>(count[i]);
        const Vec6 mean = sum[i] / n;
        const Vec6 var = (sum_sq[i] / n - mean.cwiseAbs2()).cwiseMax(0.0);
        WrenchMapCell c;
        c.position = cells[i];
        c.force_mean = mean.head<3>();
        c.torque_mean = mean.tail<3>();
        c.force_std = var.head<3>().cwiseSqrt();
        c.torque_std = var.tail<3>().cwiseSqrt();
        c.samples = count[i];
        out.push_back(c);
    }
    return out;
}

void write_wrench_map_csv(std::ostream& out, const std::vector<WrenchMapCell>& cells)
{
    out << "x,y,fx,fy,fz,tx,ty,tz,fx_std,fy_std,fz_std,tx_std,ty_std,tz_std,n\n";
    for (const auto& c : cells) {
        char buf[512];
        std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%zu\n",
                      c.position.x(), c.position.y(), c.force_mean.x(), c.force_mean.y(), c.force_mean.z(),
                      c.torque_mean.x(), c.torque_mean.y(), c.torque_mean.z(), c.force_std.x(), c.force_std.y(),
                      c.force_std.z(), c.torque_std.x(), c.torque_std.y(), c.torque_std.z(), c.samples);
        out << buf;
    }
}

double rise_time_10_90(std::span<const double> times, std::span<const double> values, double onset_s,
                       double initial_value, double final_value)
{
    if (times.size() != values.size()) {
        throw std::invalid_argument("rise_time_10_90: size mismatch");
    }
    const double span = final_value - initial_value;
    if (span == 0.0) {
        throw NoStepDetected("rise_time_10_90: zero step amplitude");
    }
    auto fraction = [&](std::size_t i) { return (values[i] - initial_value) / span; };

    std::optional<double> t10;
    std::optional<double> t90;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < onset_s) {
            continue;
        }
        const double f = fraction(i);
        const bool has_prev = i > 0 && times[i - 1] >= onset_s;
        if (!t10 && f >= 0.1) {
            t10 = has_prev ? interpolate_crossing(times[i - 1], fraction(i - 1), times[i], f, 0.1) : times[i];
        }
        if (t10 && f >= 0.9) {
            t90 = has_prev ? interpolate_crossing(times[i - 1], fraction(i - 1), times[i], f, 0.9) : times[i];
            break;
        }
    }
    if (!t10 || !t90) {
        throw NoStepDetected("rise_time_10_90: response never crossed the 10% and 90% levels");
    }
    return *t90 - *t10;
}

StepInfo detect_step(const TimeSeriesLog& log, double threshold)
{
    if (log.rows.empty()) {
        throw NoStepDetected("detect_step: empty log");
    }
    std::optional<StepInfo> best;
    for (int ch = 0; ch < 6; ++ch) {
        const double initial = truth_channel(log.rows.front(), ch);
        const double final_value = truth_channel(log.rows.back(), ch);
        if (std::abs(final_value - initial) <= threshold) {
            continue;
        }
        const auto it = std::find_if(log.rows.begin(), log.rows.end(), [&](const LogRow& r) {
            return std::abs(truth_channel(r, ch) - initial) > threshold;
        });
        if (!best || std::abs(final_value - initial) > std::abs(best->final_value - best->initial_value)) {
            best = StepInfo{ch, it->time_s, initial, final_value};
        }
    }
    if (!best) {
        throw NoStepDetected("detect_step: no wrench channel changes by more than the threshold");
    }
    return *best;
}

double step_rise_time(const TimeSeriesLog& log, const std::string& estimator, double threshold)
{
    const StepInfo step = detect_step(log, threshold);
    const std::size_t est = log.estimator_index(estimator);
    std::vector<double> t;
    std::vector<double> v;
    t.reserve(log.rows.size());
    v.reserve(log.rows.size());
    for (const auto& row : log.rows) {
        t.push_back(row.time_s);
        v.push_back(wrench_channel(row.estimates[est], step.channel));
    }
    return rise_time_10_90(t, v, step.onset_s, step.initial_value, step.final_value);
}

const EstimatorMetrics& MetricsSummary::at(const std::string& estimator) const
{
    for (const auto& e : estimators) {
        if (e.estimator == estimator) {
            return e;
        }
    }
    throw std::out_of_range("metrics: no estimator '" + estimator + "'");
}

MetricsSummary metrics(const TimeSeriesLog& log, const MetricsOptions& options)
{
    if (log.rows.empty()) {
        throw std::invalid_argument("metrics: empty log");
    }
    MetricsSummary summary;
    summary.steps = log.rows.size();
    summary.duration_s = log.rows.back().time_s - log.rows.front().time_s;

    std::optional<StepInfo> step;
    try {
        step = detect_step(log, options.step_threshold);
    } catch (const NoStepDetected&) {
    }

    const double window_start = log.rows.back().time_s - options.steady_window_s;
    for (std::size_t e = 0; e < log.estimators.size(); ++e) {
        EstimatorMetrics m;
        m.estimator = log.estimators[e];

        double force_sq = 0.0;
        double torque_sq = 0.0;
        std::array<double, 6> sum{};
        std::array<double, 6> sum_sq{};
        std::array<double, 6> err_sq{};
        std::size_t n_window = 0;
        for (const auto& row : log.rows) {
            const EstimateRecord& est = row.estimates[e];
            force_sq += (est.force() - row.truth_force()).squaredNorm();
            torque_sq += (est.torque() - row.truth_torque()).squaredNorm();
            if (row.time_s >= window_start) {
                ++n_window;
                for (int ch = 0; ch < 6; ++ch) {
                    const double v = wrench_channel(est, ch);
                    sum[static_cast<std::size_t>(ch)] += v;
                    sum_sq[static_cast<std::size_t>(ch)] += v * v;
                    const double d = v - truth_channel(row, ch);
                    err_sq[static_cast<std::size_t>(ch)] += d * d;
                }
            }
        }
        const double n = static_cast<double>(log.rows.size());
        m.force_rmse_n = std::sqrt(force_sq / n);
        m.torque_rmse_nm = std::sqrt(torque_sq / n);
        for (std::size_t ch = 0; ch < 6; ++ch) {
            const double nw = static_cast<double>(n_window);
            const double mean = sum[ch] / nw;
            m.steady[ch].mean = mean;
            m.steady[ch].std = std::sqrt(std::max(sum_sq[ch] / nw - mean * mean, 0.0));
            m.steady[ch].rmse = std::sqrt(err_sq[ch] / nw);
        }
        m.steady_force_rmse_n = std::sqrt((err_sq[0] + err_sq[1] + err_sq[2]) / static_cast<double>(n_window));
        m.steady_torque_rmse_nm = std::sqrt((err_sq[3] + err_sq[4] + err_sq[5]) / static_cast<double>(n_window));

        if (step) {
            m.step_channel = kWrenchChannels[static_cast<std::size_t>(step->channel)];
            try {
                m.rise_time_s = step_rise_time(log, m.estimator, options.step_threshold);
            } catch (const NoStepDetected&) {
            }
        }
        summary.estimators.push_back(std::move(m));
    }
    return summary;
}

}  // namespace fext
