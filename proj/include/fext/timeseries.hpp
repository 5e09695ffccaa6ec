#pragma once

// Per-step simulation record and its CSV persistence.
//
// CSV layout (schema "fext-timeseries v1"):
//   line 1: "# fext-timeseries v1"
//   line 2: column names
//   time_s, segment, ref_{x,y,z}, truth_{q0,q1,q2,q3,wx,wy,wz,x,y,z,vx,vy,vz,tx,ty,tz,fx,fy,fz},
//   meas_valid, meas_{x,y,z,q0,q1,q2,q3}, motor_{1..4},
//   then per estimator <id>.{q0..fz} (19 columns) and <id>.var_{rho_x..fz} (18 columns).
// Quantities an estimator does not provide are written as "nan".

#include "fext/rigid_body.hpp"
#include "fext/usque.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace fext {

inline constexpr const char* kTimeseriesSchema = "fext-timeseries v1";

/// (q0, q1, q2, q3, omega, x, x_dot, tau_e, f_e)
using StateRecord = Eigen::Matrix<double, 19, 1>;

StateRecord pack_state(const VehicleState& s);

struct EstimateRecord {
    StateRecord mean{StateRecord::Constant(std::numeric_limits<double>::quiet_NaN())};
    StateVector cov_diag{StateVector::Constant(std::numeric_limits<double>::quiet_NaN())};

    Vec3 torque() const { return mean.segment<3>(13); }
    Vec3 force() const { return mean.segment<3>(16); }
};

EstimateRecord make_estimate(const GaussianBelief& belief);
EstimateRecord make_wrench_estimate(const Vec3& force, const Vec3& torque);

struct LogRow {
    double time_s{0.0};
    int segment{-1};  ///< dwell segment index, -1 outside any dwell
    Vec3 reference{Vec3::Zero()};
    StateRecord truth{StateRecord::Zero()};
    bool has_measurement{false};
    Vec3 meas_position{Vec3::Zero()};
    Vec4 meas_attitude{1.0, 0.0, 0.0, 0.0};
    Vec4 motor_speeds{Vec4::Zero()};  ///< as reported to the estimators
    std::vector<EstimateRecord> estimates;

    Vec3 truth_torque() const { return truth.segment<3>(13); }
    Vec3 truth_force() const { return truth.segment<3>(16); }
    Vec3 truth_position() const { return truth.segment<3>(7); }
};

struct TimeSeriesLog {
    std::vector<std::string> estimators;
    std::vector<LogRow> rows;

    /// Index of an estimator id; throws std::out_of_range if absent.
    std::size_t estimator_index(const std::string& id) const;

    void write_csv(std::ostream& out) const;
    /// Throws std::runtime_error on a schema mismatch or malformed row.
    static TimeSeriesLog read_csv(std::istream& in);
};

}  // namespace fext
