#include "fext/timeseries.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fext {
namespace {

const char* const kStateNames[19] = {"q0", "q1", "q2", "q3", "wx", "wy", "wz", "x",  "y",  "z",
                                     "vx", "vy", "vz", "tx", "ty", "tz", "fx", "fy", "fz"};
const char* const kVarNames[18] = {"var_rho_x", "var_rho_y", "var_rho_z", "var_wx", "var_wy", "var_wz",
                                   "var_x",     "var_y",     "var_z",     "var_vx", "var_vy", "var_vz",
                                   "var_tx",    "var_ty",    "var_tz",    "var_fx", "var_fy", "var_fz"};

constexpr int kFixedColumns = 1 + 1 + 3 + 19 + 1 + 7 + 4;
constexpr int kEstimatorColumns = 19 + 18;

void put(std::ostream& out, double v)
{
    if (std::isnan(v)) {
        out << ",nan";
        return;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, ",%.12g", v);
    out << buf;
}

double parse_number(const std::string& cell)
{
    if (cell == "nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) {
        throw std::runtime_error("timeseries csv: malformed number '" + cell + "'");
    }
    return v;
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    return cells;
}

}  // namespace

StateRecord pack_state(const VehicleState& s)
{
    StateRecord r;
    r << s.attitude.coeffs(), s.angular_velocity, s.position, s.velocity, s.torque_ext, s.force_ext;
    return r;
}

EstimateRecord make_estimate(const GaussianBelief& belief)
{
    EstimateRecord e;
    e.mean = pack_state(belief.mean);
    e.cov_diag = belief.cov.diagonal();
    return e;
}

EstimateRecord make_wrench_estimate(const Vec3& force, const Vec3& torque)
{
    EstimateRecord e;
    e.mean.segment<3>(13) = torque;
    e.mean.segment<3>(16) = force;
    return e;
}

std::size_t TimeSeriesLog::estimator_index(const std::string& id) const
{
    for (std::size_t i = 0; i < estimators.size(); ++i) {
        if (estimators[i] == id) {
            return i;
        }
    }
    throw std::out_of_range("timeseries: no estimator '" + id + "' in log");
}

void TimeSeriesLog::write_csv(std::ostream& out) const
{
    out << "# " << kTimeseriesSchema << '\n';
    out << "time_s,segment,ref_x,ref_y,ref_z";
    for (const char* n : kStateNames) {
        out << ",truth_" << n;
    }
    out << ",meas_valid,meas_x,meas_y,meas_z,meas_q0,meas_q1,meas_q2,meas_q3,motor_1,motor_2,motor_3,motor_4";
    for (const auto& id : estimators) {
        for (const char* n : kStateNames) {
            out << ',' << id << '.' << n;
        }
        for (const char* n : kVarNames) {
            out << ',' << id << '.' << n;
        }
    }
    out << '\n';

    for (const auto& row : rows) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.12g", row.time_s);
        out << buf << ',' << row.segment;
        for (int i = 0; i < 3; ++i) put(out, row.reference(i));
        for (int i = 0; i < 19; ++i) put(out, row.truth(i));
        out << ',' << (row.has_measurement ? 1 : 0);
        for (int i = 0; i < 3; ++i) put(out, row.meas_position(i));
        for (int i = 0; i < 4; ++i) put(out, row.meas_attitude(i));
        for (int i = 0; i < 4; ++i) put(out, row.motor_speeds(i));
        for (const auto& e : row.estimates) {
            for (int i = 0; i < 19; ++i) put(out, e.mean(i));
            for (int i = 0; i < 18; ++i) put(out, e.cov_diag(i));
        }
        out << '\n';
    }
}

TimeSeriesLog TimeSeriesLog::read_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != std::string("# ") + kTimeseriesSchema) {
        throw std::runtime_error("timeseries csv: missing or unsupported schema header");
    }
    if (!std::getline(in, line)) {
        throw std::runtime_error("timeseries csv: missing column header");
    }
    const auto header = split(line);
    if (header.size() < kFixedColumns || (header.size() - kFixedColumns) % kEstimatorColumns != 0) {
        throw std::runtime_error("timeseries csv: unexpected column count");
    }

    TimeSeriesLog log;
    for (std::size_t c = kFixedColumns; c < header.size(); c += kEstimatorColumns) {
        const auto dot = header[c].find('.');
        if (dot == std::string::npos) {
            throw std::runtime_error("timeseries csv: malformed estimator column '" + header[c] + "'");
        }
        log.estimators.push_back(header[c].substr(0, dot));
    }

    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            throw std::runtime_error("timeseries csv: row has " + std::to_string(cells.size()) + " cells, expected "
                                     + std::to_string(header.size()));
        }
        std::size_t c = 0;
        auto next = [&] { return parse_number(cells[c++]); };
        LogRow row;
        row.time_s = next();
        row.segment = static_cast<int>(next());
        for (int i = 0; i < 3; ++i) row.reference(i) = next();
        for (int i = 0; i < 19; ++i) row.truth(i) = next();
        row.has_measurement = next() != 0.0;
        for (int i = 0; i < 3; ++i) row.meas_position(i) = next();
        for (int i = 0; i < 4; ++i) row.meas_attitude(i) = next();
        for (int i = 0; i < 4; ++i) row.motor_speeds(i) = next();
        row.estimates.resize(log.estimators.size());
        for (auto& e : row.estimates) {
            for (int i = 0; i < 19; ++i) e.mean(i) = next();
            for (int i = 0; i < 18; ++i) e.cov_diag(i) = next();
        }
        log.rows.push_back(std::move(row));
    }
    return log;
}

}  // namespace fext
