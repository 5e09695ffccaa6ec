#include "fext/harness.hpp"

#include "fext/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <utility>

#ifndef FEXT_PRESET_DIR
#define FEXT_PRESET_DIR "configs/presets"
#endif

namespace fext::harness {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Every accepted key with its default. Section order here is the echo order.
const std::vector<std::pair<std::string, std::string>>& registry()
{
    static const std::vector<std::pair<std::string, std::string>> keys = {
        {"scenario.name", "custom"},
        {"scenario.description", ""},
        {"scenario.duration_s", "20"},
        {"scenario.seed", "1"},
        {"scenario.sensor_rate_hz", "200"},
        {"scenario.truth_turbulence", "true"},
        {"scenario.truth_wrench_walk", "false"},

        {"vehicle.mass_kg", "0.48"},
        {"vehicle.inertia_xx_kgm2", "3.4e-3"},
        {"vehicle.inertia_yy_kgm2", "3.4e-3"},
        {"vehicle.inertia_zz_kgm2", "4.7e-3"},
        {"vehicle.arm_m", "0.13"},
        {"vehicle.thrust_coeff_1_n_s2", "8.2e-7"},
        {"vehicle.thrust_coeff_2_n_s2", "8.2e-7"},
        {"vehicle.thrust_coeff_3_n_s2", "8.2e-7"},
        {"vehicle.thrust_coeff_4_n_s2", "8.2e-7"},
        {"vehicle.drag_coeff_1_nm_s2", "1.5e-8"},
        {"vehicle.drag_coeff_2_nm_s2", "1.5e-8"},
        {"vehicle.drag_coeff_3_nm_s2", "1.5e-8"},
        {"vehicle.drag_coeff_4_nm_s2", "1.5e-8"},
        {"vehicle.gravity_mps2", "9.81"},
        {"vehicle.dt_s", "0.005"},

        {"noise.thrust_xy_std_n", "0.025"},
        {"noise.thrust_z_std_n", "0.05"},
        {"noise.motor_torque_std_nm", "0.005"},
        {"noise.force_ext_std_n", "5e-4"},
        {"noise.torque_ext_std_nm", "5e-5"},
        {"noise.meas_position_std_m", "0.001"},
        {"noise.meas_attitude_std_rad", "0.002"},

        {"sensor.quantize_motors", "true"},
        {"sensor.motor_max_rad_s", "2550"},
        {"sensor.motor_bits", "8"},

        {"estimator.select", "both"},
        {"estimator.kappa", "2"},
        {"estimator.gate_enabled", "false"},
        {"estimator.gate_threshold", "12.592"},
        {"estimator.init_attitude_std_rad", "0.04"},
        {"estimator.init_rate_std_rad_s", "0.05"},
        {"estimator.init_position_std_m", "0.01"},
        {"estimator.init_velocity_std_mps", "0.05"},
        {"estimator.init_torque_std_nm", "0.05"},
        {"estimator.init_force_std_n", "0.5"},

        {"observer.force_gain_per_s", "2.0"},
        {"observer.torque_gain_per_s", "2.0"},
        {"observer.position_cutoff_hz", "8"},
        {"observer.rate_cutoff_hz", "5"},
        {"observer.output_cutoff_hz", "3"},

        {"controller.pos_kp_per_s2", "16"},
        {"controller.pos_kd_per_s", "7"},
        {"controller.pos_ki_per_s3", "1"},
        {"controller.pos_integral_limit_m_s", "2"},
        {"controller.max_tilt_rad", "0.5"},
        {"controller.att_kp_per_s2", "400"},
        {"controller.att_kd_per_s", "36"},
        {"controller.max_speed_rad_s", "2550"},

        {"disturbance.type", "none"},
        {"disturbance.mass_kg", "0.053"},
        {"disturbance.offset_x_m", "0"},
        {"disturbance.offset_y_m", "0"},
        {"disturbance.offset_z_m", "0"},
        {"disturbance.onset_s", "5"},

        {"fan.position_x_m", "0"},
        {"fan.position_y_m", "0"},
        {"fan.position_z_m", "1"},
        {"fan.axis_x", "1"},
        {"fan.axis_y", "0"},
        {"fan.axis_z", "0"},
        {"fan.peak_force_n", "0.6"},
        {"fan.decay_length_m", "1.4426950408889634"},
        {"fan.radial_width_m", "0.5"},
        {"fan.peak_torque_nm", "0.04"},
        {"fan.peak_radius_m", "0.5"},
        {"fan.velocity_x_mps", "0"},
        {"fan.velocity_y_mps", "0"},
        {"fan.velocity_z_mps", "0"},
        {"fan.move_start_s", "0"},

        {"trajectory.type", "hover"},
        {"trajectory.x_m", "0"},
        {"trajectory.y_m", "0"},
        {"trajectory.z_m", "1"},
        {"trajectory.yaw_rad", "0"},
        {"trajectory.grid_cells_x", "5"},
        {"trajectory.grid_cells_y", "5"},
        {"trajectory.grid_spacing_m", "0.5"},
        {"trajectory.dwell_s", "5"},
        {"trajectory.transit_s", "1.5"},

        {"admittance.gain_mps_per_nm", "8"},
        {"admittance.limit_mps", "0.3"},
        {"admittance.deadband_nm", "0.005"},

        {"metrics.steady_window_s", "10"},
        {"metrics.step_threshold", "1e-3"},
        {"metrics.wrench_map_settle_s", "1.5"},
        {"metrics.wrench_map_estimator", "usque"},

        {"comparison.enabled", "false"},
        {"comparison.low_position_std_m", "1e-4"},
        {"comparison.low_attitude_std_rad", "1e-4"},
        {"comparison.high_position_std_m", "0.01"},
        {"comparison.high_attitude_std_rad", "0.05"},
    };
    return keys;
}

bool known_key(const std::string& key)
{
    const auto& r = registry();
    return std::any_of(r.begin(), r.end(), [&](const auto& kv) { return kv.first == key; });
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

Vec3 get_vec3(const Config& c, const std::string& prefix, const std::string& suffix)
{
    return {c.get_double(prefix + "x" + suffix), c.get_double(prefix + "y" + suffix),
            c.get_double(prefix + "z" + suffix)};
}

Mat3 diag_cov(double sx, double sy, double sz)
{
    return Vec3(sx * sx, sy * sy, sz * sz).asDiagonal();
}

json optional_json(const std::optional<double>& v)
{
    return v ? json(*v) : json(nullptr);
}

/// Runs one pipeline stage so failures carry the module that raised them.
template <class F>
auto stage(const std::string& module, F&& f)
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const ModuleError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ModuleError(module, ex.what());
    }
}

void write_file(const fs::path& path, const std::string& content)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw ModuleError("harness_cli", "cannot open " + path.string() + " for writing");
    }
    f << content;
    if (!f) {
        throw ModuleError("harness_cli", "failed writing " + path.string());
    }
}

std::string log_csv(const TimeSeriesLog& log)
{
    std::ostringstream s;
    log.write_csv(s);
    return s.str();
}

}  // namespace

// ---------------------------------------------------------------- Config

Config Config::defaults()
{
    Config c;
    for (const auto& [k, v] : registry()) {
        c.values_[k] = v;
    }
    return c;
}

void Config::set(const std::string& key, const std::string& value)
{
    if (!known_key(key)) {
        throw ConfigError("config: unknown key '" + key + "'");
    }
    values_[key] = trim(value);
}

void Config::merge_stream(std::istream& in, const std::string& origin)
{
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& ex) {
        throw ConfigError("config: " + origin + ": " + ex.message() + " (line " + std::to_string(ex.line()) + ")");
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            throw ConfigError("config: " + origin + ": key '" + section + "' outside any section");
        }
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            if (!known_key(full)) {
                throw ConfigError("config: " + origin + ": unknown key '" + full + "'");
            }
            set(full, value.data());
        }
    }
}

void Config::merge_file(const fs::path& path)
{
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("config: cannot read " + path.string());
    }
    merge_stream(f, path.string());
}

void Config::apply_override(const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("config: override '" + assignment + "' is not of the form section.key=value");
    }
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

const std::string& Config::get(const std::string& key) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) {
        throw ConfigError("config: unknown key '" + key + "'");
    }
    return it->second;
}

double Config::get_double(const std::string& key) const
{
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size() && !std::isnan(d)) {
            return d;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("config: " + key + " = '" + v + "' is not a number");
}

long Config::get_int(const std::string& key) const
{
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        const long i = std::stol(v, &used);
        if (used == v.size()) {
            return i;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("config: " + key + " = '" + v + "' is not an integer");
}

bool Config::get_bool(const std::string& key) const
{
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw ConfigError("config: " + key + " = '" + v + "' is not a boolean");
}

void Config::write_ini(std::ostream& out) const
{
    std::string section;
    for (const auto& [key, def] : registry()) {
        const auto dot = key.find('.');
        const std::string s = key.substr(0, dot);
        if (s != section) {
            out << (section.empty() ? "" : "\n") << '[' << s << "]\n";
            section = s;
        }
        out << key.substr(dot + 1) << " = " << values_.at(key) << '\n';
    }
}

// ---------------------------------------------------------------- experiment

void set_measurement_noise(Scenario& scenario, double position_std_m, double attitude_std_rad)
{
    const double mrp = mrp_std_from_angle(attitude_std_rad);
    scenario.noise.meas_position = Mat3::Identity() * position_std_m * position_std_m;
    scenario.noise.meas_attitude = Mat3::Identity() * mrp * mrp;
    scenario.sensor.position_cov = scenario.noise.meas_position;
    scenario.sensor.attitude_cov = scenario.noise.meas_attitude;
}

Experiment build_experiment(const Config& c)
{
    Experiment e;
    e.name = c.get("scenario.name");
    Scenario& s = e.scenario;

    s.duration_s = c.get_double("scenario.duration_s");
    const long seed = c.get_int("scenario.seed");
    if (seed < 0) {
        throw ConfigError("config: scenario.seed must be non-negative");
    }
    s.seed = static_cast<std::uint64_t>(seed);
    s.sensor_rate_hz = c.get_double("scenario.sensor_rate_hz");
    s.truth_turbulence = c.get_bool("scenario.truth_turbulence");
    s.truth_wrench_walk = c.get_bool("scenario.truth_wrench_walk");

    VehicleParams& p = s.params;
    p.mass_kg = c.get_double("vehicle.mass_kg");
    p.inertia_kgm2 = Vec3(c.get_double("vehicle.inertia_xx_kgm2"), c.get_double("vehicle.inertia_yy_kgm2"),
                          c.get_double("vehicle.inertia_zz_kgm2"))
                         .asDiagonal();
    p.arm_m = c.get_double("vehicle.arm_m");
    for (int i = 0; i < 4; ++i) {
        const std::string n = std::to_string(i + 1);
        p.thrust_coeff(i) = c.get_double("vehicle.thrust_coeff_" + n + "_n_s2");
        p.drag_coeff(i) = c.get_double("vehicle.drag_coeff_" + n + "_nm_s2");
    }
    p.gravity_mps2 = Vec3(0.0, 0.0, c.get_double("vehicle.gravity_mps2"));
    p.dt_s = c.get_double("vehicle.dt_s");

    NoiseConfig& n = s.noise;
    const double txy = c.get_double("noise.thrust_xy_std_n");
    const double tz = c.get_double("noise.thrust_z_std_n");
    const double tm = c.get_double("noise.motor_torque_std_nm");
    const double fe = c.get_double("noise.force_ext_std_n");
    const double te = c.get_double("noise.torque_ext_std_nm");
    n.thrust = diag_cov(txy, txy, tz);
    n.motor_torque = diag_cov(tm, tm, tm);
    n.force_ext = diag_cov(fe, fe, fe);
    n.torque_ext = diag_cov(te, te, te);
    set_measurement_noise(s, c.get_double("noise.meas_position_std_m"), c.get_double("noise.meas_attitude_std_rad"));

    s.sensor.quantize_motors = c.get_bool("sensor.quantize_motors");
    s.sensor.motor_max_rad_s = c.get_double("sensor.motor_max_rad_s");
    s.sensor.motor_bits = static_cast<int>(c.get_int("sensor.motor_bits"));

    EstimatorSettings& est = e.estimators;
    const std::string select = c.get("estimator.select");
    if (select != "usque" && select != "observer" && select != "both") {
        throw ConfigError("config: estimator.select must be usque, observer or both");
    }
    est.usque = select != "observer";
    est.observer = select != "usque";
    est.usque_config.kappa = c.get_double("estimator.kappa");
    est.usque_config.gate_enabled = c.get_bool("estimator.gate_enabled");
    est.usque_config.gate_threshold = c.get_double("estimator.gate_threshold");
    est.init_attitude_std = mrp_std_from_angle(c.get_double("estimator.init_attitude_std_rad"));
    est.init_rate_std_rad_s = c.get_double("estimator.init_rate_std_rad_s");
    est.init_position_std_m = c.get_double("estimator.init_position_std_m");
    est.init_velocity_std_mps = c.get_double("estimator.init_velocity_std_mps");
    est.init_torque_std_nm = c.get_double("estimator.init_torque_std_nm");
    est.init_force_std_n = c.get_double("estimator.init_force_std_n");

    ObserverConfig& ob = est.observer_config;
    ob.force_gain = c.get_double("observer.force_gain_per_s");
    ob.torque_gain = c.get_double("observer.torque_gain_per_s");
    ob.position_cutoff_hz = c.get_double("observer.position_cutoff_hz");
    ob.rate_cutoff_hz = c.get_double("observer.rate_cutoff_hz");
    ob.output_cutoff_hz = c.get_double("observer.output_cutoff_hz");

    ControllerGains& g = s.controller;
    g.pos_kp = c.get_double("controller.pos_kp_per_s2");
    g.pos_kd = c.get_double("controller.pos_kd_per_s");
    g.pos_ki = c.get_double("controller.pos_ki_per_s3");
    g.pos_integral_limit_m_s = c.get_double("controller.pos_integral_limit_m_s");
    g.max_tilt_rad = c.get_double("controller.max_tilt_rad");
    g.att_kp = c.get_double("controller.att_kp_per_s2");
    g.att_kd = c.get_double("controller.att_kd_per_s");
    g.max_speed_rad_s = c.get_double("controller.max_speed_rad_s");

    const std::string dist = c.get("disturbance.type");
    if (dist == "none") {
        s.disturbance = NoDisturbance{};
    } else if (dist == "step_mass") {
        StepMass m;
        m.mass_kg = c.get_double("disturbance.mass_kg");
        m.offset_m = get_vec3(c, "disturbance.offset_", "_m");
        m.onset_s = c.get_double("disturbance.onset_s");
        s.disturbance = m;
    } else if (dist == "fan") {
        FanModel f;
        f.position_m = get_vec3(c, "fan.position_", "_m");
        f.axis = get_vec3(c, "fan.axis_", "");
        f.peak_force_n = c.get_double("fan.peak_force_n");
        f.decay_length_m = c.get_double("fan.decay_length_m");
        f.radial_width_m = c.get_double("fan.radial_width_m");
        f.peak_torque_nm = c.get_double("fan.peak_torque_nm");
        f.peak_radius_m = c.get_double("fan.peak_radius_m");
        f.velocity_mps = get_vec3(c, "fan.velocity_", "_mps");
        f.move_start_s = c.get_double("fan.move_start_s");
        s.disturbance = f;
    } else {
        throw ConfigError("config: disturbance.type must be none, step_mass or fan");
    }

    const std::string traj = c.get("trajectory.type");
    const Vec3 point = get_vec3(c, "trajectory.", "_m");
    const double yaw = c.get_double("trajectory.yaw_rad");
    if (traj == "hover") {
        s.trajectory = Hover{point, yaw};
    } else if (traj == "grid") {
        WaypointGrid grid;
        grid.origin_m = point;
        grid.yaw_rad = yaw;
        grid.cells_x = static_cast<int>(c.get_int("trajectory.grid_cells_x"));
        grid.cells_y = static_cast<int>(c.get_int("trajectory.grid_cells_y"));
        grid.spacing_m = c.get_double("trajectory.grid_spacing_m");
        grid.dwell_s = c.get_double("trajectory.dwell_s");
        grid.transit_s = c.get_double("trajectory.transit_s");
        s.trajectory = grid;
    } else if (traj == "track_fan") {
        TrackFan track;
        track.start_m = point;
        track.yaw_rad = yaw;
        track.admittance.gain_mps_per_nm = c.get_double("admittance.gain_mps_per_nm");
        track.admittance.limit_mps = c.get_double("admittance.limit_mps");
        track.admittance.deadband_nm = c.get_double("admittance.deadband_nm");
        s.trajectory = track;
    } else {
        throw ConfigError("config: trajectory.type must be hover, grid or track_fan");
    }

    e.metrics.steady_window_s = c.get_double("metrics.steady_window_s");
    e.metrics.step_threshold = c.get_double("metrics.step_threshold");
    if (!(e.metrics.steady_window_s > 0.0) || !(e.metrics.step_threshold > 0.0)) {
        throw ConfigError("config: metrics window and step threshold must be positive");
    }
    e.wrench_map_settle_s = c.get_double("metrics.wrench_map_settle_s");
    if (!(e.wrench_map_settle_s >= 0.0)) {
        throw ConfigError("config: metrics.wrench_map_settle_s must be non-negative");
    }
    e.wrench_map_estimator = c.get("metrics.wrench_map_estimator");

    if (c.get_bool("comparison.enabled")) {
        e.comparison = {
            {"low", c.get_double("comparison.low_position_std_m"), c.get_double("comparison.low_attitude_std_rad")},
            {"high", c.get_double("comparison.high_position_std_m"), c.get_double("comparison.high_attitude_std_rad")},
        };
        for (const auto& level : e.comparison) {
            if (!(level.position_std_m > 0.0) || !(level.attitude_std_rad > 0.0)) {
                throw ConfigError("config: comparison noise levels must be positive");
            }
        }
        est.usque = true;
        est.observer = true;
    }

    s.validate();
    est.validate();
    if (est.observer) {
        est.observer_config.validate(p.dt_s * s.sensor_divisor());
    }
    return e;
}

// ---------------------------------------------------------------- presets

fs::path default_preset_dir()
{
    return FEXT_PRESET_DIR;
}

std::vector<PresetInfo> list_presets(const fs::path& dir)
{
    std::vector<PresetInfo> out;
    if (!fs::is_directory(dir)) {
        throw ConfigError("presets: directory " + dir.string() + " not found");
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".ini") {
            continue;
        }
        Config c = Config::defaults();
        c.merge_file(entry.path());
        out.push_back({entry.path().stem().string(), c.get("scenario.description"), entry.path()});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
}

Config load_preset(const std::string& name, const fs::path& dir)
{
    const fs::path path = dir / (name + ".ini");
    if (!fs::is_regular_file(path)) {
        throw ConfigError("presets: no preset named '" + name + "' in " + dir.string());
    }
    Config c = Config::defaults();
    c.merge_file(path);
    return c;
}

// ---------------------------------------------------------------- summaries

nlohmann::json metrics_json(const MetricsSummary& summary)
{
    json j;
    j["duration_s"] = summary.duration_s;
    j["steps"] = summary.steps;
    json ests = json::object();
    for (const auto& m : summary.estimators) {
        json e;
        e["rise_time_s"] = optional_json(m.rise_time_s);
        e["step_channel"] = m.step_channel ? json(*m.step_channel) : json(nullptr);
        e["force_rmse_n"] = m.force_rmse_n;
        e["torque_rmse_nm"] = m.torque_rmse_nm;
        e["steady_force_rmse_n"] = m.steady_force_rmse_n;
        e["steady_torque_rmse_nm"] = m.steady_torque_rmse_nm;
        json steady = json::object();
        for (std::size_t ch = 0; ch < kWrenchChannels.size(); ++ch) {
            steady[kWrenchChannels[ch]] = {
                {"mean", m.steady[ch].mean}, {"std", m.steady[ch].std}, {"rmse", m.steady[ch].rmse}};
        }
        e["steady"] = steady;
        ests[m.estimator] = e;
    }
    j["estimators"] = ests;
    return j;
}

// ---------------------------------------------------------------- commands

int cli_run(const RunOptions& options, std::ostream& out, std::ostream& err)
{
    Config config;
    Experiment experiment;
    try {
        if (options.preset.has_value() == options.config_file.has_value()) {
            throw ConfigError("run: give exactly one of --preset or --config");
        }
        config = options.preset ? load_preset(*options.preset, options.preset_dir) : Config::defaults();
        if (options.config_file) {
            config.merge_file(*options.config_file);
        }
        for (const auto& o : options.overrides) {
            config.apply_override(o);
        }
        if (options.seed) {
            config.set("scenario.seed", std::to_string(*options.seed));
        }
        if (options.estimators) {
            config.set("estimator.select", *options.estimators);
        }
        experiment = build_experiment(config);
    } catch (const ConfigError& ex) {
        err << "error [harness_cli]: " << ex.what() << '\n';
        return kExitConfig;
    }

    try {
        std::error_code ec;
        fs::create_directories(options.output_dir, ec);
        if (ec || !fs::is_directory(options.output_dir)) {
            throw ModuleError("harness_cli", "cannot create output directory " + options.output_dir.string());
        }

        const auto start = std::chrono::steady_clock::now();
        json summary;
        summary["schema"] = kSummarySchema;
        summary["scenario"] = experiment.name;
        summary["seed"] = experiment.scenario.seed;

        std::ostringstream echo;
        echo << "; resolved configuration, reproduces the run with `fext run --config <this file>`\n";
        config.write_ini(echo);
        write_file(options.output_dir / "config_echo.ini", echo.str());

        if (experiment.comparison.empty()) {
            const ScenarioResult result =
                stage("simulator", [&] { return run_scenario(experiment.scenario, experiment.estimators); });
            write_file(options.output_dir / "timeseries.csv", log_csv(result.log));
            const MetricsSummary m = stage("control_apps", [&] { return metrics(result.log, experiment.metrics); });
            summary["actuator_saturated"] = result.actuator_saturated;
            summary["metrics"] = metrics_json(m);

            if (const auto* grid = std::get_if<WaypointGrid>(&experiment.scenario.trajectory)) {
                std::vector<Eigen::Vector2d> cells;
                for (const Vec3& c : grid->cells()) {
                    cells.emplace_back(c.x(), c.y());
                }
                const auto map = stage("control_apps", [&] {
                    return build_wrench_map(result.log, experiment.wrench_map_estimator, cells,
                                            experiment.wrench_map_settle_s);
                });
                std::ostringstream csv;
                write_wrench_map_csv(csv, map);
                write_file(options.output_dir / "wrench_map.csv", csv.str());
                summary["wrench_map"] = {{"file", "wrench_map.csv"},
                                         {"estimator", experiment.wrench_map_estimator},
                                         {"cells", map.size()}};
            }
        } else {
            json levels = json::array();
            for (const auto& level : experiment.comparison) {
                Scenario s = experiment.scenario;
                set_measurement_noise(s, level.position_std_m, level.attitude_std_rad);
                const ScenarioResult result = stage("simulator", [&] { return run_scenario(s, experiment.estimators); });
                const std::string file = level.name == "high" ? "timeseries.csv" : "timeseries_" + level.name + ".csv";
                write_file(options.output_dir / file, log_csv(result.log));
                const MetricsSummary m = stage("control_apps", [&] { return metrics(result.log, experiment.metrics); });
                json entry;
                entry["level"] = level.name;
                entry["position_std_m"] = level.position_std_m;
                entry["attitude_std_rad"] = level.attitude_std_rad;
                entry["timeseries"] = file;
                entry["actuator_saturated"] = result.actuator_saturated;
                entry["metrics"] = metrics_json(m);
                const auto& u = m.at(kUsqueId);
                const auto& o = m.at(kObserverId);
                entry["usque_lower_force_rmse"] = u.force_rmse_n < o.force_rmse_n;
                entry["usque_lower_torque_rmse"] = u.torque_rmse_nm < o.torque_rmse_nm;
                levels.push_back(entry);

                out << std::left << std::setw(6) << level.name << " sigma=(" << level.position_std_m << " m, "
                    << level.attitude_std_rad << " rad)  usque force/torque RMSE " << u.force_rmse_n << " N / "
                    << u.torque_rmse_nm << " N m   observer " << o.force_rmse_n << " N / " << o.torque_rmse_nm
                    << " N m\n";
            }
            summary["comparison"] = levels;
        }

        write_file(options.output_dir / "summary.json", summary.dump(2) + "\n");
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out << "wrote " << options.output_dir.string() << " (" << experiment.name << ", seed "
            << experiment.scenario.seed << ", " << std::fixed << std::setprecision(2) << elapsed << " s)\n";
        return kExitOk;
    } catch (const ConfigError& ex) {
        err << "error [harness_cli]: " << ex.what() << '\n';
        return kExitConfig;
    } catch (const ModuleError& ex) {
        err << "error [" << ex.module() << "]: " << ex.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& ex) {
        err << "error [harness_cli]: " << ex.what() << '\n';
        return kExitRuntime;
    }
}

int cli_presets(const fs::path& dir, std::ostream& out, std::ostream& err)
{
    try {
        for (const auto& p : list_presets(dir)) {
            out << std::left << std::setw(18) << p.name << p.description << '\n';
        }
        return kExitOk;
    } catch (const ConfigError& ex) {
        err << "error [harness_cli]: " << ex.what() << '\n';
        return kExitConfig;
    }
}

int cli_metrics(const fs::path& csv, const MetricsOptions& options, std::ostream& out, std::ostream& err)
{
    std::ifstream f(csv);
    if (!f) {
        err << "error [harness_cli]: cannot read " << csv.string() << '\n';
        return kExitConfig;
    }
    try {
        const TimeSeriesLog log = TimeSeriesLog::read_csv(f);
        json j;
        j["schema"] = kSummarySchema;
        j["source"] = csv.string();
        j["metrics"] = metrics_json(metrics(log, options));
        out << j.dump(2) << '\n';
        return kExitOk;
    } catch (const std::exception& ex) {
        err << "error [control_apps]: " << ex.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace fext::harness
