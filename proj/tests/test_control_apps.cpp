#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fext/control_apps.hpp"
#include "fext/errors.hpp"
#include "fext/simulator.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace fext;

namespace {

LogRow make_row(double t, const Vec3& true_force, const Vec3& true_torque, const Vec3& est_force,
                const Vec3& est_torque, int segment = -1)
{
    LogRow row;
    row.time_s = t;
    row.segment = segment;
    VehicleState s;
    s.force_ext = true_force;
    s.torque_ext = true_torque;
    row.truth = pack_state(s);
    row.estimates.push_back(make_wrench_estimate(est_force, est_torque));
    return row;
}

/// Truth steps by `height` on fz at `onset`; the estimate follows a first-order lag.
TimeSeriesLog first_order_log(double onset, double tau, double height, double t_end, double dt = 0.005)
{
    TimeSeriesLog log;
    log.estimators = {"est"};
    for (int k = 1; k * dt <= t_end + 1e-12; ++k) {
        const double t = k * dt;
        const bool on = t >= onset;
        const double truth = on ? height : 0.0;
        const double est = on ? height * (1.0 - std::exp(-(t - onset) / tau)) : 0.0;
        log.rows.push_back(make_row(t, Vec3(0, 0, truth), Vec3::Zero(), Vec3(0, 0, est), Vec3::Zero()));
    }
    return log;
}

}  // namespace

// ---------------------------------------------------------------- admittance

TEST_CASE("admittance: examples")
{
    const AdmittanceConfig c;
    CHECK(admittance_command(0.0, c) == 0.0);
    CHECK(admittance_command(0.004, c) == 0.0);
    CHECK(admittance_command(0.02, c) == doctest::Approx(8.0 * 0.015));
    CHECK(admittance_command(-0.02, c) == doctest::Approx(-8.0 * 0.015));
    CHECK(admittance_command(1.0, c) == doctest::Approx(0.3));
    CHECK(admittance_command(-1.0, c) == doctest::Approx(-0.3));
}

TEST_CASE("admittance: odd, monotone, bounded and continuous" * doctest::test_suite("properties"))
{
    for (int i = 0; i < 200; ++i) {
        AdmittanceConfig c;
        c.gain_mps_per_nm = test::uniform(0.1, 50.0);
        c.limit_mps = test::uniform(0.01, 1.0);
        c.deadband_nm = test::uniform(0.0, 0.02);
        REQUIRE_NOTHROW(c.validate());
        double prev = admittance_command(-0.2, c);
        for (double tau = -0.2; tau <= 0.2; tau += 1e-4) {
            const double u = admittance_command(tau, c);
            CHECK(u == -admittance_command(-tau, c));
            CHECK(std::abs(u) <= c.limit_mps);
            CHECK(u >= prev);
            CHECK(u - prev <= c.gain_mps_per_nm * 1e-4 + 1e-12);
            if (std::abs(tau) <= c.deadband_nm) CHECK(u == 0.0);
            prev = u;
        }
    }
}

TEST_CASE("admittance: validation")
{
    AdmittanceConfig c;
    c.gain_mps_per_nm = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = AdmittanceConfig{};
    c.limit_mps = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = AdmittanceConfig{};
    c.deadband_nm = -0.001;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

// ---------------------------------------------------------------- step metrics

TEST_CASE("rise time of a first-order response")
{
    // Oracle: 10-90% of 1 - exp(-t/tau) takes tau ln 9.
    const double tau = 0.45;
    const auto log = first_order_log(7.0, tau, -0.52, 20.0);
    CHECK(step_rise_time(log, "est") == doctest::Approx(tau * std::log(9.0)).epsilon(1e-4));

    const StepInfo step = detect_step(log);
    CHECK(std::string(kWrenchChannels[static_cast<std::size_t>(step.channel)]) == "fz");
    CHECK(step.onset_s == doctest::Approx(7.0));
    CHECK(step.initial_value == 0.0);
    CHECK(step.final_value == -0.52);
}

TEST_CASE("rise_time_10_90 on raw samples")
{
    const std::vector<double> t{0, 1, 2, 3, 4};
    const std::vector<double> v{0, 0, 0.5, 1, 1};
    // 10% at t = 1.2, 90% at t = 2.8.
    CHECK(rise_time_10_90(t, v, 0.0, 0.0, 1.0) == doctest::Approx(1.6));
    const std::vector<double> flat{0, 0, 0.5, 0.5, 0.5};
    CHECK_THROWS_AS(rise_time_10_90(t, flat, 0.0, 0.0, 1.0), NoStepDetected);
}

TEST_CASE("rise time is invariant under a uniform time shift" * doctest::test_suite("properties"))
{
    auto log = first_order_log(3.0, 0.3, 0.4, 10.0);
    const double base = step_rise_time(log, "est");
    for (double shift : {-2.5, 0.123, 17.0, 1000.0}) {
        auto shifted = log;
        for (auto& r : shifted.rows) r.time_s += shift;
        CHECK(step_rise_time(shifted, "est") == doctest::Approx(base).epsilon(1e-9));
        CHECK(metrics(shifted).at("est").rise_time_s.value() == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("no step in the truth")
{
    TimeSeriesLog log;
    log.estimators = {"est"};
    for (int k = 1; k <= 100; ++k) {
        log.rows.push_back(make_row(k * 0.005, Vec3(0, 0, -0.1), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()));
    }
    CHECK_THROWS_AS(detect_step(log), NoStepDetected);
    const auto m = metrics(log);
    CHECK_FALSE(m.at("est").rise_time_s.has_value());
    CHECK_FALSE(m.at("est").step_channel.has_value());
    CHECK_THROWS_AS(metrics(TimeSeriesLog{}), std::invalid_argument);
}

TEST_CASE("metrics: perfect estimate has zero error")
{
    TimeSeriesLog log;
    log.estimators = {"est"};
    for (int k = 1; k <= 400; ++k) {
        const Vec3 f = test::random_vec3(0.5);
        const Vec3 tq = test::random_vec3(0.05);
        log.rows.push_back(make_row(k * 0.005, f, tq, f, tq));
    }
    const auto m = metrics(log).at("est");
    CHECK(m.force_rmse_n == 0.0);
    CHECK(m.torque_rmse_nm == 0.0);
    CHECK(m.steady_force_rmse_n == 0.0);
    for (const auto& ch : m.steady) CHECK(ch.rmse == 0.0);
}

TEST_CASE("metrics: steady window statistics")
{
    // Estimate alternates +/- 0.01 around the truth, with a constant 0.02 offset on tz.
    TimeSeriesLog log;
    log.estimators = {"est"};
    for (int k = 1; k <= 4000; ++k) {
        const double d = k % 2 == 0 ? 0.01 : -0.01;
        log.rows.push_back(
            make_row(k * 0.005, Vec3(0, 0, -0.52), Vec3(0, 0, 0.1), Vec3(0, 0, -0.52 + d), Vec3(0, 0, 0.12)));
    }
    MetricsOptions opt;
    opt.steady_window_s = 5.0;
    const auto m = metrics(log, opt).at("est");
    const auto& fz = m.steady[2];
    CHECK(fz.mean == doctest::Approx(-0.52));
    CHECK(fz.std == doctest::Approx(0.01).epsilon(1e-3));
    CHECK(fz.rmse == doctest::Approx(0.01).epsilon(1e-3));
    const auto& tz = m.steady[5];
    CHECK(tz.mean == doctest::Approx(0.12));
    CHECK(tz.std < 1e-9);
    CHECK(tz.rmse == doctest::Approx(0.02));
    CHECK(m.torque_rmse_nm == doctest::Approx(0.02));
    CHECK(m.force_rmse_n == doctest::Approx(0.01));
}

// ---------------------------------------------------------------- wrench map

namespace {

/// Two 5 s dwells with a 1 s transit before each; estimates alternate around a per-cell value.
TimeSeriesLog two_cell_log()
{
    TimeSeriesLog log;
    log.estimators = {"est"};
    const double dt = 0.005;
    int k = 0;
    for (int seg = 0; seg < 2; ++seg) {
        const Vec3 f = seg == 0 ? Vec3(0.3, 0, 0) : Vec3(0.1, 0.05, 0);
        const Vec3 tq = seg == 0 ? Vec3(0, 0, 0.02) : Vec3(0, 0, -0.01);
        for (int i = 0; i < 200; ++i) log.rows.push_back(make_row(++k * dt, f, tq, f, tq, -1));
        for (int i = 0; i < 1000; ++i) {
            const double d = i % 2 == 0 ? 0.004 : -0.004;
            log.rows.push_back(make_row(++k * dt, f, tq, f + Vec3(d, 0, 0), tq + Vec3(0, 0, d / 10), seg));
        }
    }
    return log;
}

}  // namespace

TEST_CASE("wrench map: per-cell statistics after the settle time")
{
    const auto log = two_cell_log();
    const std::vector<Eigen::Vector2d> cells{{0.5, -1.0}, {1.0, -1.0}};
    const auto map = build_wrench_map(log, "est", cells, 1.5);
    REQUIRE(map.size() == 2);
    CHECK(map[0].position == cells[0]);
    CHECK(map[0].samples == 700);
    CHECK(map[0].force_mean.isApprox(Vec3(0.3, 0, 0), 1e-12));
    CHECK(map[0].force_std.x() == doctest::Approx(0.004).epsilon(1e-9));
    CHECK(map[0].torque_mean.z() == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(map[1].force_mean.isApprox(Vec3(0.1, 0.05, 0), 1e-12));
    CHECK(map[1].torque_std.z() == doctest::Approx(0.0004).epsilon(1e-9));

    std::ostringstream csv;
    write_wrench_map_csv(csv, map);
    std::istringstream in(csv.str());
    std::string header;
    std::getline(in, header);
    CHECK(header == "x,y,fx,fy,fz,tx,ty,tz,fx_std,fy_std,fz_std,tx_std,ty_std,tz_std,n");
    int lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 2);
}

TEST_CASE("wrench map: permutation of samples within a cell" * doctest::test_suite("properties"))
{
    const auto log = two_cell_log();
    const std::vector<Eigen::Vector2d> cells{{0, 0}, {1, 0}};
    const auto base = build_wrench_map(log, "est", cells, 1.5);
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 20; ++trial) {
        auto shuffled = log;
        // Shuffle estimate values among the post-settle rows of each segment.
        for (int seg = 0; seg < 2; ++seg) {
            std::vector<std::size_t> idx;
            double start = -1.0;
            for (std::size_t i = 0; i < log.rows.size(); ++i) {
                if (log.rows[i].segment != seg) continue;
                if (start < 0.0) start = log.rows[i].time_s;
                if (log.rows[i].time_s >= start + 1.5) idx.push_back(i);
            }
            std::vector<EstimateRecord> est;
            for (auto i : idx) est.push_back(log.rows[i].estimates[0]);
            std::shuffle(est.begin(), est.end(), gen);
            for (std::size_t j = 0; j < idx.size(); ++j) shuffled.rows[idx[j]].estimates[0] = est[j];
        }
        const auto map = build_wrench_map(shuffled, "est", cells, 1.5);
        for (std::size_t c = 0; c < 2; ++c) {
            CHECK(map[c].samples == base[c].samples);
            CHECK((map[c].force_mean - base[c].force_mean).norm() < 1e-12);
            CHECK((map[c].torque_std - base[c].torque_std).norm() < 1e-12);
        }
    }
}

TEST_CASE("wrench map: empty cells are reported")
{
    const auto log = two_cell_log();
    const std::vector<Eigen::Vector2d> cells{{0, 0}, {1, 0}};
    CHECK_THROWS_AS(build_wrench_map(log, "est", cells, 6.0), EmptyCell);
    const std::vector<Eigen::Vector2d> three{{0, 0}, {1, 0}, {2, 0}};
    CHECK_THROWS_AS(build_wrench_map(log, "est", three, 1.5), EmptyCell);
    CHECK_THROWS_AS(build_wrench_map(log, "nope", cells, 1.5), std::out_of_range);
}

TEST_CASE("wrench map of an ideal fan survey is antisymmetric in yaw torque")
{
    // Estimates equal to the field itself, sampled on a grid symmetric about the axis.
    FanModel fan;
    fan.position_m = Vec3(0, 0, 1);
    WaypointGrid grid;
    grid.origin_m = Vec3(0.5, -1.0, 1.0);
    const auto cells3 = grid.cells();
    TimeSeriesLog log;
    log.estimators = {"est"};
    const double dt = 0.005;
    int k = 0;
    std::vector<Eigen::Vector2d> cells;
    for (std::size_t seg = 0; seg < cells3.size(); ++seg) {
        cells.emplace_back(cells3[seg].head<2>());
        const Wrench w = fan.evaluate(cells3[seg], 0.0);
        for (int i = 0; i < 400; ++i) {
            log.rows.push_back(make_row(++k * dt, w.force, w.torque, w.force, w.torque, static_cast<int>(seg)));
        }
    }
    const auto map = build_wrench_map(log, "est", cells, 0.5);
    for (const auto& a : map) {
        for (const auto& b : map) {
            if (std::abs(a.position.x() - b.position.x()) < 1e-12 && std::abs(a.position.y() + b.position.y()) < 1e-12) {
                CHECK(std::abs(a.torque_mean.z() + b.torque_mean.z()) < 1e-12);
                CHECK(std::abs(a.force_mean.x() - b.force_mean.x()) < 1e-12);
            }
        }
    }
}
