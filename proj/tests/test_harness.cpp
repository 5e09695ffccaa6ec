#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fext/errors.hpp"
#include "fext/harness.hpp"
#include "fext/timeseries.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace fext;
using namespace fext::harness;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kPresets = FEXT_TEST_PRESET_DIR;

/// Fresh scratch directory per call, removed at the end of the test.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
        : path_(fs::temp_directory_path() / ("fext_test_" + tag + "_" + std::to_string(counter()++)))
    {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    static int& counter()
    {
        static int n = 0;
        return n;
    }
    fs::path path_;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct RunOutcome {
    int code;
    std::string out;
    std::string err;
};

RunOutcome run(RunOptions options)
{
    options.preset_dir = kPresets;
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli_run(options, out, err);
    return {code, out.str(), err.str()};
}

RunOptions preset(const std::string& name, const fs::path& out_dir, std::vector<std::string> overrides = {})
{
    RunOptions o;
    o.preset = name;
    o.output_dir = out_dir;
    o.overrides = std::move(overrides);
    return o;
}

}  // namespace

// ---------------------------------------------------------------- presets

TEST_CASE("presets: exactly the six experiment presets, each a checked-in file")
{
    const auto presets = list_presets(kPresets);
    REQUIRE(presets.size() == 6);
    const std::vector<std::string> expected{"fan-survey", "fan-track",  "hover",
                                            "mass-offset", "mass-step", "noise-comparison"};
    for (std::size_t i = 0; i < presets.size(); ++i) {
        CHECK(presets[i].name == expected[i]);
        CHECK_FALSE(presets[i].description.empty());
        CHECK(fs::is_regular_file(presets[i].path));
        CHECK_NOTHROW(build_experiment(load_preset(presets[i].name, kPresets)));
    }

    std::ostringstream out;
    std::ostringstream err;
    CHECK(cli_presets(kPresets, out, err) == kExitOk);
    int lines = 0;
    std::istringstream in(out.str());
    for (std::string line; std::getline(in, line);) ++lines;
    CHECK(lines == 6);

    CHECK(cli_presets(kPresets / "missing", out, err) == kExitConfig);
    CHECK_THROWS_AS(load_preset("no-such-preset", kPresets), ConfigError);
}

TEST_CASE("presets: fan survey grid")
{
    const Experiment e = build_experiment(load_preset("fan-survey", kPresets));
    const auto& grid = std::get<WaypointGrid>(e.scenario.trajectory);
    CHECK(grid.spacing_m == 0.5);
    CHECK(grid.dwell_s == 5.0);
    CHECK(grid.cells().size() == 25);
    CHECK(e.scenario.duration_s >= grid.duration_s());
    CHECK(std::holds_alternative<FanModel>(e.scenario.disturbance));
}

TEST_CASE("presets: experiment definitions")
{
    const Experiment step = build_experiment(load_preset("mass-step", kPresets));
    const auto& m = std::get<StepMass>(step.scenario.disturbance);
    CHECK(m.mass_kg == doctest::Approx(0.053));
    CHECK(m.offset_m.norm() == 0.0);

    const Experiment offset = build_experiment(load_preset("mass-offset", kPresets));
    CHECK(std::get<StepMass>(offset.scenario.disturbance).offset_m.norm() > 0.0);

    const Experiment cmp = build_experiment(load_preset("noise-comparison", kPresets));
    REQUIRE(cmp.comparison.size() == 2);
    CHECK(cmp.comparison[1].position_std_m == doctest::Approx(0.01));
    CHECK(cmp.comparison[1].attitude_std_rad == doctest::Approx(0.05));
    CHECK(cmp.estimators.usque);
    CHECK(cmp.estimators.observer);

    const Experiment track = build_experiment(load_preset("fan-track", kPresets));
    const auto& tf = std::get<TrackFan>(track.scenario.trajectory);
    const auto& fan = std::get<FanModel>(track.scenario.disturbance);
    const Vec3 rel = tf.start_m - fan.position_at(0.0);
    CHECK(rel.dot(fan.axis) == doctest::Approx(2.3));
    CHECK((rel - rel.dot(fan.axis) * fan.axis).norm() == doctest::Approx(0.8));
    CHECK(fan.velocity_mps.y() == doctest::Approx(0.1));
}

// ---------------------------------------------------------------- config

TEST_CASE("config: unknown keys and bad values are rejected")
{
    Config c = Config::defaults();
    std::istringstream unknown_key("[scenario]\nduration_s = 3\nbogus = 1\n");
    CHECK_THROWS_AS(c.merge_stream(unknown_key, "test"), ConfigError);
    std::istringstream unknown_section("[nope]\nx = 1\n");
    CHECK_THROWS_AS(c.merge_stream(unknown_section, "test"), ConfigError);
    CHECK_THROWS_AS(c.apply_override("vehicle.wings=2"), ConfigError);
    CHECK_THROWS_AS(c.apply_override("no_equals_sign"), ConfigError);

    c.apply_override("vehicle.mass_kg=abc");
    CHECK_THROWS_AS(build_experiment(c), ConfigError);
    c = Config::defaults();
    c.apply_override("vehicle.mass_kg=-1");
    CHECK_THROWS_AS(build_experiment(c), ConfigError);
    c = Config::defaults();
    c.apply_override("estimator.select=kalman");
    CHECK_THROWS_AS(build_experiment(c), ConfigError);
    c = Config::defaults();
    c.apply_override("scenario.sensor_rate_hz=300");
    CHECK_THROWS_AS(build_experiment(c), ConfigError);
}

TEST_CASE("config: comments, overrides and the INI echo round trip")
{
    Config c = Config::defaults();
    std::istringstream in("; comment\n# another\n[vehicle]\nmass_kg = 0.5\n");
    c.merge_stream(in, "test");
    CHECK(c.get_double("vehicle.mass_kg") == 0.5);
    c.apply_override("scenario.seed=99");
    CHECK(c.get_int("scenario.seed") == 99);

    std::ostringstream echo;
    c.write_ini(echo);
    Config back = Config::defaults();
    std::istringstream echo_in(echo.str());
    back.merge_stream(echo_in, "echo");
    CHECK(back.values() == c.values());
}

// ---------------------------------------------------------------- run

TEST_CASE("run: config errors exit with 2")
{
    TempDir dir("cfg");
    auto r = run(preset("hover", dir.path(), {"bogus.key=1"}));
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("error [harness_cli]") != std::string::npos);

    r = run(preset("does-not-exist", dir.path()));
    CHECK(r.code == kExitConfig);

    RunOptions both = preset("hover", dir.path());
    both.config_file = dir.path() / "x.ini";
    CHECK(run(both).code == kExitConfig);

    RunOptions neither;
    neither.output_dir = dir.path();
    CHECK(run(neither).code == kExitConfig);

    RunOptions bad_select = preset("hover", dir.path());
    bad_select.estimators = "nope";
    CHECK(run(bad_select).code == kExitConfig);
}

TEST_CASE("run: runtime failures exit with 1 and name the module")
{
    TempDir dir("rt");
    // Settling longer than the dwell leaves every map cell empty.
    auto r = run(preset("fan-survey", dir.path() / "a",
                        {"trajectory.grid_cells_x=1", "trajectory.grid_cells_y=1", "scenario.duration_s=6.5",
                         "metrics.wrench_map_settle_s=10"}));
    CHECK(r.code == kExitRuntime);
    CHECK(r.err.find("error [control_apps]") != std::string::npos);

    // Output "directory" that is a regular file.
    const fs::path blocker = dir.path() / "blocker";
    std::ofstream(blocker) << "x";
    r = run(preset("hover", blocker, {"scenario.duration_s=0.1"}));
    CHECK(r.code == kExitRuntime);
    CHECK(r.err.find("error [harness_cli]") != std::string::npos);
}

TEST_CASE("run: identical seeds give identical summaries" * doctest::test_suite("properties"))
{
    TempDir dir("det");
    for (const char* sub : {"a", "b"}) {
        RunOptions o = preset("hover", dir.path() / sub, {"scenario.duration_s=3"});
        o.seed = 1;
        REQUIRE(run(o).code == kExitOk);
    }
    CHECK(slurp(dir.path() / "a" / "summary.json") == slurp(dir.path() / "b" / "summary.json"));
    CHECK(slurp(dir.path() / "a" / "timeseries.csv") == slurp(dir.path() / "b" / "timeseries.csv"));
}

TEST_CASE("run: mass step summary and artifacts")
{
    TempDir dir("step");
    const auto r = run(preset("mass-step", dir.path()));
    REQUIRE(r.code == kExitOk);
    for (const char* f : {"summary.json", "timeseries.csv", "config_echo.ini"}) {
        CHECK(fs::is_regular_file(dir.path() / f));
    }
    const json s = json::parse(slurp(dir.path() / "summary.json"));
    CHECK(s["schema"] == kSummarySchema);
    CHECK(s["scenario"] == "mass-step");
    const auto& u = s["metrics"]["estimators"]["usque"];
    CHECK(u["rise_time_s"].is_number());
    CHECK(u["step_channel"] == "fz");
    CHECK(u["steady"]["fz"]["mean"].is_number());
    CHECK(u["steady"]["fz"]["std"].is_number());
    CHECK(u["steady"]["tz"]["std"].is_number());

    std::ifstream csv(dir.path() / "timeseries.csv");
    std::string first;
    std::getline(csv, first);
    CHECK(first == std::string("# ") + kTimeseriesSchema);

    // The metrics subcommand recomputes the same numbers from the CSV.
    std::ostringstream out;
    std::ostringstream err;
    REQUIRE(cli_metrics(dir.path() / "timeseries.csv", MetricsOptions{}, out, err) == kExitOk);
    const json m = json::parse(out.str());
    const auto& mu = m["metrics"]["estimators"]["usque"];
    CHECK(mu["rise_time_s"].get<double>() == doctest::Approx(u["rise_time_s"].get<double>()).epsilon(1e-8));
    CHECK(mu["steady"]["fz"]["mean"].get<double>()
          == doctest::Approx(u["steady"]["fz"]["mean"].get<double>()).epsilon(1e-8));
    CHECK(cli_metrics(dir.path() / "missing.csv", MetricsOptions{}, out, err) == kExitConfig);
}

TEST_CASE("run: the echoed config reproduces the run" * doctest::test_suite("properties"))
{
    TempDir dir("echo");
    RunOptions first = preset("mass-offset", dir.path() / "a", {"scenario.duration_s=6", "noise.force_ext_std_n=0.001"});
    first.seed = 12345;
    first.estimators = "usque";
    REQUIRE(run(first).code == kExitOk);

    RunOptions again;
    again.config_file = dir.path() / "a" / "config_echo.ini";
    again.output_dir = dir.path() / "b";
    REQUIRE(run(again).code == kExitOk);
    CHECK(slurp(dir.path() / "a" / "timeseries.csv") == slurp(dir.path() / "b" / "timeseries.csv"));
    CHECK(slurp(dir.path() / "a" / "summary.json") == slurp(dir.path() / "b" / "summary.json"));
}

TEST_CASE("run: noise comparison reports both levels")
{
    TempDir dir("cmp");
    const auto r = run(preset("noise-comparison", dir.path(), {"scenario.duration_s=8"}));
    REQUIRE(r.code == kExitOk);
    CHECK(r.out.find("low") != std::string::npos);
    CHECK(r.out.find("high") != std::string::npos);
    const json s = json::parse(slurp(dir.path() / "summary.json"));
    REQUIRE(s["comparison"].size() == 2);
    CHECK(s["comparison"][0]["level"] == "low");
    CHECK(s["comparison"][1]["level"] == "high");
    CHECK(s["comparison"][1]["position_std_m"].get<double>() == doctest::Approx(0.01));
    for (const auto& level : s["comparison"]) {
        CHECK(level["metrics"]["estimators"].contains("usque"));
        CHECK(level["metrics"]["estimators"].contains("observer"));
        CHECK(fs::is_regular_file(dir.path() / level["timeseries"].get<std::string>()));
    }
}

TEST_CASE("run: grid survey writes a wrench map")
{
    TempDir dir("grid");
    const auto r = run(preset("fan-survey", dir.path(),
                              {"trajectory.grid_cells_x=2", "trajectory.grid_cells_y=1", "scenario.duration_s=13"}));
    REQUIRE(r.code == kExitOk);
    const json s = json::parse(slurp(dir.path() / "summary.json"));
    CHECK(s["wrench_map"]["cells"] == 2);
    std::istringstream map(slurp(dir.path() / "wrench_map.csv"));
    int lines = 0;
    for (std::string line; std::getline(map, line);) ++lines;
    CHECK(lines == 3);
}

// ---------------------------------------------------------------- timeseries

TEST_CASE("timeseries CSV round trip")
{
    Scenario s;
    s.duration_s = 0.5;
    const auto result = run_scenario(s, EstimatorSettings{});
    std::ostringstream out;
    result.log.write_csv(out);
    std::istringstream in(out.str());
    const auto back = TimeSeriesLog::read_csv(in);
    REQUIRE(back.rows.size() == result.log.rows.size());
    CHECK(back.estimators == result.log.estimators);
    for (std::size_t i = 0; i < back.rows.size(); ++i) {
        const auto& a = result.log.rows[i];
        const auto& b = back.rows[i];
        CHECK(b.time_s == doctest::Approx(a.time_s).epsilon(1e-12));
        CHECK(b.segment == a.segment);
        CHECK((b.truth - a.truth).cwiseAbs().maxCoeff() <= 1e-11 * std::max(1.0, a.truth.cwiseAbs().maxCoeff()));
        CHECK(b.has_measurement == a.has_measurement);
        for (std::size_t e = 0; e < a.estimates.size(); ++e) {
            const auto& ma = a.estimates[e].mean;
            const auto& mb = b.estimates[e].mean;
            for (Eigen::Index j = 0; j < ma.size(); ++j) {
                if (std::isnan(ma(j))) {
                    CHECK(std::isnan(mb(j)));
                } else {
                    CHECK(std::abs(mb(j) - ma(j)) <= 1e-11 * std::max(1.0, std::abs(ma(j))));
                }
            }
        }
    }
    // Observer columns it cannot provide stay NaN.
    CHECK(std::isnan(back.rows[0].estimates[1].cov_diag(0)));

    std::istringstream wrong("# something else\n");
    CHECK_THROWS_AS(TimeSeriesLog::read_csv(wrong), std::runtime_error);
    std::string truncated = out.str();
    truncated.resize(truncated.rfind(','));
    std::istringstream bad(truncated);
    CHECK_THROWS_AS(TimeSeriesLog::read_csv(bad), std::runtime_error);
}
