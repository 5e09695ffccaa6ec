#pragma once

// Configuration loading, experiment assembly and the command implementations
// behind the `fext` executable.
//
// Configs are INI files (full-line ';' or '#' comments). Every key is known in
// advance; unknown sections or keys are rejected. Resolution order: built-in
// defaults, then the preset or config file, then `section.key=value` overrides.

#include "fext/control_apps.hpp"
#include "fext/simulator.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fext::harness {

inline constexpr const char* kSummarySchema = "fext-summary v1";

/// Fully resolved key/value configuration, keyed "section.key".
class Config {
public:
    /// All keys at their built-in defaults.
    static Config defaults();

    /// Merge an INI file over the current values. Throws ConfigError.
    void merge_file(const std::filesystem::path& path);
    void merge_stream(std::istream& in, const std::string& origin);
    /// Apply one "section.key=value" override. Throws ConfigError.
    void apply_override(const std::string& assignment);
    void set(const std::string& key, const std::string& value);

    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    long get_int(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    /// INI text with every key, grouped by section.
    void write_ini(std::ostream& out) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

struct NoiseLevel {
    std::string name;
    double position_std_m{0.0};
    double attitude_std_rad{0.0};
};

struct Experiment {
    std::string name;
    Scenario scenario;
    EstimatorSettings estimators;
    MetricsOptions metrics;
    double wrench_map_settle_s{1.5};
    std::string wrench_map_estimator{kUsqueId};
    /// Empty for a single run; otherwise one run per level with both estimators.
    std::vector<NoiseLevel> comparison;
};

/// Throws ConfigError on bad values or violated invariants.
Experiment build_experiment(const Config& config);

/// Sets both the estimator measurement covariances and the sensor noise.
void set_measurement_noise(Scenario& scenario, double position_std_m, double attitude_std_rad);

struct PresetInfo {
    std::string name;
    std::string description;
    std::filesystem::path path;
};

std::filesystem::path default_preset_dir();
/// Presets found in `dir`, sorted by name.
std::vector<PresetInfo> list_presets(const std::filesystem::path& dir = default_preset_dir());
/// Defaults merged with the named preset. Throws ConfigError if it does not exist.
Config load_preset(const std::string& name, const std::filesystem::path& dir = default_preset_dir());

nlohmann::json metrics_json(const MetricsSummary& summary);

struct RunOptions {
    std::optional<std::string> preset;
    std::optional<std::filesystem::path> config_file;
    std::optional<std::string> estimators;  ///< usque | observer | both
    std::filesystem::path output_dir{"out"};
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
    std::filesystem::path preset_dir{default_preset_dir()};
};

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Writes timeseries.csv, summary.json, config_echo.ini and, for grid surveys,
/// wrench_map.csv into the output directory. Diagnostics go to `err` as
/// "error [<module>]: <message>".
int cli_run(const RunOptions& options, std::ostream& out, std::ostream& err);

int cli_presets(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);

/// Recomputes the metrics of a timeseries CSV and prints them as JSON.
int cli_metrics(const std::filesystem::path& csv, const MetricsOptions& options, std::ostream& out,
                std::ostream& err);

}  // namespace fext::harness
