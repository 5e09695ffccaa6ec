// Command-line front end: `fext run`, `fext presets`, `fext metrics`.

#include "fext/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    namespace h = fext::harness;

    CLI::App app{"External wrench estimation: quadrotor simulation harness"};
    app.require_subcommand(1);

    h::RunOptions run;
    std::string preset_dir = h::default_preset_dir().string();
    std::uint64_t seed = 0;
    std::string preset;
    std::string config_file;
    std::string estimators;
    std::string output_dir = "out";

    auto* run_cmd = app.add_subcommand("run", "Run a scenario and write timeseries.csv, summary.json, config_echo.ini");
    auto* preset_opt = run_cmd->add_option("--preset", preset, "Named preset (see `fext presets`)");
    auto* config_opt = run_cmd->add_option("--config", config_file, "INI config file")->check(CLI::ExistingFile);
    preset_opt->excludes(config_opt);
    auto* est_opt = run_cmd->add_option("--estimators", estimators, "usque | observer | both")
                        ->check(CLI::IsMember({"usque", "observer", "both"}));
    run_cmd->add_option("--out", output_dir, "Output directory")->capture_default_str();
    auto* seed_opt = run_cmd->add_option("--seed", seed, "Random seed (overrides scenario.seed)");
    run_cmd->add_option("--set", run.overrides, "Override, section.key=value (repeatable)");
    run_cmd->add_option("--preset-dir", preset_dir, "Preset directory")->capture_default_str();

    auto* presets_cmd = app.add_subcommand("presets", "List the named presets");
    presets_cmd->add_option("--preset-dir", preset_dir, "Preset directory")->capture_default_str();

    fext::MetricsOptions metrics_options;
    std::string csv;
    auto* metrics_cmd = app.add_subcommand("metrics", "Recompute metrics from a timeseries CSV");
    metrics_cmd->add_option("csv", csv, "timeseries.csv written by `fext run`")->required()->check(CLI::ExistingFile);
    metrics_cmd->add_option("--steady-window-s", metrics_options.steady_window_s, "Steady-state window")
        ->capture_default_str();
    metrics_cmd->add_option("--step-threshold", metrics_options.step_threshold, "Step detection threshold")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : h::kExitConfig;
    }

    if (*run_cmd) {
        if (*preset_opt) run.preset = preset;
        if (*config_opt) run.config_file = config_file;
        if (*est_opt) run.estimators = estimators;
        if (*seed_opt) run.seed = seed;
        run.output_dir = output_dir;
        run.preset_dir = preset_dir;
        return h::cli_run(run, std::cout, std::cerr);
    }
    if (*presets_cmd) {
        return h::cli_presets(preset_dir, std::cout, std::cerr);
    }
    return h::cli_metrics(csv, metrics_options, std::cout, std::cerr);
}
