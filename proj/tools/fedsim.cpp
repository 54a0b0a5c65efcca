// Command-line front end: run one experiment, sweep a grid, or summarize
// previous output directories.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedsim/fedsim.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Federated gradient-descent simulator with adaptive aggregation period"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    long long seed_override = -1;
    long long repeats_override = -1;

    CLI::App* run = app.add_subcommand("run", "Run one experiment config");
    run->add_option("config", config_path, "experiment config file")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seed", seed_override, "override run.seed");
    run->add_option("--repeats", repeats_override, "override run.repeats");

    std::string sweep_path;
    CLI::App* sweep = app.add_subcommand("sweep", "Run every combination of a sweep file");
    sweep->add_option("sweepfile", sweep_path, "sweep description file")->required();
    sweep->add_option("--out", out_dir, "output directory");

    std::string report_dir;
    CLI::App* report = app.add_subcommand("report", "Summarize an output directory");
    report->add_option("dir", report_dir, "directory with *.summary.csv files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            fedsim::KvConfig kv = fedsim::KvConfig::parse_file(config_path);
            if (seed_override >= 0) kv.set("run.seed", std::to_string(seed_override));
            if (repeats_override >= 0) kv.set("run.repeats", std::to_string(repeats_override));
            const fedsim::ExperimentConfig cfg = fedsim::ExperimentConfig::from_kv(kv);
            const fedsim::Summary s = fedsim::run_experiment(cfg, out_dir);
            std::cout << "experiment " << s.name << " (" << to_string(s.policy) << ", case "
                      << s.data_case << ", " << s.repeats << " runs)\n";
            std::cout << "  mean final loss : " << s.mean_final_loss << "\n";
            if (!std::isnan(s.mean_accuracy))
                std::cout << "  mean accuracy   : " << s.mean_accuracy << "\n";
            if (!std::isnan(s.mean_tau))
                std::cout << "  mean tau        : " << s.mean_tau << "\n";
            std::cout << "  mean iterations : " << s.mean_iterations << "\n";
            std::cout << "  output          : " << out_dir << "/" << s.name << ".*\n";
        } else if (sweep->parsed()) {
            const fedsim::SweepSpec spec = fedsim::parse_sweep_file(sweep_path);
            const auto all = fedsim::run_sweep(spec, out_dir);
            std::cout << all.size() << " experiments written to " << out_dir << "\n";
            std::cout << fedsim::report_directory(out_dir);
        } else if (report->parsed()) {
            std::cout << fedsim::report_directory(report_dir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
