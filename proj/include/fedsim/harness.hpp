#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "fedsim/baselines.hpp"
#include "fedsim/config.hpp"
#include "fedsim/data.hpp"
#include "fedsim/protocol.hpp"
#include "fedsim/trace.hpp"

namespace fedsim {

// Final metrics of one repeat. Losses are exact full-training-set values
// recomputed at the end (the protocol may internally work with mini-batch
// losses).
struct RunOutcome {
    int run = 0;
    std::uint64_t seed = 0;
    double final_loss = std::numeric_limits<double>::quiet_NaN();
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double mean_tau = std::numeric_limits<double>::quiet_NaN();
    long long iterations = 0;
    long long rounds = 0;
    std::vector<double> consumed;
    std::vector<TraceRecord> trace;
};

struct Summary {
    std::string name;
    PolicyKind policy = PolicyKind::adaptive;
    int data_case = 1;
    int repeats = 0;
    double mean_final_loss = std::numeric_limits<double>::quiet_NaN();
    double mean_accuracy = std::numeric_limits<double>::quiet_NaN();
    double mean_tau = std::numeric_limits<double>::quiet_NaN();
    double mean_iterations = 0.0;
    std::vector<double> mean_consumed;
    std::vector<RunOutcome> runs;
};

namespace detail {

inline ParamVector initial_parameter(const ExperimentConfig& cfg, int dim,
                                     std::uint64_t run_seed) {
    ParamVector w0(static_cast<std::size_t>(dim), 0.0);
    if (cfg.init == InitKind::gaussian) {
        Rng rng(derive_seed(run_seed, 0x1217));
        for (double& v : w0) v = rng.normal(0.0, cfg.init_sigma);
    }
    return w0;
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace detail

inline void write_summary_csv(const std::string& path, const Summary& s);
inline void write_summary_json(const std::string& path, const Summary& s);

// Load (or synthesize) the dataset named by the config. Pure function of the
// config: repeats share one dataset the way they would share a real one.
inline Dataset load_experiment_data(const ExperimentConfig& cfg) {
    if (cfg.synthetic)
        return generate_synthetic(cfg.model.kind, cfg.n_samples, cfg.dim, cfg.model.clusters,
                                  cfg.seed);
    return load_csv(cfg.csv_path, cfg.csv_schema);
}

// Execute `repeats` independent runs with derived seeds and write one trace
// file per run plus summary.csv / summary.json next to them.
inline Summary run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    const Dataset full = load_experiment_data(cfg);
    auto [train, test] = train_test_split(full, cfg.train_fraction, cfg.seed);
    LossModel model = cfg.model;
    model.features = train.features();
    model.validate();

    TraceTelemetry telemetry;
    if (model.kind == ModelKind::squared_svm && !test.samples.empty())
        telemetry.test_set = &test;

    Summary summary;
    summary.name = cfg.name;
    summary.policy = cfg.policy;
    summary.data_case = cfg.data_case;
    summary.repeats = cfg.repeats;

    std::vector<double> losses, accuracies, taus, iterations;
    std::vector<std::vector<double>> consumed_by_type(cfg.resources.size());

    for (int r = 0; r < cfg.repeats; ++r) {
        const std::uint64_t run_seed = derive_seed(cfg.seed, 0xF1F0 + static_cast<std::uint64_t>(r));
        RunOutcome outcome;
        outcome.run = r;
        outcome.seed = run_seed;

        if (cfg.policy == PolicyKind::centralized) {
            CentralizedConfig ccfg;
            ccfg.eta = cfg.control.eta;
            ccfg.mode = cfg.mode;
            ccfg.batch_size = cfg.batch_size;
            ccfg.resources = cfg.resources;
            ccfg.max_iterations = cfg.max_iterations;
            ccfg.w0 = detail::initial_parameter(cfg, model.param_dim(), run_seed);
            const CentralizedResult res = run_centralized(ccfg, train, model, run_seed, telemetry);
            NodePartition pooled{0, train.samples};
            std::vector<NodePartition> view{pooled};
            outcome.final_loss = global_loss(model, res.w_final, view);
            if (telemetry.test_set)
                outcome.accuracy = compute_accuracy(model, res.w_final, test);
            outcome.iterations = res.iterations;
            outcome.rounds = res.iterations;
            outcome.consumed = res.consumed;
            outcome.trace = res.trace;
        } else {
            const auto parts =
                partition(train, cfg.nodes, cfg.data_case, derive_seed(run_seed, 0xD157));
            if (cfg.policy == PolicyKind::async) {
                AsyncConfig acfg;
                acfg.eta = cfg.control.eta;
                acfg.mode = cfg.mode;
                acfg.batch_size = cfg.batch_size;
                acfg.speed_factors = cfg.async_speeds;
                acfg.resources = cfg.resources;
                acfg.w0 = detail::initial_parameter(cfg, model.param_dim(), run_seed);
                const AsyncResult res = run_async(acfg, parts, model, run_seed, telemetry);
                outcome.final_loss = global_loss(model, res.w_final, parts);
                if (telemetry.test_set)
                    outcome.accuracy = compute_accuracy(model, res.w_final, test);
                outcome.iterations = res.pushes;
                outcome.rounds = res.pushes;
                outcome.consumed.assign(cfg.resources.size(), res.clock);
                outcome.trace = res.trace;
            } else {
                ProtocolConfig pcfg;
                pcfg.policy = cfg.policy == PolicyKind::adaptive ? TauPolicy::adaptive
                                                                 : TauPolicy::fixed;
                pcfg.fixed_tau = cfg.fixed_tau;
                pcfg.mode = cfg.mode;
                pcfg.batch_size = cfg.batch_size;
                pcfg.control = cfg.control;
                pcfg.resources = cfg.resources;
                pcfg.max_iterations = cfg.max_iterations;
                pcfg.w0 = detail::initial_parameter(cfg, model.param_dim(), run_seed);
                const ProtocolResult res = run_protocol(pcfg, parts, model, run_seed, telemetry);
                outcome.final_loss = global_loss(model, res.w_f, parts);
                if (telemetry.test_set)
                    outcome.accuracy = compute_accuracy(model, res.w_f, test);
                outcome.mean_tau = res.mean_tau;
                outcome.iterations = res.iterations;
                outcome.rounds = res.rounds;
                outcome.consumed = res.consumed;
                outcome.trace = res.trace;
            }
        }

        losses.push_back(outcome.final_loss);
        if (!std::isnan(outcome.accuracy)) accuracies.push_back(outcome.accuracy);
        if (!std::isnan(outcome.mean_tau)) taus.push_back(outcome.mean_tau);
        iterations.push_back(static_cast<double>(outcome.iterations));
        for (std::size_t m = 0; m < outcome.consumed.size(); ++m)
            consumed_by_type[m].push_back(outcome.consumed[m]);
        summary.runs.push_back(std::move(outcome));
    }

    summary.mean_final_loss = detail::mean_of(losses);
    summary.mean_accuracy = detail::mean_of(accuracies);
    summary.mean_tau = detail::mean_of(taus);
    summary.mean_iterations = detail::mean_of(iterations);
    for (auto& v : consumed_by_type) summary.mean_consumed.push_back(detail::mean_of(v));

    if (!out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        for (const RunOutcome& run : summary.runs)
            write_trace_csv(out_dir + "/" + cfg.name + ".run" + std::to_string(run.run) +
                                ".trace.csv",
                            run.trace, cfg.resources.size());
        write_summary_csv(out_dir + "/" + cfg.name + ".summary.csv", summary);
        write_summary_json(out_dir + "/" + cfg.name + ".summary.json", summary);
    }
    return summary;
}

inline void write_summary_csv(const std::string& path, const Summary& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("write_summary_csv: cannot open " + path);
    const std::size_t m_count = s.mean_consumed.size();
    out << "name,policy,case,run,seed,final_loss,accuracy,mean_tau,iterations,rounds";
    for (std::size_t m = 0; m < m_count; ++m) out << ",consumed_" << m;
    out << "\n";
    for (const RunOutcome& r : s.runs) {
        out << s.name << "," << to_string(s.policy) << "," << s.data_case << "," << r.run << ","
            << r.seed << "," << detail::fmt_double(r.final_loss) << ","
            << detail::fmt_double(r.accuracy) << "," << detail::fmt_double(r.mean_tau) << ","
            << r.iterations << "," << r.rounds;
        for (std::size_t m = 0; m < m_count; ++m)
            out << "," << detail::fmt_double(m < r.consumed.size() ? r.consumed[m] : 0.0);
        out << "\n";
    }
}

inline void write_summary_json(const std::string& path, const Summary& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("write_summary_json: cannot open " + path);
    out << "{\n";
    out << "  \"name\": \"" << s.name << "\",\n";
    out << "  \"policy\": \"" << to_string(s.policy) << "\",\n";
    out << "  \"case\": " << s.data_case << ",\n";
    out << "  \"repeats\": " << s.repeats << ",\n";
    out << "  \"mean_final_loss\": " << detail::fmt_double(s.mean_final_loss) << ",\n";
    out << "  \"mean_accuracy\": " << detail::fmt_double(s.mean_accuracy) << ",\n";
    out << "  \"mean_tau\": " << detail::fmt_double(s.mean_tau) << ",\n";
    out << "  \"mean_iterations\": " << detail::fmt_double(s.mean_iterations) << ",\n";
    out << "  \"mean_consumed\": [";
    for (std::size_t m = 0; m < s.mean_consumed.size(); ++m)
        out << (m ? ", " : "") << detail::fmt_double(s.mean_consumed[m]);
    out << "]\n}\n";
}

// Run every combination of a sweep file; returns the summaries in the order
// the combinations were generated.
inline std::vector<Summary> run_sweep(const SweepSpec& spec, const std::string& out_dir) {
    std::vector<std::size_t> index(spec.axes.size(), 0);
    std::vector<Summary> all;
    bool done_all = false;
    while (!done_all) {
        KvConfig kv = KvConfig::parse_file(spec.base_path);
        for (const auto& [k, v] : spec.overrides) kv.set(k, v);
        std::string suffix;
        for (std::size_t a = 0; a < spec.axes.size(); ++a) {
            kv.set(spec.axes[a].key, spec.axes[a].values[index[a]]);
            std::string short_key = spec.axes[a].key;
            const auto dot = short_key.rfind('.');
            if (dot != std::string::npos) short_key = short_key.substr(dot + 1);
            suffix += "__" + short_key + "=" + spec.axes[a].values[index[a]];
        }
        ExperimentConfig cfg = ExperimentConfig::from_kv(kv);
        cfg.name += suffix;
        all.push_back(run_experiment(cfg, out_dir));

        // Next point of the cartesian product, last axis fastest.
        if (spec.axes.empty()) break;
        std::size_t a = spec.axes.size();
        while (a > 0) {
            --a;
            if (++index[a] < spec.axes[a].values.size()) break;
            index[a] = 0;
            if (a == 0) done_all = true;
        }
    }

    if (!out_dir.empty()) {
        std::ofstream out(out_dir + "/sweep_summary.csv", std::ios::binary);
        const std::size_t m_count = all.empty() ? 0 : all.front().mean_consumed.size();
        out << "name,policy,case,repeats,mean_final_loss,mean_accuracy,mean_tau,mean_iterations";
        for (std::size_t m = 0; m < m_count; ++m) out << ",mean_consumed_" << m;
        out << "\n";
        for (const Summary& s : all) {
            out << s.name << "," << to_string(s.policy) << "," << s.data_case << ","
                << s.repeats << "," << detail::fmt_double(s.mean_final_loss) << ","
                << detail::fmt_double(s.mean_accuracy) << "," << detail::fmt_double(s.mean_tau)
                << "," << detail::fmt_double(s.mean_iterations);
            for (std::size_t m = 0; m < m_count; ++m)
                out << "," << detail::fmt_double(m < s.mean_consumed.size() ? s.mean_consumed[m]
                                                                            : 0.0);
            out << "\n";
        }
    }
    return all;
}

// Aggregate the summary CSVs found in a directory into a printable table.
inline std::string report_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > 12 && name.substr(name.size() - 12) == ".summary.csv")
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());

    std::ostringstream table;
    table << std::left << std::setw(44) << "experiment" << std::setw(12) << "policy"
          << std::setw(6) << "case" << std::setw(8) << "runs" << std::setw(14) << "loss"
          << std::setw(12) << "accuracy" << std::setw(10) << "tau" << "\n";
    for (const std::string& f : files) {
        std::ifstream in(f);
        std::string line;
        std::getline(in, line); // header
        std::string name, policy;
        int data_case = 0;
        int rows = 0;
        double loss = 0.0, acc = 0.0, tau = 0.0;
        int acc_rows = 0, tau_rows = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::string field;
            std::vector<std::string> fields;
            while (std::getline(ss, field, ',')) fields.push_back(field);
            if (fields.size() < 10) continue;
            name = fields[0];
            policy = fields[1];
            data_case = std::stoi(fields[2]);
            ++rows;
            loss += std::stod(fields[5]);
            const double a = detail::parse_double(fields[6], "accuracy");
            if (!std::isnan(a)) {
                acc += a;
                ++acc_rows;
            }
            const double t = detail::parse_double(fields[7], "mean_tau");
            if (!std::isnan(t)) {
                tau += t;
                ++tau_rows;
            }
        }
        if (rows == 0) continue;
        table << std::left << std::setw(44) << name << std::setw(12) << policy << std::setw(6)
              << data_case << std::setw(8) << rows << std::setw(14) << loss / rows;
        if (acc_rows > 0)
            table << std::setw(12) << acc / acc_rows;
        else
            table << std::setw(12) << "-";
        if (tau_rows > 0)
            table << std::setw(10) << tau / tau_rows;
        else
            table << std::setw(10) << "-";
        table << "\n";
    }
    return table.str();
}

} // namespace fedsim
