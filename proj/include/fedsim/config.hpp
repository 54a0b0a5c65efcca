#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/control.hpp"
#include "fedsim/data.hpp"
#include "fedsim/engine.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/models.hpp"
#include "fedsim/protocol.hpp"
#include "fedsim/resources.hpp"

namespace fedsim {

// Flat `key = value` text with dotted key paths, '#' comments and blank
// lines. One experiment per file.
class KvConfig {
public:
    static KvConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw io_error("config: cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_text(ss.str(), path);
    }

    static KvConfig parse_text(const std::string& text, const std::string& origin = "<text>") {
        KvConfig cfg;
        std::istringstream in(text);
        std::string line;
        long long lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = trim(strip_comment(line));
            if (t.empty()) continue;
            const std::size_t eq = t.find('=');
            if (eq == std::string::npos)
                throw config_error(origin + ":" + std::to_string(lineno) +
                                   ": expected 'key = value'");
            const std::string key = trim(t.substr(0, eq));
            const std::string value = trim(t.substr(eq + 1));
            if (key.empty())
                throw config_error(origin + ":" + std::to_string(lineno) + ": empty key");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        used_.insert(key);
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        used_.insert(key);
        double v = 0.0;
        const std::string& s = it->second;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            throw config_error(key + ": expected a number, got '" + s + "'");
        return v;
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        used_.insert(key);
        long long v = 0;
        const std::string& s = it->second;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            throw config_error(key + ": expected an integer, got '" + s + "'");
        return v;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        used_.insert(key);
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw config_error(key + ": expected true/false, got '" + it->second + "'");
    }

    std::vector<double> get_double_list(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return {};
        used_.insert(key);
        std::vector<double> out;
        std::string item;
        std::istringstream ss(it->second);
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            double v = 0.0;
            auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
            if (ec != std::errc{} || p != item.data() + item.size())
                throw config_error(key + ": bad list entry '" + item + "'");
            out.push_back(v);
        }
        return out;
    }

    // Typo guard: every present key must have been consumed by the schema.
    void check_all_used() const {
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) throw config_error("unknown config key '" + k + "'");
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

private:
    static std::string strip_comment(const std::string& s) {
        const auto pos = s.find('#');
        return pos == std::string::npos ? s : s.substr(0, pos);
    }

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

enum class PolicyKind { adaptive, fixed, centralized, async };

inline const char* to_string(PolicyKind p) {
    switch (p) {
        case PolicyKind::adaptive: return "adaptive";
        case PolicyKind::fixed: return "fixed";
        case PolicyKind::centralized: return "centralized";
        case PolicyKind::async: return "async";
    }
    return "?";
}

enum class InitKind { zero, gaussian };

// Everything one experiment needs: model, data source, partitioning case,
// execution mode, tau policy, control knobs, resource model, repeats, seed.
struct ExperimentConfig {
    std::string name = "experiment";
    LossModel model;

    bool synthetic = true;
    int n_samples = 1000;
    int dim = 10;
    std::string csv_path;
    CsvSchema csv_schema;

    int nodes = 5;
    int data_case = 1;
    double train_fraction = 0.8;

    TrainMode mode = TrainMode::sgd;
    std::size_t batch_size = 32;
    InitKind init = InitKind::zero;
    double init_sigma = 1.0;
    long long max_iterations = 0;

    PolicyKind policy = PolicyKind::adaptive;
    long long fixed_tau = 10;
    std::vector<double> async_speeds;

    ControlConfig control;
    std::vector<ResourceType> resources;

    int repeats = 1;
    std::uint64_t seed = 1;

    static ExperimentConfig from_kv(const KvConfig& kv);
    void validate() const;
};

inline ExperimentConfig ExperimentConfig::from_kv(const KvConfig& kv) {
    ExperimentConfig cfg;
    cfg.name = kv.get_string("name", cfg.name);

    const std::string kind = kv.get_string("model.kind", "svm");
    if (kind == "svm") cfg.model.kind = ModelKind::squared_svm;
    else if (kind == "linreg") cfg.model.kind = ModelKind::linear_regression;
    else if (kind == "kmeans") cfg.model.kind = ModelKind::k_means;
    else throw config_error("model.kind: expected svm|linreg|kmeans, got '" + kind + "'");
    cfg.model.lambda = kv.get_double("model.lambda", cfg.model.lambda);
    cfg.model.clusters = static_cast<int>(kv.get_int("model.clusters", 4));

    const std::string source = kv.get_string("data.source", "synthetic");
    if (source == "synthetic") {
        cfg.synthetic = true;
    } else if (source == "csv") {
        cfg.synthetic = false;
        cfg.csv_path = kv.get_string("data.csv.path", "");
        if (cfg.csv_path.empty()) throw config_error("data.csv.path: required for csv source");
        cfg.csv_schema.features = static_cast<int>(kv.get_int("data.csv.dim", 0));
        cfg.csv_schema.has_label = kv.get_bool("data.csv.has_label", true);
        cfg.csv_schema.has_header = kv.get_bool("data.csv.has_header", false);
    } else {
        throw config_error("data.source: expected synthetic|csv, got '" + source + "'");
    }
    cfg.n_samples = static_cast<int>(kv.get_int("data.n", cfg.n_samples));
    cfg.dim = static_cast<int>(kv.get_int("data.dim", cfg.dim));
    cfg.nodes = static_cast<int>(kv.get_int("data.nodes", cfg.nodes));
    cfg.data_case = static_cast<int>(kv.get_int("data.case", cfg.data_case));
    cfg.train_fraction = kv.get_double("train.split", cfg.train_fraction);

    const std::string mode = kv.get_string("train.mode", "sgd");
    if (mode == "dgd") cfg.mode = TrainMode::dgd;
    else if (mode == "sgd") cfg.mode = TrainMode::sgd;
    else throw config_error("train.mode: expected dgd|sgd, got '" + mode + "'");
    cfg.batch_size = static_cast<std::size_t>(kv.get_int("train.batch_size", 32));
    cfg.control.eta = kv.get_double("train.eta", cfg.control.eta);
    cfg.max_iterations = kv.get_int("train.max_iterations", 0);
    const std::string init = kv.get_string("train.init", "zero");
    if (init == "zero") cfg.init = InitKind::zero;
    else if (init == "gaussian") cfg.init = InitKind::gaussian;
    else throw config_error("train.init: expected zero|gaussian, got '" + init + "'");
    cfg.init_sigma = kv.get_double("train.init_sigma", cfg.init_sigma);

    const std::string policy = kv.get_string("policy.kind", "adaptive");
    if (policy == "adaptive") cfg.policy = PolicyKind::adaptive;
    else if (policy == "fixed") cfg.policy = PolicyKind::fixed;
    else if (policy == "centralized") cfg.policy = PolicyKind::centralized;
    else if (policy == "async") cfg.policy = PolicyKind::async;
    else throw config_error("policy.kind: expected adaptive|fixed|centralized|async");
    cfg.fixed_tau = kv.get_int("policy.tau", cfg.fixed_tau);
    cfg.async_speeds = kv.get_double_list("policy.async_speeds");

    cfg.control.phi = kv.get_double("control.phi", cfg.control.phi);
    cfg.control.gamma = kv.get_double("control.gamma", cfg.control.gamma);
    cfg.control.tau_max = kv.get_int("control.tau_max", cfg.control.tau_max);

    const int m_count = static_cast<int>(kv.get_int("resources.count", 1));
    if (m_count < 1) throw config_error("resources.count: must be >= 1");
    for (int m = 0; m < m_count; ++m) {
        const std::string prefix = "resources." + std::to_string(m) + ".";
        ResourceType r;
        const std::string preset = kv.get_string(prefix + "preset", "none");
        if (preset == "sgd-distributed") r = presets::sgd_distributed();
        else if (preset == "sgd-centralized") r = presets::sgd_centralized();
        else if (preset == "dgd-case1") r = presets::dgd_distributed(1);
        else if (preset == "dgd-case2") r = presets::dgd_distributed(2);
        else if (preset == "dgd-case3") r = presets::dgd_distributed(3);
        else if (preset == "dgd-case4") r = presets::dgd_distributed(4);
        else if (preset != "none")
            throw config_error(prefix + "preset: unknown preset '" + preset + "'");
        r.name = kv.get_string(prefix + "name", r.name);
        const std::string sem = kv.get_string(prefix + "semantics", "time");
        if (sem == "time") r.semantics = CostSemantics::time_max;
        else if (sem == "energy") r.semantics = CostSemantics::energy_sum;
        else throw config_error(prefix + "semantics: expected time|energy");
        r.mu_local = kv.get_double(prefix + "mu_local", r.mu_local);
        r.sigma_local = kv.get_double(prefix + "sigma_local", r.sigma_local);
        r.mu_global = kv.get_double(prefix + "mu_global", r.mu_global);
        r.sigma_global = kv.get_double(prefix + "sigma_global", r.sigma_global);
        r.budget = kv.get_double(prefix + "budget", r.budget);
        cfg.resources.push_back(r);
    }

    cfg.repeats = static_cast<int>(kv.get_int("run.repeats", cfg.repeats));
    cfg.seed = static_cast<std::uint64_t>(kv.get_int("run.seed", 1));

    kv.check_all_used();
    cfg.validate();
    return cfg;
}

inline void ExperimentConfig::validate() const {
    if (name.empty()) throw config_error("name: must not be empty");
    if (synthetic) {
        if (n_samples < 2) throw config_error("data.n: must be >= 2");
        if (dim < 1) throw config_error("data.dim: must be >= 1");
    }
    if (nodes < 1) throw config_error("data.nodes: must be >= 1");
    if (data_case < 1 || data_case > 4) throw config_error("data.case: must be 1..4");
    if (!(train_fraction > 0.0) || train_fraction > 1.0)
        throw config_error("train.split: must be in (0, 1]");
    if (mode == TrainMode::sgd && batch_size < 1)
        throw config_error("train.batch_size: must be >= 1");
    if (policy == PolicyKind::fixed && fixed_tau < 1)
        throw config_error("policy.tau: must be >= 1");
    if (policy == PolicyKind::async) {
        if (async_speeds.empty())
            throw config_error("policy.async_speeds: required for async policy");
        if (static_cast<int>(async_speeds.size()) != nodes)
            throw config_error("policy.async_speeds: need exactly data.nodes entries");
        for (double s : async_speeds)
            if (!(s > 0.0)) throw config_error("policy.async_speeds: entries must be > 0");
    }
    if (repeats < 1) throw config_error("run.repeats: must be >= 1");
    control.validate();
    if (resources.empty()) throw config_error("resources: need at least one type");
    for (const auto& r : resources) r.validate();
    if (model.kind == ModelKind::squared_svm && !(model.lambda > 0.0))
        throw config_error("model.lambda: must be > 0");
    if (model.kind == ModelKind::k_means && model.clusters < 1)
        throw config_error("model.clusters: must be >= 1");
}

// ---------------------------------------------------------------------------
// Sweep files: a base experiment plus override axes.
//
//   base = configs/svm_sgd.cfg
//   set run.repeats = 15
//   sweep policy.tau = 1 2 5 10 20 50 100
//   sweep data.case = 1 2
//
// Every combination of sweep values yields one experiment (cartesian
// product, axes vary in file order).

struct SweepAxis {
    std::string key;
    std::vector<std::string> values;
};

struct SweepSpec {
    std::string base_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::vector<SweepAxis> axes;
};

inline SweepSpec parse_sweep_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("sweep: cannot open " + path);
    SweepSpec spec;
    std::string line;
    long long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = KvConfig::trim(line.substr(0, line.find('#')));
        if (t.empty()) continue;
        const auto fail = [&](const std::string& what) {
            throw config_error(path + ":" + std::to_string(lineno) + ": " + what);
        };
        if (t.rfind("base", 0) == 0) {
            const auto eq = t.find('=');
            if (eq == std::string::npos) fail("expected 'base = <config path>'");
            spec.base_path = KvConfig::trim(t.substr(eq + 1));
        } else if (t.rfind("set ", 0) == 0) {
            const auto eq = t.find('=');
            if (eq == std::string::npos) fail("expected 'set <key> = <value>'");
            spec.overrides.emplace_back(KvConfig::trim(t.substr(4, eq - 4)),
                                        KvConfig::trim(t.substr(eq + 1)));
        } else if (t.rfind("sweep ", 0) == 0) {
            const auto eq = t.find('=');
            if (eq == std::string::npos) fail("expected 'sweep <key> = v1 v2 ...'");
            SweepAxis axis;
            axis.key = KvConfig::trim(t.substr(6, eq - 6));
            std::istringstream vs(t.substr(eq + 1));
            std::string v;
            while (vs >> v) axis.values.push_back(v);
            if (axis.values.empty()) fail("sweep axis needs at least one value");
            spec.axes.push_back(std::move(axis));
        } else {
            fail("expected base/set/sweep directive");
        }
    }
    if (spec.base_path.empty()) throw config_error(path + ": missing 'base = <config path>'");
    return spec;
}

} // namespace fedsim
