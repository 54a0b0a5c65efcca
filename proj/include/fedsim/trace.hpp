#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/errors.hpp"

namespace fedsim {

// One row of per-aggregation-round telemetry. `loss` is the global loss the
// aggregator computed this round, which refers to the parameter broadcast at
// the start of the round (the evaluation lags by one round). Per-resource
// vectors run over the configured types; `consumed` is the cumulative actual
// consumption, `counters` the aggregator's estimate-based counters s_m.
struct TraceRecord {
    long long round = 0;
    long long iteration = 0;
    long long tau = 0;
    double loss = std::numeric_limits<double>::quiet_NaN();
    double accuracy = std::numeric_limits<double>::quiet_NaN(); // SVM only
    double rho_hat = std::numeric_limits<double>::quiet_NaN();
    double beta_hat = std::numeric_limits<double>::quiet_NaN();
    double delta_hat = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> c_hat;
    std::vector<double> b_hat;
    std::vector<double> consumed;
    std::vector<double> counters;
    std::string flags; // '|'-separated markers: stop, wf, eta_beta, clamped, ...
};

namespace detail {

// Shortest round-trip-exact decimal form.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s, const char* what) {
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw io_error(std::string("trace: bad ") + what + " value '" + s + "'");
    return v;
}

} // namespace detail

inline std::string trace_header(std::size_t resource_types) {
    std::string h = "round,iteration,tau,loss,accuracy,rho_hat,beta_hat,delta_hat";
    for (std::size_t m = 0; m < resource_types; ++m) {
        const std::string suffix = std::to_string(m);
        h += ",c_hat_" + suffix + ",b_hat_" + suffix + ",consumed_" + suffix + ",s_" + suffix;
    }
    h += ",flags";
    return h;
}

inline std::string to_csv_line(const TraceRecord& r) {
    std::string line = std::to_string(r.round) + "," + std::to_string(r.iteration) + "," +
                       std::to_string(r.tau);
    for (double v : {r.loss, r.accuracy, r.rho_hat, r.beta_hat, r.delta_hat})
        line += "," + detail::fmt_double(v);
    for (std::size_t m = 0; m < r.c_hat.size(); ++m) {
        line += "," + detail::fmt_double(r.c_hat[m]);
        line += "," + detail::fmt_double(r.b_hat[m]);
        line += "," + detail::fmt_double(r.consumed[m]);
        line += "," + detail::fmt_double(r.counters[m]);
    }
    line += "," + r.flags;
    return line;
}

inline void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace,
                            std::size_t resource_types) {
    std::ofstream out(path, std::ios::binary); // '\n' endings on every platform
    if (!out) throw io_error("write_trace_csv: cannot open " + path);
    out << trace_header(resource_types) << "\n";
    for (const TraceRecord& r : trace) out << to_csv_line(r) << "\n";
}

inline std::vector<TraceRecord> read_trace_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("read_trace_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw io_error("read_trace_csv: empty file " + path);
    // Column count encodes the number of resource types.
    std::size_t cols = 1;
    for (char c : line)
        if (c == ',') ++cols;
    if (cols < 9 || (cols - 9) % 4 != 0)
        throw io_error("read_trace_csv: unexpected header in " + path);
    const std::size_t m_count = (cols - 9) / 4;

    std::vector<TraceRecord> trace;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        while (true) {
            const std::size_t pos = line.find(',', start);
            f.push_back(line.substr(start, pos == std::string::npos ? pos : pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        if (f.size() != cols)
            throw io_error("read_trace_csv: row with " + std::to_string(f.size()) +
                           " fields, expected " + std::to_string(cols));
        TraceRecord r;
        r.round = std::stoll(f[0]);
        r.iteration = std::stoll(f[1]);
        r.tau = std::stoll(f[2]);
        r.loss = detail::parse_double(f[3], "loss");
        r.accuracy = detail::parse_double(f[4], "accuracy");
        r.rho_hat = detail::parse_double(f[5], "rho_hat");
        r.beta_hat = detail::parse_double(f[6], "beta_hat");
        r.delta_hat = detail::parse_double(f[7], "delta_hat");
        std::size_t pos = 8;
        for (std::size_t m = 0; m < m_count; ++m) {
            r.c_hat.push_back(detail::parse_double(f[pos++], "c_hat"));
            r.b_hat.push_back(detail::parse_double(f[pos++], "b_hat"));
            r.consumed.push_back(detail::parse_double(f[pos++], "consumed"));
            r.counters.push_back(detail::parse_double(f[pos++], "s"));
        }
        r.flags = f[pos];
        trace.push_back(std::move(r));
    }
    return trace;
}

} // namespace fedsim
