#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/models.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

struct Dataset {
    std::vector<Sample> samples;
    bool has_labels = true;

    int features() const {
        return samples.empty() ? 0 : static_cast<int>(samples.front().x.size());
    }

    std::vector<double> label_set() const {
        std::set<double> s;
        for (const Sample& smp : samples) s.insert(smp.y);
        return {s.begin(), s.end()};
    }
};

// One node's local dataset D_i. Non-empty by construction.
struct NodePartition {
    int node_id = 0;
    std::vector<Sample> samples;
    std::size_t size() const { return samples.size(); }
};

// F_i(w): mean sample loss on one node's data.
inline double local_loss(const LossModel& m, const ParamVector& w, const NodePartition& p) {
    if (p.samples.empty()) throw config_error("local_loss: node partition is empty");
    return mean_loss(m, w, p.samples);
}

inline ParamVector local_gradient(const LossModel& m, const ParamVector& w,
                                  const NodePartition& p) {
    if (p.samples.empty()) throw config_error("local_gradient: node partition is empty");
    return mean_gradient(m, w, p.samples);
}

// F(w) = sum_i D_i F_i(w) / D.
inline double global_loss(const LossModel& m, const ParamVector& w,
                          std::span<const NodePartition> parts) {
    if (parts.empty()) throw config_error("global_loss: no partitions");
    double weighted = 0.0, total = 0.0;
    for (const NodePartition& p : parts) {
        weighted += static_cast<double>(p.size()) * local_loss(m, w, p);
        total += static_cast<double>(p.size());
    }
    return weighted / total;
}

inline ParamVector global_gradient(const LossModel& m, const ParamVector& w,
                                   std::span<const NodePartition> parts) {
    if (parts.empty()) throw config_error("global_gradient: no partitions");
    std::vector<ParamVector> grads;
    std::vector<double> sizes;
    for (const NodePartition& p : parts) {
        grads.push_back(local_gradient(m, w, p));
        sizes.push_back(static_cast<double>(p.size()));
    }
    return vec::weighted_average(grads, sizes);
}

// ---------------------------------------------------------------------------
// Synthetic data

// Desk-scale stand-ins for the real datasets. All generators are pure
// functions of (parameters, seed).
//
//  svm     : two Gaussian clusters labeled +-1, linearly separable with margin
//  linreg  : y = a^T x + noise, noise clamped to +-3 sigma
//  kmeans  : `clusters` well-separated Gaussian blobs, blob id kept as label
//            (the label is used only for partitioning)
inline Dataset generate_synthetic(ModelKind kind, int n, int d, int clusters,
                                  std::uint64_t seed) {
    if (n < 2) throw config_error("generate_synthetic: need n >= 2");
    if (d < 1) throw config_error("generate_synthetic: need d >= 1");
    Rng rng(derive_seed(seed, 0xDA7A));
    Dataset ds;
    ds.samples.reserve(static_cast<std::size_t>(n));

    switch (kind) {
        case ModelKind::squared_svm: {
            // Classes sit on both sides of a random hyperplane; the final
            // coordinate is a constant intercept (for d >= 2), so a
            // single-label subset genuinely disagrees with the pooled data
            // about the optimum instead of mirroring it.
            const int dg = d >= 2 ? d - 1 : d;
            std::vector<double> u(dg);
            double un = 0.0;
            for (double& v : u) {
                v = rng.normal();
                un += v * v;
            }
            un = std::sqrt(un);
            for (double& v : u) v /= (un > 0 ? un : 1.0);
            const double half_margin = 0.5, sigma_par = 0.6, sigma_perp = 0.8;
            for (int i = 0; i < n; ++i) {
                const double label = (i % 2 == 0) ? 1.0 : -1.0;
                const double proj = half_margin + std::abs(rng.normal()) * sigma_par;
                Sample s;
                s.x.resize(d);
                double gdotu = 0.0;
                std::vector<double> g(dg);
                for (int j = 0; j < dg; ++j) {
                    g[j] = rng.normal();
                    gdotu += g[j] * u[j];
                }
                for (int j = 0; j < dg; ++j)
                    s.x[j] = label * proj * u[j] + sigma_perp * (g[j] - gdotu * u[j]);
                if (d >= 2) s.x[d - 1] = 1.0;
                s.y = label;
                ds.samples.push_back(std::move(s));
            }
            ds.has_labels = true;
            break;
        }
        case ModelKind::linear_regression: {
            std::vector<double> a(d);
            for (double& v : a) v = rng.normal();
            const double sigma_noise = 0.1;
            for (int i = 0; i < n; ++i) {
                Sample s;
                s.x.resize(d);
                double ax = 0.0;
                for (int j = 0; j < d; ++j) {
                    s.x[j] = rng.normal();
                    ax += a[j] * s.x[j];
                }
                const double noise =
                    std::clamp(rng.normal(0.0, sigma_noise), -3.0 * sigma_noise, 3.0 * sigma_noise);
                s.y = ax + noise;
                ds.samples.push_back(std::move(s));
            }
            ds.has_labels = false; // continuous target, not a class label
            break;
        }
        case ModelKind::k_means: {
            if (clusters < 1) throw config_error("generate_synthetic: need clusters >= 1");
            const double sigma = 0.5, box = 10.0, min_sep = 5.0;
            std::vector<std::vector<double>> centers;
            while (static_cast<int>(centers.size()) < clusters) {
                std::vector<double> c(d);
                for (double& v : c) v = box * (2.0 * rng.uniform01() - 1.0);
                bool ok = true;
                for (const auto& other : centers) {
                    double sq = 0.0;
                    for (int j = 0; j < d; ++j) sq += (c[j] - other[j]) * (c[j] - other[j]);
                    if (std::sqrt(sq) < min_sep) {
                        ok = false;
                        break;
                    }
                }
                if (ok) centers.push_back(std::move(c));
            }
            for (int i = 0; i < n; ++i) {
                const int blob = i % clusters;
                Sample s;
                s.x.resize(d);
                for (int j = 0; j < d; ++j) s.x[j] = centers[blob][j] + sigma * rng.normal();
                s.y = static_cast<double>(blob);
                ds.samples.push_back(std::move(s));
            }
            ds.has_labels = true;
            break;
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// CSV ingestion

struct CsvSchema {
    int features = 0;
    bool has_label = true;
    bool has_header = false;
};

inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw io_error("load_csv: cannot open " + path);
    if (schema.features < 1) throw config_error("load_csv: schema.features must be >= 1");

    Dataset ds;
    ds.has_labels = schema.has_label;
    std::string line;
    long long row = 0;
    const int want = schema.features + (schema.has_label ? 1 : 0);
    while (std::getline(in, line)) {
        ++row;
        if (row == 1 && schema.has_header) continue;
        if (line.empty()) continue;
        std::vector<double> fields;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p <= end) {
            const char* comma = std::find(p, end, ',');
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(p, comma, v);
            if (ec != std::errc{} || ptr != comma)
                throw io_error("load_csv: row " + std::to_string(row) + ": bad number '" +
                               std::string(p, comma) + "'");
            fields.push_back(v);
            if (comma == end) break;
            p = comma + 1;
        }
        if (static_cast<int>(fields.size()) != want)
            throw io_error("load_csv: row " + std::to_string(row) + ": expected " +
                           std::to_string(want) + " fields, got " +
                           std::to_string(fields.size()));
        Sample s;
        s.x.assign(fields.begin(), fields.begin() + schema.features);
        s.y = schema.has_label ? fields.back() : 0.0;
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) throw io_error("load_csv: no data rows in " + path);
    return ds;
}

// ---------------------------------------------------------------------------
// Partitioning (Cases 1-4)

namespace detail {

// Plain Lloyd iteration used to derive pseudo-labels for unlabeled data that
// must be partitioned by label.
inline std::vector<int> lloyd_labels(const std::vector<Sample>& samples, int k,
                                     std::uint64_t seed, int iterations = 25) {
    const int d = static_cast<int>(samples.front().x.size());
    Rng rng(derive_seed(seed, 0x110D));
    std::vector<std::vector<double>> centers(k);
    for (int c = 0; c < k; ++c)
        centers[c] = samples[rng.uniform_below(samples.size())].x;

    std::vector<int> labels(samples.size(), 0);
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            int best = 0;
            double best_sq = 0.0;
            for (int c = 0; c < k; ++c) {
                double sq = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double diff = samples[i].x[j] - centers[c][j];
                    sq += diff * diff;
                }
                if (c == 0 || sq < best_sq) {
                    best = c;
                    best_sq = sq;
                }
            }
            labels[i] = best;
        }
        std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
        std::vector<int> counts(k, 0);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            ++counts[labels[i]];
            for (int j = 0; j < d; ++j) sums[labels[i]][j] += samples[i].x[j];
        }
        for (int c = 0; c < k; ++c)
            if (counts[c] > 0)
                for (int j = 0; j < d; ++j) centers[c][j] = sums[c][j] / counts[c];
    }
    return labels;
}

// Case 2 on a subset: contiguous label blocks onto a contiguous node range.
// When there are more labels than nodes, each node receives at most
// ceil(labels/nodes) whole labels; otherwise each label block is split evenly
// across the nodes assigned to it.
inline void assign_by_label(const std::vector<Sample>& samples,
                            const std::vector<std::size_t>& subset,
                            const std::vector<double>& keys, int first_node, int n_nodes,
                            std::vector<NodePartition>& out) {
    if (subset.empty()) throw partition_error("case 2: no samples to assign");
    // Stable order: by label, then original position.
    std::vector<std::size_t> order = subset;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return keys[a] < keys[b];
    });
    std::vector<std::pair<double, std::vector<std::size_t>>> blocks;
    for (std::size_t i : order) {
        if (blocks.empty() || blocks.back().first != keys[i]) blocks.push_back({keys[i], {}});
        blocks.back().second.push_back(i);
    }
    const int n_labels = static_cast<int>(blocks.size());
    if (n_labels >= n_nodes) {
        // Whole labels per node, sizes differing by at most one label.
        int label_pos = 0;
        for (int node = 0; node < n_nodes; ++node) {
            int count = n_labels / n_nodes + (node < n_labels % n_nodes ? 1 : 0);
            auto& part = out[static_cast<std::size_t>(first_node + node)];
            for (int c = 0; c < count; ++c, ++label_pos)
                for (std::size_t i : blocks[label_pos].second)
                    part.samples.push_back(samples[i]);
        }
    } else {
        // More nodes than labels: split each label block across its nodes.
        int node = 0;
        for (int l = 0; l < n_labels; ++l) {
            const int span = n_nodes / n_labels + (l < n_nodes % n_labels ? 1 : 0);
            const auto& block = blocks[l].second;
            if (static_cast<int>(block.size()) < span)
                throw partition_error("case 2: label block too small to cover its nodes");
            std::size_t pos = 0;
            for (int s = 0; s < span; ++s, ++node) {
                std::size_t count = block.size() / span + (s < static_cast<int>(block.size() % span) ? 1 : 0);
                auto& part = out[static_cast<std::size_t>(first_node + node)];
                for (std::size_t c = 0; c < count; ++c) part.samples.push_back(samples[block[pos++]]);
            }
        }
    }
}

} // namespace detail

// Distribute a dataset over n_nodes following one of the four schemes:
//   1  each sample goes to a uniformly random node
//   2  label-sorted contiguous blocks, one (group of) label(s) per node
//   3  every node holds a full copy of the dataset
//   4  first half of labels -> first half of nodes as in Case 1,
//      remaining samples -> remaining nodes as in Case 2
// Cases 2 and 4 of unlabeled data use pseudo-labels from a fixed-seed
// clustering pass.
inline std::vector<NodePartition> partition(const Dataset& ds, int n_nodes, int data_case,
                                            std::uint64_t seed) {
    if (n_nodes < 1) throw config_error("partition: n_nodes must be >= 1");
    if (ds.samples.empty()) throw config_error("partition: dataset is empty");
    if (data_case < 1 || data_case > 4) throw config_error("partition: case must be 1..4");

    std::vector<NodePartition> parts(static_cast<std::size_t>(n_nodes));
    for (int i = 0; i < n_nodes; ++i) parts[static_cast<std::size_t>(i)].node_id = i;

    // Label keys, real or pseudo.
    std::vector<double> keys(ds.samples.size());
    if (data_case == 2 || data_case == 4) {
        if (ds.has_labels) {
            for (std::size_t i = 0; i < ds.samples.size(); ++i) keys[i] = ds.samples[i].y;
        } else {
            auto pseudo = detail::lloyd_labels(ds.samples, n_nodes, seed);
            for (std::size_t i = 0; i < ds.samples.size(); ++i)
                keys[i] = static_cast<double>(pseudo[i]);
        }
    }

    switch (data_case) {
        case 1: {
            Rng rng(derive_seed(seed, 0xCA5E1));
            for (const Sample& s : ds.samples)
                parts[rng.uniform_below(static_cast<std::uint64_t>(n_nodes))].samples.push_back(s);
            break;
        }
        case 2: {
            std::vector<std::size_t> all(ds.samples.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            detail::assign_by_label(ds.samples, all, keys, 0, n_nodes, parts);
            break;
        }
        case 3: {
            for (auto& p : parts) p.samples = ds.samples;
            break;
        }
        case 4: {
            if (n_nodes < 2) throw partition_error("case 4: needs at least 2 nodes");
            std::set<double> labels(keys.begin(), keys.end());
            if (labels.size() < 2) throw partition_error("case 4: needs at least 2 labels");
            std::vector<double> sorted(labels.begin(), labels.end());
            const std::size_t half_labels = (sorted.size() + 1) / 2;
            const int half_nodes = (n_nodes + 1) / 2;
            const double cutoff = sorted[half_labels - 1];
            std::vector<std::size_t> uniform_part, label_part;
            for (std::size_t i = 0; i < keys.size(); ++i)
                (keys[i] <= cutoff ? uniform_part : label_part).push_back(i);
            Rng rng(derive_seed(seed, 0xCA5E4));
            for (std::size_t i : uniform_part)
                parts[rng.uniform_below(static_cast<std::uint64_t>(half_nodes))].samples.push_back(
                    ds.samples[i]);
            detail::assign_by_label(ds.samples, label_part, keys, half_nodes,
                                    n_nodes - half_nodes, parts);
            break;
        }
    }

    for (const auto& p : parts)
        if (p.samples.empty())
            throw partition_error("partition: node " + std::to_string(p.node_id) +
                                  " received zero samples");
    return parts;
}

// Seeded 80/20-style split; the first fraction of a shuffled index set
// becomes the training set.
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double train_fraction,
                                                    std::uint64_t seed) {
    if (!(train_fraction > 0.0) || train_fraction > 1.0)
        throw config_error("train_test_split: fraction must be in (0, 1]");
    std::vector<std::size_t> idx(ds.samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(derive_seed(seed, 0x5B117));
    rng.shuffle(idx);
    const std::size_t n_train =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                     train_fraction * static_cast<double>(idx.size()))));
    Dataset train, test;
    train.has_labels = test.has_labels = ds.has_labels;
    for (std::size_t i = 0; i < idx.size(); ++i)
        (i < n_train ? train : test).samples.push_back(ds.samples[idx[i]]);
    return {std::move(train), std::move(test)};
}

} // namespace fedsim
