#include "lpa/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "lpa/rng.hpp"

namespace lpa {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Class means on the radius-r sphere: Gaussian draws orthonormalized by
/// Gram-Schmidt while C <= d_0, which keeps every pair well separated.
Matrix class_means(const DatasetSpec& spec) {
    Rng rng = make_stream(spec.seed, "data.means");
    Matrix means(spec.classes, spec.input_dim);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        std::vector<double> v(spec.input_dim);
        for (double& x : v) x = rng.normal();
        if (c < spec.input_dim) {
            for (std::size_t p = 0; p < c; ++p) {
                const double coef = dot(means.row(p), v);
                axpy(-coef / (spec.radius * spec.radius), means.row(p), v);
            }
        }
        const double n = l2_norm(v);
        if (n > 0.0) scale(v, spec.radius / n);
        std::copy(v.begin(), v.end(), means.row(c).begin());
    }
    return means;
}

Dataset gen_clusters(const DatasetSpec& spec, const std::vector<std::size_t>& counts) {
    Dataset d;
    d.classes = spec.classes;
    d.class_counts = counts;
    const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    d.features = Matrix(total, spec.input_dim);
    d.labels.reserve(total);
    Matrix means = class_means(spec);
    std::size_t row = 0;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        Rng rng = make_stream(spec.seed, "data.noise", c);
        for (std::size_t i = 0; i < counts[c]; ++i, ++row) {
            for (std::size_t j = 0; j < spec.input_dim; ++j)
                d.features(row, j) = means(c, j) + spec.noise * rng.normal();
            d.labels.push_back(static_cast<int>(c));
        }
    }
    return d;
}

void rotate_first_two(Matrix& feats, double angle_deg) {
    const double a = angle_deg * kPi / 180.0;
    const double c = std::cos(a), s = std::sin(a);
    for (std::size_t i = 0; i < feats.rows; ++i) {
        const double x = feats(i, 0), y = feats(i, 1);
        feats(i, 0) = c * x - s * y;
        feats(i, 1) = s * x + c * y;
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Dataset gen_balanced(const DatasetSpec& spec) {
    if (spec.classes < 2) throw std::invalid_argument("gen_balanced: need C >= 2");
    return gen_clusters(spec, std::vector<std::size_t>(spec.classes, spec.per_class));
}

std::vector<std::size_t> longtail_counts(std::size_t n_max, double rho, std::size_t classes) {
    if (rho < 1.0) throw std::invalid_argument("longtail_counts: rho must be >= 1");
    std::vector<std::size_t> counts(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        const double expo = -static_cast<double>(c) / static_cast<double>(classes - 1);
        const double n = static_cast<double>(n_max) * std::pow(rho, expo);
        counts[c] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n)));
    }
    return counts;
}

Dataset gen_longtail(const DatasetSpec& spec) {
    if (spec.classes < 2) throw std::invalid_argument("gen_longtail: need C >= 2");
    return gen_clusters(spec, longtail_counts(spec.per_class, spec.imbalance, spec.classes));
}

std::pair<Dataset, Dataset> gen_domain_shift(const DatasetSpec& spec) {
    if (spec.input_dim < 2) throw std::invalid_argument("gen_domain_shift: need d_0 >= 2");
    if (spec.train_rotations_deg.size() < 2)
        throw std::invalid_argument("gen_domain_shift: need at least 2 train domains");

    Dataset train;
    train.classes = spec.classes;
    train.class_counts.assign(spec.classes, 0);
    for (std::size_t dom = 0; dom < spec.train_rotations_deg.size(); ++dom) {
        DatasetSpec base = spec;
        base.seed = splitmix64(spec.seed ^ fnv1a("domain") ^ dom);
        Dataset part = gen_clusters(base, std::vector<std::size_t>(spec.classes, spec.per_class));
        rotate_first_two(part.features, spec.train_rotations_deg[dom]);
        const std::size_t offset = train.labels.size();
        Matrix merged(offset + part.size(), spec.input_dim);
        std::copy(train.features.data.begin(), train.features.data.end(), merged.data.begin());
        std::copy(part.features.data.begin(), part.features.data.end(),
                  merged.data.begin() + static_cast<std::ptrdiff_t>(offset * spec.input_dim));
        train.features = std::move(merged);
        train.labels.insert(train.labels.end(), part.labels.begin(), part.labels.end());
        train.domains.insert(train.domains.end(), part.size(), static_cast<int>(dom));
        for (std::size_t c = 0; c < spec.classes; ++c)
            train.class_counts[c] += part.class_counts[c];
    }

    DatasetSpec held = spec;
    held.seed = splitmix64(spec.seed ^ fnv1a("domain.test"));
    Dataset test = gen_clusters(held, std::vector<std::size_t>(spec.classes, spec.per_class));
    rotate_first_two(test.features, spec.test_rotation_deg);
    test.domains.assign(test.size(), static_cast<int>(spec.train_rotations_deg.size()));
    return {std::move(train), std::move(test)};
}

TrainValSplit split_train_val(const Dataset& data, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw std::invalid_argument("split_train_val: fraction must be in (0, 1)");
    std::vector<std::vector<std::size_t>> by_class(data.classes);
    for (std::size_t i = 0; i < data.size(); ++i)
        by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);

    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t c = 0; c < data.classes; ++c) {
        auto& idx = by_class[c];
        Rng rng = make_stream(seed, "split.shuffle", c);
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
        std::size_t n_val = static_cast<std::size_t>(
            std::llround(fraction * static_cast<double>(idx.size())));
        n_val = std::clamp<std::size_t>(n_val, 1, idx.size() > 1 ? idx.size() - 1 : 1);
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i + n_val < idx.size() ? train_idx : val_idx).push_back(idx[i]);
    }

    auto take = [&](const std::vector<std::size_t>& rows) {
        Dataset out;
        out.classes = data.classes;
        out.class_counts.assign(data.classes, 0);
        out.features = Matrix(rows.size(), data.features.cols);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            auto src = data.features.row(rows[r]);
            std::copy(src.begin(), src.end(), out.features.row(r).begin());
            out.labels.push_back(data.labels[rows[r]]);
            out.class_counts[static_cast<std::size_t>(data.labels[rows[r]])]++;
            if (!data.domains.empty()) out.domains.push_back(data.domains[rows[r]]);
        }
        return out;
    };
    return {take(train_idx), take(val_idx)};
}

void write_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (std::size_t j = 0; j < data.features.cols; ++j) out << "feature_" << j << ",";
    out << "label,domain\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = 0; j < data.features.cols; ++j)
            out << format_double(data.features(i, j)) << ",";
        out << data.labels[i] << "," << (data.domains.empty() ? 0 : data.domains[i]) << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty CSV: " + path);
    const std::size_t n_cols = static_cast<std::size_t>(
        std::count(header.begin(), header.end(), ',') + 1);
    if (n_cols < 3) throw std::runtime_error("malformed CSV header: " + path);
    const std::size_t d = n_cols - 2;

    std::vector<double> values;
    std::vector<int> labels, domains;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t j = 0; j < d; ++j) {
            if (!std::getline(ss, cell, ',')) throw std::runtime_error("short CSV row: " + path);
            values.push_back(std::strtod(cell.c_str(), nullptr));
        }
        if (!std::getline(ss, cell, ',')) throw std::runtime_error("short CSV row: " + path);
        labels.push_back(std::stoi(cell));
        if (!std::getline(ss, cell, ',')) throw std::runtime_error("short CSV row: " + path);
        domains.push_back(std::stoi(cell));
    }

    Dataset out;
    out.features = Matrix(labels.size(), d);
    out.features.data = std::move(values);
    out.labels = std::move(labels);
    const int max_label =
        out.labels.empty() ? -1 : *std::max_element(out.labels.begin(), out.labels.end());
    out.classes = static_cast<std::size_t>(max_label + 1);
    out.class_counts.assign(out.classes, 0);
    for (int y : out.labels) out.class_counts[static_cast<std::size_t>(y)]++;
    const bool any_domain = std::any_of(domains.begin(), domains.end(), [](int x) { return x != 0; });
    if (any_domain) out.domains = std::move(domains);
    return out;
}

}  // namespace lpa
