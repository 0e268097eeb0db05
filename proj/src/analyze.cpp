#include "lpa/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "lpa/rng.hpp"

namespace lpa {

std::vector<double> per_class_accuracy(const MlpNetwork& net, const Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("per_class_accuracy: empty dataset");
    ForwardTrace trace = forward_full(net, data.features);
    std::vector<std::size_t> correct(data.classes, 0), total(data.classes, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto row = trace.logits().row(i);
        const auto pred =
            std::distance(row.begin(), std::max_element(row.begin(), row.end()));
        const auto c = static_cast<std::size_t>(data.labels[i]);
        total[c]++;
        if (pred == data.labels[i]) correct[c]++;
    }
    std::vector<double> acc(data.classes);
    for (std::size_t c = 0; c < data.classes; ++c)
        acc[c] = total[c] ? static_cast<double>(correct[c]) / static_cast<double>(total[c])
                          : -1.0;
    return acc;
}

VariationReport activation_variation(const ForwardTrace& trace, const PerturbationPlan& plan,
                                     const std::vector<int>& labels) {
    const Matrix& a = trace.activation(plan.layer);
    std::map<int, std::pair<double, std::size_t>> act_norms;  // class → (Σ‖a‖, count)
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& [sum, n] = act_norms[labels[i]];
        sum += l2_norm(a.row(i));
        n++;
    }
    VariationReport rep;
    rep.layer = plan.layer;
    for (const auto& [c, sn] : act_norms) {
        ClassVariation cv;
        cv.cls = c;
        cv.mean_act_norm = sn.first / static_cast<double>(sn.second);
        auto it = plan.per_class.find(c);
        cv.mean_delta_norm = it == plan.per_class.end() ? 0.0 : l2_norm(it->second.delta);
        cv.ratio = cv.mean_act_norm > 0.0 ? cv.mean_delta_norm / cv.mean_act_norm : 0.0;
        rep.classes.push_back(cv);
    }
    return rep;
}

AmplificationEntry amplification_probe(const MlpNetwork& net, std::size_t l,
                                       const Matrix& probe_activations, double epsilon,
                                       int trials, std::uint64_t seed,
                                       const Matrix& extra_directions) {
    if (trials < 1) throw std::invalid_argument("amplification_probe: trials must be >= 1");
    if (!(epsilon > 0.0)) throw std::invalid_argument("amplification_probe: epsilon must be > 0");
    const std::size_t d = net.layer_dim(l);
    if (probe_activations.cols != d)
        throw std::invalid_argument("amplification_probe: activation dim mismatch");

    const Matrix base = forward_from(net, l, probe_activations);

    auto ratio_for = [&](const std::vector<double>& dir) {
        Matrix shifted = probe_activations;
        for (std::size_t i = 0; i < shifted.rows; ++i) axpy(1.0, dir, shifted.row(i));
        const Matrix out = forward_from(net, l, shifted);
        double best = 0.0;
        for (std::size_t i = 0; i < out.rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < out.cols; ++j) {
                const double diff = out(i, j) - base(i, j);
                s += diff * diff;
            }
            best = std::max(best, std::sqrt(s) / epsilon);
        }
        return best;
    };

    std::vector<double> ratios(static_cast<std::size_t>(trials));
    const std::ptrdiff_t n = trials;
#pragma omp parallel for schedule(static) if (n > 8)
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        Rng rng = make_stream(seed, "amp.trial", static_cast<std::uint64_t>(t));
        std::vector<double> dir(d);
        for (double& x : dir) x = rng.normal();
        const double nn = l2_norm(dir);
        if (nn > 0.0) scale(dir, epsilon / nn);
        ratios[static_cast<std::size_t>(t)] = ratio_for(dir);
    }

    AmplificationEntry entry;
    entry.layer = l;
    entry.max_ratio = *std::max_element(ratios.begin(), ratios.end());
    for (std::size_t r = 0; r < extra_directions.rows; ++r) {
        std::vector<double> dir(extra_directions.row(r).begin(), extra_directions.row(r).end());
        const double nn = l2_norm(dir);
        if (nn > 0.0) scale(dir, epsilon / nn);
        entry.max_ratio = std::max(entry.max_ratio, ratio_for(dir));
    }
    entry.spectral_bound = downstream_lipschitz_bound(net, l);
    return entry;
}

SharpnessResult perturbation_loss_increase(
    const std::function<double(const Matrix&)>& loss_of_weights, const Matrix& w0, double radius,
    int trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("perturbation_loss_increase: trials >= 1");
    const double base = loss_of_weights(w0);
    std::vector<double> incr(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        Rng rng = make_stream(seed, "sharp.trial", static_cast<std::uint64_t>(t));
        Matrix w = w0;
        std::vector<double> u(w.size());
        for (double& x : u) x = rng.normal();
        const double n = l2_norm(u);
        if (n > 0.0)
            for (std::size_t i = 0; i < w.size(); ++i) w.data[i] += radius * u[i] / n;
        incr[static_cast<std::size_t>(t)] = loss_of_weights(w) - base;
    }
    SharpnessResult res;
    for (double x : incr) res.mean_increase += x;
    res.mean_increase /= static_cast<double>(trials);
    double var = 0.0;
    for (double x : incr) var += (x - res.mean_increase) * (x - res.mean_increase);
    if (trials > 1) var /= static_cast<double>(trials - 1);
    res.std_error = std::sqrt(var / static_cast<double>(trials));
    return res;
}

SharpnessResult sharpness_probe(const MlpNetwork& net, const Matrix& features,
                                const std::vector<int>& labels, std::size_t l, double radius,
                                int trials, std::uint64_t seed) {
    if (l < 1 || l > net.depth())
        throw std::invalid_argument("sharpness_probe: layer out of range");
    if (radius == 0.0) return {0.0, 0.0};
    MlpNetwork probe = net;
    auto loss = [&](const Matrix& w) {
        probe.layers[l - 1].weights = w;
        return cross_entropy(forward_full(probe, features).logits(), labels).mean_loss;
    };
    return perturbation_loss_increase(loss, net.layers[l - 1].weights, radius, trials, seed);
}

std::vector<LayerScanRow> layer_scan(const TrainConfig& base, const Dataset& data,
                                     const std::vector<std::size_t>& layers) {
    if (layers.empty()) throw std::invalid_argument("layer_scan: no layers given");
    std::vector<LayerScanRow> rows;
    for (std::size_t l : layers) {
        TrainConfig cfg = base;
        cfg.method.layer_choice.strategy = LayerStrategy::Fixed;
        cfg.method.layer_choice.layers = {l};
        RunRecord rec = train(cfg, data);
        rows.push_back({l, rec.epochs.back().val_accuracy});
    }
    return rows;
}

}  // namespace lpa
