#include "lpa/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace lpa {

std::vector<double> split_statistic(SplitMode mode,
                                    const std::vector<double>& per_class_accuracy,
                                    const std::vector<std::size_t>& class_counts) {
    switch (mode) {
        case SplitMode::Balanced:
            if (per_class_accuracy.size() < 2)
                throw std::invalid_argument("split_statistic: need C >= 2 accuracies");
            return per_class_accuracy;
        case SplitMode::LongTail: {
            if (class_counts.size() < 2)
                throw std::invalid_argument("split_statistic: need C >= 2 counts");
            const double mx = static_cast<double>(
                *std::max_element(class_counts.begin(), class_counts.end()));
            std::vector<double> s(class_counts.size());
            for (std::size_t c = 0; c < s.size(); ++c)
                s[c] = static_cast<double>(class_counts[c]) / mx;
            return s;
        }
        case SplitMode::DomainGen: {
            const std::size_t C =
                std::max(per_class_accuracy.size(), class_counts.size());
            return std::vector<double>(C, 0.0);
        }
    }
    throw std::logic_error("split_statistic: unknown mode");
}

ClassPartition partition(SplitMode mode, const std::vector<double>& statistic, double tau) {
    ClassPartition part;
    part.mode = mode;
    part.statistic = statistic;
    part.membership.resize(statistic.size());
    double threshold = tau;
    if (mode == SplitMode::Balanced)
        threshold = std::accumulate(statistic.begin(), statistic.end(), 0.0) /
                    static_cast<double>(statistic.size());
    for (std::size_t c = 0; c < statistic.size(); ++c) {
        if (mode == SplitMode::DomainGen)
            part.membership[c] = Sign::Expand;
        else
            // equality goes to N_a
            part.membership[c] = statistic[c] < threshold ? Sign::Expand : Sign::Contract;
    }
    return part;
}

double class_bound(const BoundConfig& cfg, double statistic) {
    return cfg.epsilon + cfg.delta_epsilon * std::abs(cfg.tau - statistic);
}

double layer_bound(double eps_c, double beta, std::size_t l, std::size_t L) {
    if (l < 1 || l > L) throw std::invalid_argument("layer_bound: layer out of range");
    return std::pow(beta, static_cast<double>(L - l)) * eps_c;
}

std::vector<LayerScore> evaluate_layers(const MlpNetwork& net, const Matrix& features,
                                        const std::vector<int>& labels,
                                        const std::vector<std::size_t>& candidates,
                                        const ClassPartition& part, const BoundConfig& bounds,
                                        const PgdConfig& pgd) {
    if (candidates.empty())
        throw std::invalid_argument("evaluate_layers: no candidate layers");
    const std::size_t L = net.depth();
    ForwardTrace trace = forward_full(net, features);

    // group sample indices by class
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    std::vector<LayerScore> scores;
    for (std::size_t l : candidates) {
        if (l < 1 || l > L)
            throw std::invalid_argument("evaluate_layers: layer " + std::to_string(l) +
                                        " out of range");
        double total = 0.0;
        for (const auto& [c, idx] : by_class) {
            Matrix class_acts(idx.size(), net.layer_dim(l));
            for (std::size_t r = 0; r < idx.size(); ++r) {
                auto src = trace.activation(l).row(idx[r]);
                std::copy(src.begin(), src.end(), class_acts.row(r).begin());
            }
            const Sign sign = part.membership[static_cast<std::size_t>(c)];
            const double eps_l =
                layer_bound(class_bound(bounds, part.statistic[static_cast<std::size_t>(c)]),
                            bounds.beta, l, L);
            DeltaResult res = lpa_class_delta(net, l, class_acts, c, sign, eps_l, pgd);
            total += std::abs(res.perturbed_loss - res.clean_loss);
        }
        scores.push_back({l, total});
    }
    return scores;
}

std::size_t select_layer(const std::vector<LayerScore>& scores) {
    if (scores.empty()) throw std::invalid_argument("select_layer: empty scores");
    std::size_t best_layer = scores.front().layer;
    double best = scores.front().score;
    for (const auto& s : scores)
        if (s.score > best || (s.score == best && s.layer < best_layer)) {
            best = s.score;
            best_layer = s.layer;
        }
    return best_layer;
}

}  // namespace lpa
