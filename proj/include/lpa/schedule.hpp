#pragma once

#include <cstddef>
#include <vector>

#include "lpa/net.hpp"
#include "lpa/perturb.hpp"

namespace lpa {

enum class SplitMode { Balanced, LongTail, DomainGen };

/// Splitting statistic s̄_c and the P_a/N_a membership it induces.
struct ClassPartition {
    SplitMode mode = SplitMode::Balanced;
    std::vector<double> statistic;  // s̄_c
    std::vector<Sign> membership;   // Expand ↔ P_a, Contract ↔ N_a

    bool in_positive_set(std::size_t c) const { return membership[c] == Sign::Expand; }
};

struct BoundConfig {
    double epsilon = 0.1;        // base ε
    double delta_epsilon = 0.0;  // Δε
    double tau = 0.5;            // τ (split threshold / bound pivot)
    double beta = 0.7;           // γ_l = β^(L−l)
};

/// s̄_c per mode: Balanced → per-class accuracy (caller maintains the EMA),
/// LongTail → N_c / max N_c, DomainGen → 0.
std::vector<double> split_statistic(SplitMode mode,
                                    const std::vector<double>& per_class_accuracy,
                                    const std::vector<std::size_t>& class_counts);

/// P_a membership: Balanced → s̄_c < mean(s̄) (ties to N_a), LongTail →
/// s̄_c < τ, DomainGen → every class.
ClassPartition partition(SplitMode mode, const std::vector<double>& statistic, double tau);

/// ε_c = ε + Δε · |τ − s̄_c|
double class_bound(const BoundConfig& cfg, double statistic);

/// ε_c^(l) = β^(L−l) · ε_c
double layer_bound(double eps_c, double beta, std::size_t l, std::size_t L);

enum class LayerStrategy { Fixed, Adaptive, Multi };

struct LayerChoice {
    LayerStrategy strategy = LayerStrategy::Fixed;
    std::vector<std::size_t> layers;  // Fixed: one entry; Adaptive: candidates; Multi: all
    int eval_period = 10;             // epochs between adaptive re-evaluations
};

struct LayerScore {
    std::size_t layer = 0;
    double score = 0.0;
};

/// Adaptive-selection score per candidate layer: Σ_c |mean perturbed class
/// loss − mean clean class loss| with that layer's plan on the given sample.
std::vector<LayerScore> evaluate_layers(const MlpNetwork& net, const Matrix& features,
                                        const std::vector<int>& labels,
                                        const std::vector<std::size_t>& candidates,
                                        const ClassPartition& part, const BoundConfig& bounds,
                                        const PgdConfig& pgd);

/// Argmax score; ties go to the smallest layer index.
std::size_t select_layer(const std::vector<LayerScore>& scores);

}  // namespace lpa
