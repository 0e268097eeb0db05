#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpa/data.hpp"
#include "lpa/net.hpp"
#include "lpa/perturb.hpp"
#include "lpa/schedule.hpp"

namespace lpa {

enum class Method { CE, Dropout, ManifoldMixup, Ada, Lpl, Lpa, LplPlusLpa };

std::string method_name(Method m);

/// PGD search-direction rank: full, ⌊d_l/4⌋ (resolved per layer), or a fixed k.
enum class RankMode { Full, Quarter, Explicit };

struct MethodConfig {
    Method method = Method::CE;

    // Dropout / Manifold Mixup / ADA baselines (single perturbation layer;
    // 0 selects the penultimate layer).
    double dropout_keep = 0.9;
    double mixup_alpha = 1.0;
    double ada_epsilon = 0.1;
    std::size_t baseline_layer = 0;

    // LPA / LPL
    SplitMode split = SplitMode::Balanced;
    bool tau_is_mean = true;     // Balanced: τ tracks the mean statistic
    BoundConfig bounds;          // activation-layer bounds
    BoundConfig logit_bounds;    // LPL bounds (Lpl and LplPlusLpa)
    LayerChoice layer_choice;
    PgdConfig pgd;
    RankMode rank_mode = RankMode::Full;
    std::size_t rank = 0;  // used when rank_mode == Explicit
};

struct LrSchedule {
    double initial = 0.1;
    double decay_factor = 0.1;  // applied at 50% and 75% of the epoch budget
};

struct TrainConfig {
    int epochs = 40;
    std::size_t batch_size = 128;
    LrSchedule lr;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::uint64_t seed = 1;
    std::vector<std::size_t> hidden = {64, 32};
    double val_fraction = 0.1;
    MethodConfig method;

    void validate() const;
};

double lr_at_epoch(const LrSchedule& lr, int epoch, int total_epochs);

struct ClassEpochRecord {
    double statistic = 0.0;   // s̄_c
    Sign set = Sign::Contract;
    double eps_c = 0.0;
    double eps_c_layer = 0.0; // at the first active layer
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
};

struct EpochStats {
    int epoch = 0;
    double mean_train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    std::vector<ClassEpochRecord> per_class;
    std::vector<std::size_t> layers_used;
    double wall_ms = 0.0;
};

struct RunRecord {
    std::vector<EpochStats> epochs;
    MlpNetwork net;
    // Invariant counters, updated on every PGD solve during training.
    std::uint64_t projection_violations = 0;
    std::uint64_t direction_violations = 0;
    double max_norm_excess = 0.0;  // max over solves of ‖δ‖ − ε
};

struct SgdState {
    std::vector<Matrix> weight_velocity;
    std::vector<std::vector<double>> bias_velocity;
};

/// v ← μv + g + λ·W; W ← W − lr·v. Biases receive no weight decay.
void sgd_step(MlpNetwork& net, const GradientBundle& grads, SgdState& state,
              double lr, double momentum, double weight_decay);

/// Runs the configured method end to end on an explicit train/val pair.
RunRecord train_with_val(const TrainConfig& cfg, const Dataset& train_set,
                         const Dataset& val_set);

/// As train_with_val, after holding out the seeded per-class validation split.
RunRecord train(const TrainConfig& cfg, const Dataset& dataset);

/// LPL baseline: LPA with the perturbation layer fixed at the logit layer.
RunRecord train_lpl(const TrainConfig& cfg, const Dataset& dataset);

// Persistence: metrics CSV (one row per epoch per class plus summary rows)
// and a checkpoint in the net_core format. Metrics are written to a
// temporary file and renamed, so a crash never leaves a truncated CSV.
void write_metrics_csv(const RunRecord& rec, const std::string& path);

}  // namespace lpa
