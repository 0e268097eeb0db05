#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lpa/data.hpp"
#include "lpa/net.hpp"
#include "lpa/perturb.hpp"
#include "lpa/train.hpp"

namespace lpa {

/// accuracy_c = correct_c / N_c; classes absent from the dataset get -1
/// in the dense vector and are skipped by consumers.
std::vector<double> per_class_accuracy(const MlpNetwork& net, const Dataset& data);

struct ClassVariation {
    int cls = 0;
    double mean_delta_norm = 0.0;
    double mean_act_norm = 0.0;
    double ratio = 0.0;  // E[‖δ‖] / E[‖a‖]
};

/// Relative activation variation per class at the plan's layer. Classes with
/// no samples in the batch are absent from the report.
struct VariationReport {
    std::size_t layer = 0;
    std::vector<ClassVariation> classes;
};

VariationReport activation_variation(const ForwardTrace& trace, const PerturbationPlan& plan,
                                     const std::vector<int>& labels);

struct AmplificationEntry {
    std::size_t layer = 0;
    double max_ratio = 0.0;        // max ‖Δlogits‖ / ‖δ‖ over probes
    double spectral_bound = 0.0;   // ∏_{j>l} ‖W^(j)‖₂
};

/// Probes ‖f_{l+1:L}(a+δ) − f_{l+1:L}(a)‖/‖δ‖ over random unit directions
/// scaled to ε (plus any caller-supplied directions), against the
/// spectral-norm product bound.
AmplificationEntry amplification_probe(const MlpNetwork& net, std::size_t l,
                                       const Matrix& probe_activations, double epsilon,
                                       int trials, std::uint64_t seed,
                                       const Matrix& extra_directions = Matrix());

/// Monte-Carlo mean of loss(W + rU) − loss(W) over random unit-Frobenius U.
struct SharpnessResult {
    double mean_increase = 0.0;
    double std_error = 0.0;
};

/// Generic core: evaluates an arbitrary loss at perturbed copies of W0.
SharpnessResult perturbation_loss_increase(
    const std::function<double(const Matrix&)>& loss_of_weights, const Matrix& w0, double radius,
    int trials, std::uint64_t seed);

/// Sharpness probe at layer l: cross-entropy over the sample with W^(l)
/// perturbed, biases and all other layers fixed.
SharpnessResult sharpness_probe(const MlpNetwork& net, const Matrix& features,
                                const std::vector<int>& labels, std::size_t l, double radius,
                                int trials, std::uint64_t seed);

struct LayerScanRow {
    std::size_t layer = 0;
    double final_val_accuracy = 0.0;
};

/// Trains one full run per layer (identical config/seed apart from the fixed
/// perturbation layer) and reports final validation accuracy.
std::vector<LayerScanRow> layer_scan(const TrainConfig& base, const Dataset& data,
                                     const std::vector<std::size_t>& layers);

}  // namespace lpa
