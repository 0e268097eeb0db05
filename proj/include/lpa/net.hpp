#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lpa/matrix.hpp"

namespace lpa {

enum class Activation { ReLU, Identity };

struct DenseLayer {
    Matrix weights;             // d_l × d_{l-1}
    std::vector<double> bias;   // d_l
    Activation activation = Activation::ReLU;

    std::size_t out_dim() const { return weights.rows; }
    std::size_t in_dim() const { return weights.cols; }
};

/// Plain dense feed-forward network. Layer indices are 1-based in the API
/// (layer 0 is the input); the last layer emits logits through an Identity
/// activation.
struct MlpNetwork {
    std::vector<DenseLayer> layers;
    std::size_t input_dim = 0;
    std::uint64_t init_seed = 0;

    std::size_t depth() const { return layers.size(); }
    std::size_t class_count() const { return layers.back().out_dim(); }
    /// Output dimension of layer l (l = 0 is the input).
    std::size_t layer_dim(std::size_t l) const {
        return l == 0 ? input_dim : layers[l - 1].out_dim();
    }
    void validate() const;
};

/// He-initialized MLP: hidden layers use ReLU, the final layer Identity.
MlpNetwork make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                    std::size_t classes, std::uint64_t seed);

struct ForwardTrace {
    Matrix input;                 // batch × d_0
    std::vector<Matrix> pre;      // z^(l), batch × d_l
    std::vector<Matrix> act;      // a^(l), batch × d_l

    std::size_t depth() const { return act.size(); }
    const Matrix& logits() const { return act.back(); }
    /// a^(l) with l = 0 meaning the input batch.
    const Matrix& activation(std::size_t l) const { return l == 0 ? input : act[l - 1]; }
};

ForwardTrace forward_full(const MlpNetwork& net, const Matrix& batch);

/// f_{l+1:L}: runs layers l+1..L on the given activations; l = L is the
/// identity, l = 0 equals a full forward pass.
Matrix forward_from(const MlpNetwork& net, std::size_t l, const Matrix& activations);

struct CrossEntropy {
    double mean_loss = 0.0;
    Matrix probabilities;             // batch × C
    std::vector<double> sample_loss;  // per-sample −log p_y
};

CrossEntropy cross_entropy(const Matrix& logits, const std::vector<int>& labels);

struct GradientBundle {
    std::vector<Matrix> weight_grads;            // ∂L/∂W^(l), mean loss
    std::vector<std::vector<double>> bias_grads; // ∂L/∂b^(l)
    std::size_t grad_layer = 0;
    /// Per-sample ∂l_i/∂a_i^(l*) (batch × d_l*). The mean-loss activation
    /// gradient is this divided by the batch size.
    Matrix activation_grads;
};

/// Reverse-mode gradients of the mean cross-entropy over the batch.
/// `trace` may carry a replaced (perturbed) a^(l); the perturbation is
/// treated as an additive constant.
GradientBundle backward(const MlpNetwork& net, const ForwardTrace& trace,
                        const std::vector<int>& labels, std::size_t grad_layer);

/// Per-sample ∂l_i/∂a_i^(l) of the subnetwork loss l(f_{l+1:L}(a_i), y_i),
/// evaluated directly at the provided activations. Used by the PGD solver.
Matrix activation_loss_grads(const MlpNetwork& net, std::size_t l,
                             const Matrix& activations, const std::vector<int>& labels);

/// Largest singular value estimate via power iteration on mᵀm.
/// Monotone nondecreasing in `iterations`; deterministic per seed.
double spectral_norm(const Matrix& m, int iterations, std::uint64_t seed);

/// Product of spectral norms of W^(j) for j > l (Lipschitz bound of f_{l+1:L}
/// for 1-Lipschitz activations).
double downstream_lipschitz_bound(const MlpNetwork& net, std::size_t l,
                                  int iterations = 200, std::uint64_t seed = 1);

// Versioned text checkpoint; doubles are stored as hexfloats so the
// round-trip is bit-exact.
void save_checkpoint(const MlpNetwork& net, const std::string& path);
MlpNetwork load_checkpoint(const std::string& path);

}  // namespace lpa
