#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "lpa/net.hpp"

namespace lpa {

/// Expand = positive augmentation (loss ascent, set P_a);
/// Contract = negative augmentation (loss descent, set N_a).
enum class Sign { Expand, Contract };

struct PgdConfig {
    int steps = 3;
    double step_size = 0.0;    // 0 → auto: 2ε/T
    std::size_t rank = 0;      // 0 → full-rank search direction
    bool normalize_grad = true;
};

struct ClassDelta {
    std::vector<double> delta;  // δ̃_c^(l), length d_l
    double bound = 0.0;         // ε_c^(l)
    Sign sign = Sign::Expand;
};

/// Per-class, per-layer perturbation vectors with their effective bounds.
struct PerturbationPlan {
    std::size_t layer = 0;
    std::map<int, ClassDelta> per_class;  // keyed by class index
};

/// Diagnostics from one class-level PGD solve. `clean_loss` and
/// `perturbed_loss` are mean cross-entropy over the class batch.
struct DeltaResult {
    std::vector<double> delta;
    double clean_loss = 0.0;
    double perturbed_loss = 0.0;
};

/// Dropout as additive perturbation: δ = a ⊙ (m − 1), m_j ~ Bernoulli(p),
/// so a + δ = a ⊙ m. Each row draws from its own counter-based stream keyed
/// by `row_offset + i`, so parallel and sequential runs agree.
Matrix dropout_delta(const Matrix& a, double keep_prob, std::uint64_t seed,
                     std::uint64_t row_offset = 0);

/// Manifold-Mixup as additive perturbation: δ = λ(a_j − a_i).
std::vector<double> manifold_mixup_delta(std::span<const double> a_i,
                                         std::span<const double> a_j, double lambda);

/// Euclidean projection onto the ℓ2-ball of radius ε.
std::vector<double> project_l2(std::vector<double> delta, double epsilon);

/// Sample-level adversarial feature perturbation: T normalized ascent steps
/// on l(f_{l+1:L}(a + δ), y) with projection after each step.
std::vector<double> adversarial_delta(const MlpNetwork& net, std::size_t l,
                                      const std::vector<double>& a, int label,
                                      double epsilon, const PgdConfig& cfg);

/// Class-level PGD solve for δ̃_c^(l) shared by all rows of `class_batch`
/// (activations at layer l, all with label `c`). Expand maximizes the mean
/// class loss, Contract minimizes it; the best iterate (including δ = 0) is
/// returned, so the loss direction holds by construction. cfg.rank < d_l
/// restricts each step to the top-k right-singular subspace of the
/// per-sample gradient matrix.
DeltaResult lpa_class_delta(const MlpNetwork& net, std::size_t l, const Matrix& class_batch,
                            int c, Sign sign, double epsilon, const PgdConfig& cfg);

/// Low-rank variant: lpa_class_delta with the search direction confined to
/// the top-k gradient subspace.
DeltaResult low_rank_delta(const MlpNetwork& net, std::size_t l, const Matrix& class_batch,
                           int c, Sign sign, double epsilon, std::size_t k, PgdConfig cfg);

/// Rank-k projection of the class-averaged gradient: V_k V_kᵀ g with V_k the
/// top-k right singular vectors of the per-sample gradient matrix.
std::vector<double> project_grad_topk(const Matrix& per_sample_grads, std::size_t k,
                                      std::span<const double> g);

/// ã^(l): row i gets δ̃_{y_i} added; classes absent from the plan pass through.
Matrix apply_plan(const ForwardTrace& trace, const PerturbationPlan& plan,
                  const std::vector<int>& labels);

}  // namespace lpa
