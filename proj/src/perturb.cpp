#include "lpa/perturb.hpp"

#include <cmath>
#include <stdexcept>

#include "lpa/rng.hpp"
#include "lpa/svd.hpp"

namespace lpa {

Matrix dropout_delta(const Matrix& a, double keep_prob, std::uint64_t seed,
                     std::uint64_t row_offset) {
    if (!(keep_prob > 0.0 && keep_prob <= 1.0))
        throw std::invalid_argument("dropout_delta: keep_prob must be in (0, 1]");
    Matrix delta(a.rows, a.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        Rng rng = make_stream(seed, "dropout.row", row_offset + i);
        for (std::size_t j = 0; j < a.cols; ++j) {
            const bool keep = rng.uniform() < keep_prob;
            delta(i, j) = keep ? 0.0 : -a(i, j);
        }
    }
    return delta;
}

std::vector<double> manifold_mixup_delta(std::span<const double> a_i,
                                         std::span<const double> a_j, double lambda) {
    if (a_i.size() != a_j.size())
        throw std::invalid_argument("manifold_mixup_delta: dimension mismatch");
    std::vector<double> delta(a_i.size());
    for (std::size_t k = 0; k < a_i.size(); ++k) delta[k] = lambda * (a_j[k] - a_i[k]);
    return delta;
}

std::vector<double> project_l2(std::vector<double> delta, double epsilon) {
    if (epsilon < 0.0) throw std::invalid_argument("project_l2: negative radius");
    const double n = l2_norm(delta);
    if (n > epsilon) {
        const double f = epsilon / n;
        for (double& x : delta) x *= f;
    }
    return delta;
}

namespace {

double subnet_mean_loss(const MlpNetwork& net, std::size_t l, const Matrix& acts,
                        const std::vector<int>& labels) {
    return cross_entropy(forward_from(net, l, acts), labels).mean_loss;
}

Matrix add_row_broadcast(const Matrix& m, std::span<const double> v) {
    Matrix out = m;
    for (std::size_t i = 0; i < out.rows; ++i) axpy(1.0, v, out.row(i));
    return out;
}

std::vector<double> mean_rows(const Matrix& m) {
    std::vector<double> g(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) axpy(1.0, m.row(i), g);
    scale(g, 1.0 / static_cast<double>(m.rows));
    return g;
}

// Shared PGD loop over the mean class loss. `ascent` = true maximizes.
// Keeps the best iterate seen (δ = 0 included), so the returned loss is on
// the right side of the clean loss for either sign.
DeltaResult pgd_solve(const MlpNetwork& net, std::size_t l, const Matrix& batch,
                      const std::vector<int>& labels, bool ascent, double epsilon,
                      const PgdConfig& cfg) {
    if (cfg.steps < 1) throw std::invalid_argument("pgd: steps must be >= 1");
    const std::size_t d = batch.cols;
    if (cfg.rank > d) throw std::invalid_argument("pgd: rank exceeds layer dimension");

    DeltaResult res;
    res.delta.assign(d, 0.0);
    res.clean_loss = subnet_mean_loss(net, l, batch, labels);
    res.perturbed_loss = res.clean_loss;
    if (epsilon <= 0.0) return res;

    const double kappa = cfg.step_size > 0.0
                             ? cfg.step_size
                             : 2.0 * epsilon / static_cast<double>(cfg.steps);
    const double dir = ascent ? 1.0 : -1.0;

    std::vector<double> delta(d, 0.0);
    for (int t = 0; t < cfg.steps; ++t) {
        const Matrix perturbed = add_row_broadcast(batch, delta);
        const Matrix grads = activation_loss_grads(net, l, perturbed, labels);
        std::vector<double> g = mean_rows(grads);
        if (cfg.rank > 0 && cfg.rank < d) g = project_grad_topk(grads, cfg.rank, g);
        const double gn = l2_norm(g);
        if (gn == 0.0) break;
        if (cfg.normalize_grad) scale(g, 1.0 / gn);
        axpy(dir * kappa, g, delta);
        delta = project_l2(std::move(delta), epsilon);

        const double loss = subnet_mean_loss(net, l, add_row_broadcast(batch, delta), labels);
        const bool better = ascent ? loss > res.perturbed_loss : loss < res.perturbed_loss;
        if (better) {
            res.delta = delta;
            res.perturbed_loss = loss;
        }
    }
    return res;
}

}  // namespace

std::vector<double> adversarial_delta(const MlpNetwork& net, std::size_t l,
                                      const std::vector<double>& a, int label,
                                      double epsilon, const PgdConfig& cfg) {
    Matrix batch = Matrix::row_vector(a);
    return pgd_solve(net, l, batch, {label}, /*ascent=*/true, epsilon, cfg).delta;
}

DeltaResult lpa_class_delta(const MlpNetwork& net, std::size_t l, const Matrix& class_batch,
                            int c, Sign sign, double epsilon, const PgdConfig& cfg) {
    if (class_batch.rows == 0)
        throw std::invalid_argument("lpa_class_delta: empty class batch for class " +
                                    std::to_string(c));
    std::vector<int> labels(class_batch.rows, c);
    return pgd_solve(net, l, class_batch, labels, sign == Sign::Expand, epsilon, cfg);
}

DeltaResult low_rank_delta(const MlpNetwork& net, std::size_t l, const Matrix& class_batch,
                           int c, Sign sign, double epsilon, std::size_t k, PgdConfig cfg) {
    cfg.rank = k;
    return lpa_class_delta(net, l, class_batch, c, sign, epsilon, cfg);
}

std::vector<double> project_grad_topk(const Matrix& per_sample_grads, std::size_t k,
                                      std::span<const double> g) {
    TopKRightSingular svd = topk_right_singular(per_sample_grads, k);
    return project_onto_rowspan(svd.basis, g);
}

Matrix apply_plan(const ForwardTrace& trace, const PerturbationPlan& plan,
                  const std::vector<int>& labels) {
    const Matrix& a = trace.activation(plan.layer);
    Matrix out = a;
    for (std::size_t i = 0; i < out.rows; ++i) {
        auto it = plan.per_class.find(labels[i]);
        if (it == plan.per_class.end()) continue;
        if (it->second.delta.size() != out.cols)
            throw std::invalid_argument("apply_plan: delta dimension mismatch for class " +
                                        std::to_string(labels[i]));
        axpy(1.0, it->second.delta, out.row(i));
    }
    return out;
}

}  // namespace lpa
