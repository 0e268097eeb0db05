#include <doctest.h>

#include <stdexcept>

#include <Eigen/Dense>
#include <cmath>

#include "lpa/perturb.hpp"
#include "lpa/rng.hpp"
#include "lpa/svd.hpp"

using namespace lpa;

namespace {

Matrix random_batch(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng = make_stream(seed, "test.batch");
    Matrix x(n, d);
    for (double& v : x.data) v = rng.normal();
    return x;
}

double mean_class_loss(const MlpNetwork& net, std::size_t l, const Matrix& batch, int c,
                       std::span<const double> delta) {
    Matrix shifted = batch;
    for (std::size_t i = 0; i < shifted.rows; ++i) axpy(1.0, delta, shifted.row(i));
    std::vector<int> y(batch.rows, c);
    return cross_entropy(forward_from(net, l, shifted), y).mean_loss;
}

}  // namespace

TEST_CASE("dropout delta hand cases") {
    Matrix a = Matrix::row_vector({2, 4});
    // keep_prob = 1 keeps everything: δ = 0
    Matrix d1 = dropout_delta(a, 1.0, 7);
    CHECK(d1(0, 0) == 0.0);
    CHECK(d1(0, 1) == 0.0);
    // with any mask, a + δ = a ⊙ m, so δ_j ∈ {0, −a_j}
    Matrix d2 = dropout_delta(a, 0.5, 7);
    for (std::size_t j = 0; j < 2; ++j)
        CHECK((d2(0, j) == 0.0 || d2(0, j) == -a(0, j)));
    // row streams depend only on row_offset + i: shifting the offset realigns rows
    Matrix big = random_batch(4, 3, 99);
    Matrix whole = dropout_delta(big, 0.5, 13, 0);
    Matrix tail(2, 3);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) tail(i, j) = big(i + 2, j);
    Matrix tail_delta = dropout_delta(tail, 0.5, 13, 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(tail_delta(i, j) == whole(i + 2, j));
    CHECK_THROWS_AS(dropout_delta(a, 0.0, 7), std::invalid_argument);
}

TEST_CASE("manifold mixup delta hand cases") {
    std::vector<double> ai = {1, 2}, aj = {3, 6};
    auto d0 = manifold_mixup_delta(ai, aj, 0.0);
    CHECK(d0[0] == 0.0);
    CHECK(d0[1] == 0.0);
    auto d1 = manifold_mixup_delta(ai, aj, 1.0);  // lands on a_j
    CHECK(ai[0] + d1[0] == 3.0);
    CHECK(ai[1] + d1[1] == 6.0);
    auto dh = manifold_mixup_delta(ai, aj, 0.5);  // midpoint
    CHECK(ai[0] + dh[0] == 2.0);
    CHECK(ai[1] + dh[1] == 4.0);
}

TEST_CASE("l2 projection") {
    auto p = project_l2({3, 4}, 1.0);
    CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.8).epsilon(1e-15));
    auto inside = project_l2({0.1, 0.2}, 1.0);  // already feasible: unchanged
    CHECK(inside[0] == 0.1);
    CHECK(inside[1] == 0.2);
    CHECK_THROWS_AS(project_l2({1.0}, -0.5), std::invalid_argument);
}

TEST_CASE("adversarial delta matches the grid optimum on a 1-D linear net") {
    // single identity layer, logits = [w x, 0]; loss in x is monotone, so the
    // optimum of max_{|δ|<=ε} loss(x+δ) sits at x ± ε.
    MlpNetwork net;
    net.input_dim = 1;
    net.layers.push_back({Matrix::from_rows({{2.0}, {0.0}}), {0, 0}, Activation::Identity});
    PgdConfig cfg;
    cfg.steps = 5;
    for (double x0 : {-1.0, 0.3, 2.0}) {
        for (int label : {0, 1}) {
            auto d = adversarial_delta(net, 0, {x0}, label, 0.5, cfg);
            // grid oracle
            double best = -1e300, best_d = 0;
            for (int k = -1000; k <= 1000; ++k) {
                double dd = 0.5 * k / 1000.0;
                double loss = cross_entropy(forward_from(net, 0, Matrix::row_vector({x0 + dd})),
                                            {label}).mean_loss;
                if (loss > best) best = loss, best_d = dd;
            }
            CHECK(std::abs(d[0] - best_d) < 1e-6);
        }
    }
}

TEST_CASE("class delta: zero bound and singleton class") {
    MlpNetwork net = make_mlp(3, {6}, 4, 11);
    Matrix batch = random_batch(5, 3, 12);
    PgdConfig cfg;
    DeltaResult r0 = lpa_class_delta(net, 0, batch, 1, Sign::Expand, 0.0, cfg);
    CHECK(l2_norm(r0.delta) == 0.0);
    CHECK(r0.perturbed_loss == r0.clean_loss);

    // a class batch of one row equals the sample-level adversarial solve
    Matrix one(1, 3);
    for (std::size_t j = 0; j < 3; ++j) one(0, j) = batch(0, j);
    DeltaResult r1 = lpa_class_delta(net, 0, one, 2, Sign::Expand, 0.2, cfg);
    auto adv = adversarial_delta(net, 0, {one(0, 0), one(0, 1), one(0, 2)}, 2, 0.2, cfg);
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(r1.delta[j] - adv[j]) < 1e-10);

    CHECK_THROWS_AS(lpa_class_delta(net, 0, Matrix(0, 3), 0, Sign::Expand, 0.1, cfg),
                    std::invalid_argument);
}

TEST_CASE("class delta beats a dense polar grid in 2-D within 1e-4") {
    // 2-D perturbation space at the logit layer (C = 2): compare the PGD
    // objective value against an exhaustive polar grid over the ε-disk.
    for (std::uint64_t seed : {3ull, 4ull}) {
        MlpNetwork net = make_mlp(3, {5}, 2, seed);
        const std::size_t L = net.depth();
        ForwardTrace t = forward_full(net, random_batch(4, 3, seed + 50));
        const Matrix batch = t.logits();
        const double eps = 0.1;
        PgdConfig cfg;
        for (Sign sign : {Sign::Expand, Sign::Contract}) {
            DeltaResult r = lpa_class_delta(net, L, batch, 1, sign, eps, cfg);
            double best = sign == Sign::Expand ? -1e300 : 1e300;
            for (int ri = 0; ri <= 20; ++ri)
                for (int ti = 0; ti < 180; ++ti) {
                    double rad = eps * ri / 20.0, th = 2 * M_PI * ti / 180.0;
                    std::vector<double> d = {rad * std::cos(th), rad * std::sin(th)};
                    double loss = mean_class_loss(net, L, batch, 1, d);
                    best = sign == Sign::Expand ? std::max(best, loss) : std::min(best, loss);
                }
            if (sign == Sign::Expand)
                CHECK(r.perturbed_loss >= best - 1e-4);
            else
                CHECK(r.perturbed_loss <= best + 1e-4);
        }
    }
}

TEST_CASE("class delta invariants: feasibility and loss direction") {
    MlpNetwork net = make_mlp(4, {7, 5}, 3, 21);
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        Matrix batch = random_batch(6, net.layer_dim(1), seed + 60);
        for (Sign sign : {Sign::Expand, Sign::Contract}) {
            PgdConfig cfg;
            DeltaResult r = lpa_class_delta(net, 1, batch, 0, sign, 0.25, cfg);
            CHECK(l2_norm(r.delta) <= 0.25 + 1e-12);
            if (sign == Sign::Expand)
                CHECK(r.perturbed_loss >= r.clean_loss - 1e-12);
            else
                CHECK(r.perturbed_loss <= r.clean_loss + 1e-12);
            CHECK(mean_class_loss(net, 1, batch, 0, r.delta) ==
                  doctest::Approx(r.perturbed_loss).epsilon(1e-12));
        }
    }
}

TEST_CASE("low-rank projection oracle against a dense SVD") {
    Matrix g = random_batch(6, 5, 71);
    std::vector<double> v(5);
    Rng rng = make_stream(72, "test.vec");
    for (double& x : v) x = rng.normal();

    Eigen::MatrixXd eg(6, 5);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 5; ++j) eg(i, j) = g(i, j);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(eg, Eigen::ComputeThinV);
    for (std::size_t k = 1; k <= 5; ++k) {
        auto p = project_grad_topk(g, k, v);
        Eigen::MatrixXd vk = svd.matrixV().leftCols(k);
        Eigen::VectorXd ev = Eigen::Map<Eigen::VectorXd>(v.data(), 5);
        Eigen::VectorXd expect = vk * (vk.transpose() * ev);
        for (int j = 0; j < 5; ++j) CHECK(std::abs(p[j] - expect(j)) < 1e-8);
    }
}

TEST_CASE("low-rank search: degeneracy and rank-1 parallel rows") {
    MlpNetwork net = make_mlp(4, {6}, 3, 81);
    Matrix batch = random_batch(5, 4, 82);
    PgdConfig cfg;
    // k = d reproduces the full solve exactly (projection is a no-op)
    DeltaResult full = lpa_class_delta(net, 0, batch, 1, Sign::Expand, 0.2, cfg);
    DeltaResult lr = low_rank_delta(net, 0, batch, 1, Sign::Expand, 0.2, 4, cfg);
    for (std::size_t j = 0; j < 4; ++j) CHECK(lr.delta[j] == full.delta[j]);
    CHECK(lr.perturbed_loss == full.perturbed_loss);

    // identical rows make the gradient matrix rank one; k = 1 projection of
    // its own mean is exact, so the k = 1 solve equals the full solve
    Matrix same(5, 4);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 4; ++j) same(i, j) = batch(0, j);
    DeltaResult f1 = lpa_class_delta(net, 0, same, 2, Sign::Expand, 0.15, cfg);
    DeltaResult l1 = low_rank_delta(net, 0, same, 2, Sign::Expand, 0.15, 1, cfg);
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(l1.delta[j] - f1.delta[j]) < 1e-10);

    CHECK_THROWS_AS(low_rank_delta(net, 0, batch, 1, Sign::Expand, 0.2, 9, cfg),
                    std::invalid_argument);
}

TEST_CASE("apply_plan adds per-class deltas and passes absent classes through") {
    MlpNetwork net = make_mlp(2, {3}, 2, 91);
    Matrix x = Matrix::from_rows({{1, 1}, {2, 2}, {3, 3}});
    ForwardTrace t = forward_full(net, x);
    PerturbationPlan plan;
    plan.layer = 0;
    plan.per_class[0] = {{0.5, -0.5}, 1.0, Sign::Expand};
    std::vector<int> y = {0, 1, 0};
    Matrix out = apply_plan(t, plan, y);
    CHECK(out(0, 0) == 1.5);
    CHECK(out(0, 1) == 0.5);
    CHECK(out(1, 0) == 2.0);  // class 1 not in the plan
    CHECK(out(2, 0) == 3.5);

    PerturbationPlan bad;
    bad.layer = 0;
    bad.per_class[0] = {{1.0}, 1.0, Sign::Expand};
    CHECK_THROWS_AS(apply_plan(t, bad, y), std::invalid_argument);
}
