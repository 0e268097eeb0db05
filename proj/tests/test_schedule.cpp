#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "lpa/rng.hpp"
#include "lpa/schedule.hpp"

using namespace lpa;

TEST_CASE("split statistic per mode") {
    auto bal = split_statistic(SplitMode::Balanced, {0.9, 0.4, 0.7}, {});
    CHECK(bal == std::vector<double>{0.9, 0.4, 0.7});

    auto lt = split_statistic(SplitMode::LongTail, {}, {100, 10, 1});
    CHECK(lt[0] == doctest::Approx(1.0));
    CHECK(lt[1] == doctest::Approx(0.1));
    CHECK(lt[2] == doctest::Approx(0.01));

    auto dg = split_statistic(SplitMode::DomainGen, {0.5, 0.5, 0.5, 0.5}, {});
    CHECK(dg == std::vector<double>(4, 0.0));

    CHECK_THROWS_AS(split_statistic(SplitMode::Balanced, {0.5}, {}), std::invalid_argument);
    CHECK_THROWS_AS(split_statistic(SplitMode::LongTail, {}, {3}), std::invalid_argument);
}

TEST_CASE("partition rules") {
    // Balanced: below the mean expands; equality contracts
    ClassPartition p = partition(SplitMode::Balanced, {0.9, 0.4, 0.7, 0.8}, 0.0);
    // mean = 0.7
    CHECK_FALSE(p.in_positive_set(0));
    CHECK(p.in_positive_set(1));
    CHECK_FALSE(p.in_positive_set(2));  // tie with the mean goes to N_a
    CHECK_FALSE(p.in_positive_set(3));

    // LongTail: threshold is τ
    ClassPartition q = partition(SplitMode::LongTail, {1.0, 0.1, 0.01}, 0.1);
    CHECK_FALSE(q.in_positive_set(0));
    CHECK_FALSE(q.in_positive_set(1));  // s̄ = τ goes to N_a
    CHECK(q.in_positive_set(2));

    // DomainGen: everything expands
    ClassPartition r = partition(SplitMode::DomainGen, {0.0, 0.0}, 0.5);
    CHECK(r.in_positive_set(0));
    CHECK(r.in_positive_set(1));
}

TEST_CASE("bound formulas hand values") {
    BoundConfig cfg;
    cfg.epsilon = 0.1;
    cfg.delta_epsilon = 0.2;
    cfg.tau = 0.5;
    CHECK(class_bound(cfg, 0.9) == doctest::Approx(0.1 + 0.2 * 0.4).epsilon(1e-15));
    CHECK(class_bound(cfg, 0.1) == doctest::Approx(0.1 + 0.2 * 0.4).epsilon(1e-15));
    CHECK(class_bound(cfg, 0.5) == doctest::Approx(0.1).epsilon(1e-15));

    CHECK(layer_bound(1.0, 0.5, 1, 3) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(layer_bound(1.0, 0.7, 2, 3) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(layer_bound(0.3, 0.7, 3, 3) == doctest::Approx(0.3).epsilon(1e-15));  // last layer: γ = 1
    CHECK_THROWS_AS(layer_bound(1.0, 0.7, 0, 3), std::invalid_argument);
    CHECK_THROWS_AS(layer_bound(1.0, 0.7, 4, 3), std::invalid_argument);
}

TEST_CASE("layer scores match an independent recomputation") {
    MlpNetwork net = make_mlp(4, {6, 5}, 3, 17);
    Rng rng = make_stream(18, "test.batch");
    Matrix x(9, 4);
    for (double& v : x.data) v = rng.normal();
    std::vector<int> y = {0, 1, 2, 0, 1, 2, 0, 1, 2};

    BoundConfig bounds;
    bounds.epsilon = 0.1;
    bounds.delta_epsilon = 0.1;
    bounds.tau = 0.5;
    bounds.beta = 0.7;
    ClassPartition part = partition(SplitMode::LongTail, {1.0, 0.4, 0.05}, 0.5);
    PgdConfig pgd;

    std::vector<std::size_t> candidates = {1, 2, 3};
    auto scores = evaluate_layers(net, x, y, candidates, part, bounds, pgd);
    REQUIRE(scores.size() == 3);

    ForwardTrace trace = forward_full(net, x);
    for (std::size_t idx = 0; idx < candidates.size(); ++idx) {
        const std::size_t l = candidates[idx];
        double expect = 0.0;
        for (int c = 0; c < 3; ++c) {
            Matrix acts(3, net.layer_dim(l));
            std::size_t r = 0;
            for (std::size_t i = 0; i < y.size(); ++i)
                if (y[i] == c) {
                    auto src = trace.activation(l).row(i);
                    std::copy(src.begin(), src.end(), acts.row(r++).begin());
                }
            double eps_l = layer_bound(class_bound(bounds, part.statistic[c]), bounds.beta, l,
                                       net.depth());
            DeltaResult res = lpa_class_delta(net, l, acts, c, part.membership[c], eps_l, pgd);
            expect += std::abs(res.perturbed_loss - res.clean_loss);
        }
        CHECK(scores[idx].layer == l);
        CHECK(scores[idx].score == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("layer selection: argmax with ties to the smallest index") {
    CHECK(select_layer({{1, 0.5}, {2, 0.9}, {3, 0.2}}) == 2);
    CHECK(select_layer({{3, 0.7}, {1, 0.7}, {2, 0.1}}) == 1);  // tie, order-independent
    CHECK(select_layer({{1, 0.7}, {3, 0.7}, {2, 0.1}}) == 1);
    CHECK(select_layer({{2, 0.0}}) == 2);
    CHECK_THROWS_AS(select_layer({}), std::invalid_argument);
}
