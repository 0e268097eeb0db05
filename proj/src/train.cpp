#include "lpa/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "lpa/analyze.hpp"
#include "lpa/rng.hpp"

namespace lpa {

std::string method_name(Method m) {
    switch (m) {
        case Method::CE: return "ce";
        case Method::Dropout: return "dropout";
        case Method::ManifoldMixup: return "manifold_mixup";
        case Method::Ada: return "ada";
        case Method::Lpl: return "lpl";
        case Method::Lpa: return "lpa";
        case Method::LplPlusLpa: return "lpl_plus_lpa";
    }
    return "unknown";
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (!(lr.initial > 0.0)) throw std::invalid_argument("config: learning rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw std::invalid_argument("config: momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw std::invalid_argument("config: weight_decay must be >= 0");
    if (hidden.empty()) throw std::invalid_argument("config: need at least one hidden layer");
    if (method.method == Method::Dropout &&
        !(method.dropout_keep > 0.0 && method.dropout_keep <= 1.0))
        throw std::invalid_argument("config: dropout keep probability must be in (0, 1]");
    if (method.pgd.steps < 1) throw std::invalid_argument("config: pgd steps must be >= 1");
    if (method.bounds.epsilon < 0.0 || method.logit_bounds.epsilon < 0.0)
        throw std::invalid_argument("config: epsilon must be >= 0");
    if (method.bounds.delta_epsilon < 0.0 || method.logit_bounds.delta_epsilon < 0.0)
        throw std::invalid_argument("config: delta_epsilon must be >= 0");
    if (!(method.bounds.beta > 0.0 && method.bounds.beta <= 1.0))
        throw std::invalid_argument("config: beta must be in (0, 1]");
}

double lr_at_epoch(const LrSchedule& lr, int epoch, int total_epochs) {
    double v = lr.initial;
    if (epoch > total_epochs / 2) v *= lr.decay_factor;
    if (epoch > (3 * total_epochs) / 4) v *= lr.decay_factor;
    return v;
}

void sgd_step(MlpNetwork& net, const GradientBundle& grads, SgdState& state,
              double lr, double momentum, double weight_decay) {
    const std::size_t L = net.depth();
    if (grads.weight_grads.size() != L)
        throw std::invalid_argument("sgd_step: gradient/layer count mismatch");
    if (state.weight_velocity.empty()) {
        state.weight_velocity.resize(L);
        state.bias_velocity.resize(L);
        for (std::size_t l = 0; l < L; ++l) {
            state.weight_velocity[l] = Matrix(net.layers[l].out_dim(), net.layers[l].in_dim());
            state.bias_velocity[l].assign(net.layers[l].out_dim(), 0.0);
        }
    }
    for (std::size_t l = 0; l < L; ++l) {
        auto& W = net.layers[l].weights;
        auto& vW = state.weight_velocity[l];
        const auto& gW = grads.weight_grads[l];
        if (gW.rows != W.rows || gW.cols != W.cols)
            throw std::invalid_argument("sgd_step: weight gradient shape mismatch at layer " +
                                        std::to_string(l + 1));
        for (std::size_t i = 0; i < W.size(); ++i) {
            vW.data[i] = momentum * vW.data[i] + gW.data[i] + weight_decay * W.data[i];
            W.data[i] -= lr * vW.data[i];
        }
        auto& b = net.layers[l].bias;
        auto& vb = state.bias_velocity[l];
        const auto& gb = grads.bias_grads[l];
        for (std::size_t j = 0; j < b.size(); ++j) {
            vb[j] = momentum * vb[j] + gb[j];  // no decay on biases
            b[j] -= lr * vb[j];
        }
    }
}

namespace {

double gamma_draw(Rng& rng, double shape) {
    if (shape < 1.0) {
        const double u = rng.uniform();
        return gamma_draw(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        const double x = rng.normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = rng.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

double beta_draw(Rng& rng, double alpha) {
    const double x = gamma_draw(rng, alpha);
    const double y = gamma_draw(rng, alpha);
    return x / (x + y);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_stream(seed, "epoch.shuffle", static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
    return idx;
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(rows.size(), m.cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto src = m.row(rows[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

struct EpochSchedule {
    ClassPartition part;
    BoundConfig bounds;        // tau resolved for this epoch
    BoundConfig logit_bounds;  // tau resolved, LplPlusLpa only
    std::vector<std::size_t> layers;  // active perturbation layers, ascending
};

bool uses_partition(Method m) {
    return m == Method::Lpl || m == Method::Lpa || m == Method::LplPlusLpa;
}

// One class-level PGD solve with invariant bookkeeping.
ClassDelta solve_class(const MlpNetwork& net, std::size_t l, const Matrix& class_acts, int c,
                       Sign sign, double eps_l, const PgdConfig& pgd, RunRecord& rec) {
    DeltaResult res = lpa_class_delta(net, l, class_acts, c, sign, eps_l, pgd);
    const double excess = l2_norm(res.delta) - eps_l;
    if (excess > rec.max_norm_excess) rec.max_norm_excess = excess;
    if (excess > 1e-9) rec.projection_violations++;
    const bool ok = sign == Sign::Expand ? res.perturbed_loss >= res.clean_loss - 1e-12
                                         : res.perturbed_loss <= res.clean_loss + 1e-12;
    if (!ok) rec.direction_violations++;
    return {std::move(res.delta), eps_l, sign};
}

PerturbationPlan build_plan(const MlpNetwork& net, std::size_t l, const ForwardTrace& trace,
                            const std::vector<int>& labels, const ClassPartition& part,
                            const BoundConfig& bounds, const PgdConfig& pgd, RunRecord& rec) {
    const std::size_t L = net.depth();
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    std::vector<std::pair<int, Matrix>> class_acts;
    class_acts.reserve(by_class.size());
    for (const auto& [c, idx] : by_class)
        class_acts.emplace_back(c, gather_rows(trace.activation(l), idx));

    PerturbationPlan plan;
    plan.layer = l;
    std::vector<ClassDelta> deltas(class_acts.size());
    std::vector<RunRecord> local(class_acts.size());
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(class_acts.size());
#pragma omp parallel for schedule(dynamic) if (n > 1)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        const int c = class_acts[static_cast<std::size_t>(k)].first;
        const Sign sign = part.membership[static_cast<std::size_t>(c)];
        const double eps_l =
            layer_bound(class_bound(bounds, part.statistic[static_cast<std::size_t>(c)]),
                        bounds.beta, l, L);
        deltas[static_cast<std::size_t>(k)] =
            solve_class(net, l, class_acts[static_cast<std::size_t>(k)].second, c, sign, eps_l,
                        pgd, local[static_cast<std::size_t>(k)]);
    }
    for (std::size_t k = 0; k < class_acts.size(); ++k) {
        plan.per_class.emplace(class_acts[k].first, std::move(deltas[k]));
        rec.projection_violations += local[k].projection_violations;
        rec.direction_violations += local[k].direction_violations;
        rec.max_norm_excess = std::max(rec.max_norm_excess, local[k].max_norm_excess);
    }
    return plan;
}

// Replaces a^(l) in the trace and recomputes everything downstream.
void replace_activation(const MlpNetwork& net, ForwardTrace& trace, std::size_t l,
                        Matrix replacement) {
    trace.act[l - 1] = std::move(replacement);
    for (std::size_t j = l; j < net.depth(); ++j) {
        const Matrix& in = trace.activation(j);
        Matrix z = matmul_nt(in, net.layers[j].weights);
        for (std::size_t i = 0; i < z.rows; ++i)
            for (std::size_t k = 0; k < z.cols; ++k) z(i, k) += net.layers[j].bias[k];
        Matrix a = z;
        if (net.layers[j].activation == Activation::ReLU)
            for (double& x : a.data) x = x > 0.0 ? x : 0.0;
        trace.pre[j] = std::move(z);
        trace.act[j] = std::move(a);
    }
}

struct Trainer {
    const TrainConfig& cfg;
    const Dataset& train_set;
    const Dataset& val_set;
    MlpNetwork net;
    SgdState opt;
    RunRecord rec;
    std::vector<double> acc_ema;  // Balanced split statistic
    std::size_t current_layer = 0;  // adaptive selection result
    std::vector<std::size_t> eval_sample;  // fixed seeded subsample for adaptive scoring

    Trainer(const TrainConfig& c, const Dataset& tr, const Dataset& va)
        : cfg(c), train_set(tr), val_set(va) {
        cfg.validate();
        net = make_mlp(train_set.features.cols, cfg.hidden, train_set.classes, cfg.seed);
        if (!cfg.method.layer_choice.layers.empty())
            for (std::size_t l : cfg.method.layer_choice.layers)
                if (l < 1 || l > net.depth())
                    throw std::invalid_argument("config: perturbation layer " +
                                                std::to_string(l) + " out of range [1, " +
                                                std::to_string(net.depth()) + "]");
        Rng rng = make_stream(cfg.seed, "adaptive.sample");
        const std::size_t n = std::min<std::size_t>(512, train_set.size());
        std::vector<std::size_t> idx(train_set.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
        eval_sample.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n));
    }

    std::size_t baseline_layer() const {
        const std::size_t l = cfg.method.baseline_layer;
        return l == 0 ? net.depth() - 1 : l;
    }

    BoundConfig resolve_tau(const BoundConfig& b, const std::vector<double>& stats) const {
        BoundConfig out = b;
        if (cfg.method.split == SplitMode::DomainGen)
            out.tau = 0.0;  // all statistics are 0; ε_c = ε
        else if (cfg.method.split == SplitMode::Balanced && cfg.method.tau_is_mean)
            out.tau = std::accumulate(stats.begin(), stats.end(), 0.0) /
                      static_cast<double>(stats.size());
        return out;
    }

    EpochSchedule refresh_schedule(int epoch) {
        EpochSchedule sched;
        if (!uses_partition(cfg.method.method)) return sched;

        std::vector<double> acc = per_class_accuracy(net, val_set);
        if (acc_ema.empty())
            acc_ema = acc;
        else
            for (std::size_t c = 0; c < acc.size(); ++c)
                acc_ema[c] = 0.9 * acc_ema[c] + 0.1 * acc[c];
        const std::vector<double> stats =
            split_statistic(cfg.method.split, acc_ema, train_set.class_counts);

        sched.bounds = resolve_tau(cfg.method.bounds, stats);
        sched.logit_bounds = resolve_tau(cfg.method.logit_bounds, stats);
        const double split_tau = cfg.method.split == SplitMode::LongTail
                                     ? cfg.method.bounds.tau
                                     : sched.bounds.tau;
        sched.part = partition(cfg.method.split, stats, split_tau);

        const auto& lc = cfg.method.layer_choice;
        switch (cfg.method.method) {
            case Method::Lpl:
                sched.layers = {net.depth()};
                break;
            case Method::Lpa:
            case Method::LplPlusLpa: {
                switch (lc.strategy) {
                    case LayerStrategy::Fixed:
                        sched.layers = lc.layers.empty()
                                           ? std::vector<std::size_t>{net.depth() - 1}
                                           : lc.layers;
                        break;
                    case LayerStrategy::Multi:
                        sched.layers = lc.layers;
                        break;
                    case LayerStrategy::Adaptive: {
                        const int period = std::max(1, lc.eval_period);
                        if (current_layer == 0 || (epoch - 1) % period == 0) {
                            Matrix feats = gather_rows(train_set.features, eval_sample);
                            std::vector<int> labs(eval_sample.size());
                            for (std::size_t i = 0; i < eval_sample.size(); ++i)
                                labs[i] = train_set.labels[eval_sample[i]];
                            auto scores = evaluate_layers(net, feats, labs, lc.layers,
                                                          sched.part, sched.bounds,
                                                          cfg.method.pgd);
                            current_layer = select_layer(scores);
                        }
                        sched.layers = {current_layer};
                        break;
                    }
                }
                if (cfg.method.method == Method::LplPlusLpa) sched.layers.push_back(net.depth());
                break;
            }
            default:
                break;
        }
        std::sort(sched.layers.begin(), sched.layers.end());
        return sched;
    }

    void perturb_batch(ForwardTrace& trace, const std::vector<int>& labels,
                       const EpochSchedule& sched, int epoch, std::size_t batch_start) {
        const Method m = cfg.method.method;
        if (m == Method::CE) return;

        if (m == Method::Dropout) {
            const std::size_t l = baseline_layer();
            const std::uint64_t s =
                splitmix64(cfg.seed ^ fnv1a("dropout.epoch") ^ static_cast<std::uint64_t>(epoch));
            const Matrix& a = trace.activation(l);
            Matrix delta = dropout_delta(a, cfg.method.dropout_keep, s, batch_start);
            Matrix pert = a;
            for (std::size_t i = 0; i < pert.size(); ++i) pert.data[i] += delta.data[i];
            replace_activation(net, trace, l, std::move(pert));
            return;
        }
        if (m == Method::ManifoldMixup) {
            const std::size_t l = baseline_layer();
            const Matrix& a = trace.activation(l);
            Matrix pert = a;
            Rng partner_rng = make_stream(cfg.seed, "mixup.partner",
                                          static_cast<std::uint64_t>(epoch), batch_start);
            for (std::size_t i = 0; i < a.rows; ++i) {
                const std::size_t j = partner_rng.uniform_int(a.rows);
                double lambda = 0.0;
                if (cfg.method.mixup_alpha > 0.0) {
                    Rng lr = make_stream(cfg.seed, "mixup.lambda",
                                         static_cast<std::uint64_t>(epoch), batch_start + i);
                    lambda = beta_draw(lr, cfg.method.mixup_alpha);
                }
                if (lambda == 0.0) continue;
                auto delta = manifold_mixup_delta(a.row(i), a.row(j), lambda);
                axpy(1.0, delta, pert.row(i));
            }
            replace_activation(net, trace, l, std::move(pert));
            return;
        }
        if (m == Method::Ada) {
            const std::size_t l = baseline_layer();
            const Matrix& a = trace.activation(l);
            Matrix pert = a;
            const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(dynamic) if (n > 1)
            for (std::ptrdiff_t i = 0; i < n; ++i) {
                std::vector<double> ai(a.row(i).begin(), a.row(i).end());
                auto delta = adversarial_delta(net, l, ai, labels[static_cast<std::size_t>(i)],
                                               cfg.method.ada_epsilon, cfg.method.pgd);
                axpy(1.0, delta, pert.row(i));
            }
            replace_activation(net, trace, l, std::move(pert));
            return;
        }

        // LPL / LPA / LPL+LPA: class-level plans, applied in ascending layer order.
        for (std::size_t l : sched.layers) {
            const bool logit_plan = cfg.method.method == Method::LplPlusLpa && l == net.depth();
            const BoundConfig& bounds = logit_plan ? sched.logit_bounds : sched.bounds;
            PerturbationPlan plan = build_plan(net, l, trace, labels, sched.part, bounds,
                                               pgd_for_layer(l), rec);
            replace_activation(net, trace, l, apply_plan(trace, plan, labels));
        }
    }

    PgdConfig pgd_for_layer(std::size_t l) const {
        PgdConfig p = cfg.method.pgd;
        const std::size_t d = net.layer_dim(l);
        switch (cfg.method.rank_mode) {
            case RankMode::Full: p.rank = 0; break;
            case RankMode::Quarter: p.rank = std::max<std::size_t>(1, d / 4); break;
            case RankMode::Explicit:
                if (cfg.method.rank < 1 || cfg.method.rank > d)
                    throw std::invalid_argument("config: rank out of range [1, " +
                                                std::to_string(d) + "] at layer " +
                                                std::to_string(l));
                p.rank = cfg.method.rank;
                break;
        }
        return p;
    }

    RunRecord run() {
        const std::size_t n = train_set.size();
        for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
            const auto t0 = std::chrono::steady_clock::now();
            const double lr = lr_at_epoch(cfg.lr, epoch, cfg.epochs);
            EpochSchedule sched = refresh_schedule(epoch);

            std::vector<std::size_t> order = shuffled_indices(n, cfg.seed, epoch);
            double loss_sum = 0.0;
            std::vector<std::size_t> train_correct(train_set.classes, 0),
                train_total(train_set.classes, 0);

            for (std::size_t start = 0; start < n; start += cfg.batch_size) {
                const std::size_t end = std::min(n, start + cfg.batch_size);
                std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                              order.begin() + static_cast<std::ptrdiff_t>(end));
                Matrix batch = gather_rows(train_set.features, rows);
                std::vector<int> labels(rows.size());
                for (std::size_t i = 0; i < rows.size(); ++i)
                    labels[i] = train_set.labels[rows[i]];

                ForwardTrace trace = forward_full(net, batch);
                // clean-logit predictions for the running train accuracy
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    auto row = trace.logits().row(i);
                    const auto pred = std::distance(
                        row.begin(), std::max_element(row.begin(), row.end()));
                    const auto c = static_cast<std::size_t>(labels[i]);
                    train_total[c]++;
                    if (pred == labels[i]) train_correct[c]++;
                }

                perturb_batch(trace, labels, sched, epoch, start);

                CrossEntropy ce = cross_entropy(trace.logits(), labels);
                loss_sum += ce.mean_loss * static_cast<double>(rows.size());
                GradientBundle grads = backward(net, trace, labels, net.depth());
                sgd_step(net, grads, opt, lr, cfg.momentum, cfg.weight_decay);
            }

            EpochStats es;
            es.epoch = epoch;
            es.mean_train_loss = loss_sum / static_cast<double>(n);
            es.layers_used = sched.layers;
            std::vector<double> val_acc = per_class_accuracy(net, val_set);
            es.per_class.resize(train_set.classes);
            std::size_t correct = 0;
            for (std::size_t c = 0; c < train_set.classes; ++c) {
                auto& pc = es.per_class[c];
                pc.train_accuracy = train_total[c]
                                        ? static_cast<double>(train_correct[c]) /
                                              static_cast<double>(train_total[c])
                                        : 0.0;
                pc.val_accuracy = c < val_acc.size() ? val_acc[c] : 0.0;
                correct += train_correct[c];
                if (!sched.part.statistic.empty()) {
                    pc.statistic = sched.part.statistic[c];
                    pc.set = sched.part.membership[c];
                    pc.eps_c = class_bound(sched.bounds, pc.statistic);
                    pc.eps_c_layer = sched.layers.empty()
                                         ? pc.eps_c
                                         : layer_bound(pc.eps_c, sched.bounds.beta,
                                                       sched.layers.front(), net.depth());
                }
            }
            es.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
            double vtotal = 0.0, vcorrect = 0.0;
            for (std::size_t c = 0; c < val_set.classes; ++c) {
                vtotal += static_cast<double>(val_set.class_counts[c]);
                vcorrect += val_acc[c] * static_cast<double>(val_set.class_counts[c]);
            }
            es.val_accuracy = vtotal > 0.0 ? vcorrect / vtotal : 0.0;
            es.wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
            rec.epochs.push_back(std::move(es));
        }
        rec.net = std::move(net);
        return std::move(rec);
    }
};

}  // namespace

RunRecord train_with_val(const TrainConfig& cfg, const Dataset& train_set,
                         const Dataset& val_set) {
    Trainer t(cfg, train_set, val_set);
    return t.run();
}

RunRecord train(const TrainConfig& cfg, const Dataset& dataset) {
    cfg.validate();
    TrainValSplit split = split_train_val(dataset, cfg.val_fraction, cfg.seed);
    return train_with_val(cfg, split.train, split.val);
}

RunRecord train_lpl(const TrainConfig& cfg, const Dataset& dataset) {
    TrainConfig c = cfg;
    c.method.method = Method::Lpl;
    return train(c, dataset);
}

void write_metrics_csv(const RunRecord& rec, const std::string& path) {
    const std::string tmp = path + ".partial";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
        out << "epoch,class,statistic,set,eps_c,eps_c_layer,train_accuracy,val_accuracy,"
               "mean_train_loss,wall_ms,layers\n";
        char buf[64];
        auto fmt = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return std::string(buf);
        };
        for (const auto& es : rec.epochs) {
            for (std::size_t c = 0; c < es.per_class.size(); ++c) {
                const auto& pc = es.per_class[c];
                out << es.epoch << "," << c << "," << fmt(pc.statistic) << ","
                    << (pc.set == Sign::Expand ? "P_a" : "N_a") << "," << fmt(pc.eps_c) << ","
                    << fmt(pc.eps_c_layer) << "," << fmt(pc.train_accuracy) << ","
                    << fmt(pc.val_accuracy) << ",,,\n";
            }
            out << es.epoch << ",-1,,,,," << fmt(es.train_accuracy) << ","
                << fmt(es.val_accuracy) << "," << fmt(es.mean_train_loss) << ","
                << fmt(es.wall_ms) << ",";
            for (std::size_t i = 0; i < es.layers_used.size(); ++i)
                out << (i ? ";" : "") << es.layers_used[i];
            out << "\n";
        }
        if (!out) throw std::runtime_error("metrics write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace lpa
