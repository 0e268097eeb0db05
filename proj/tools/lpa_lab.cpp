// lpa-lab: experiment driver (train / compare / layer-scan / analyze).

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "lpa/analyze.hpp"
#include "lpa/config.hpp"

namespace fs = std::filesystem;
using namespace lpa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void apply_thread_cap() {
#ifdef _OPENMP
    if (const char* env = std::getenv("LPA_LAB_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }
#endif
}

Dataset build_dataset(const DatasetSpec& spec, Dataset* held_out = nullptr) {
    switch (spec.scenario) {
        case Scenario::Balanced:
            return gen_balanced(spec);
        case Scenario::LongTail:
            return gen_longtail(spec);
        case Scenario::DomainShift: {
            auto [train_set, test_set] = gen_domain_shift(spec);
            if (held_out) *held_out = std::move(test_set);
            return std::move(train_set);
        }
    }
    throw std::runtime_error("unknown scenario");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct RunOutput {
    RunRecord record;
    fs::path dir;
};

RunOutput execute_run(const RunConfig& cfg) {
    const fs::path dir = fs::path(cfg.output_dir) / ("run-" + run_id(cfg));
    fs::create_directories(dir);
    const fs::path marker = dir / "FAILED";
    std::error_code ec;
    fs::remove(marker, ec);
    try {
        {
            std::ofstream echo(dir / "config.json");
            echo << dump_effective(cfg);
        }
        Dataset held;
        Dataset data = build_dataset(cfg.dataset, &held);
        RunRecord rec = cfg.dataset.scenario == Scenario::DomainShift
                            ? train_with_val(cfg.train, data, held)
                            : train(cfg.train, data);
        write_metrics_csv(rec, (dir / "metrics.csv").string());
        save_checkpoint(rec.net, (dir / "checkpoint.txt").string());
        return {std::move(rec), dir};
    } catch (...) {
        std::ofstream(marker) << "run failed; outputs in this directory are incomplete\n";
        throw;
    }
}

int cmd_train(const std::string& config_path) {
    RunConfig cfg = parse_config(config_path);
    RunOutput out = execute_run(cfg);
    const auto& last = out.record.epochs.back();
    std::cout << "run " << out.dir.string() << "\n"
              << "method " << method_name(cfg.train.method.method) << " epochs "
              << cfg.train.epochs << "\n"
              << "final train loss " << last.mean_train_loss << " val accuracy "
              << last.val_accuracy << "\n";
    return kExitOk;
}

std::vector<std::size_t> tail_classes(const Dataset& d, std::size_t k) {
    std::vector<std::size_t> order(d.classes);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return d.class_counts[a] < d.class_counts[b];
    });
    order.resize(std::min(k, order.size()));
    return order;
}

int cmd_compare(const std::string& config_path) {
    CompareSpec spec = parse_compare_config(config_path);
    fs::create_directories(spec.output_dir);
    std::ofstream summary(fs::path(spec.output_dir) / "compare_summary.csv");
    summary << "method,seeds,mean_val_accuracy,std_val_accuracy,mean_tail_accuracy\n";

    Dataset probe = build_dataset(spec.dataset);
    const auto tails = tail_classes(probe, 3);

    for (const auto& method : spec.methods) {
        std::vector<double> accs, tail_accs;
        for (std::uint64_t seed : spec.seeds) {
            RunConfig cfg;
            cfg.dataset = spec.dataset;
            cfg.train = spec.train;
            cfg.train.method = method;
            cfg.train.seed = seed;
            cfg.seed = seed;
            cfg.output_dir = spec.output_dir;
            RunOutput out = execute_run(cfg);
            const auto& last = out.record.epochs.back();
            accs.push_back(last.val_accuracy);
            if (spec.dataset.scenario == Scenario::LongTail) {
                double t = 0.0;
                for (std::size_t c : tails) t += last.per_class[c].val_accuracy;
                tail_accs.push_back(t / static_cast<double>(tails.size()));
            }
        }
        const double n = static_cast<double>(accs.size());
        const double mean = std::accumulate(accs.begin(), accs.end(), 0.0) / n;
        double var = 0.0;
        for (double a : accs) var += (a - mean) * (a - mean);
        const double sd = accs.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
        const double tail_mean =
            tail_accs.empty()
                ? -1.0
                : std::accumulate(tail_accs.begin(), tail_accs.end(), 0.0) /
                      static_cast<double>(tail_accs.size());
        summary << method_name(method.method) << "," << accs.size() << "," << fmt(mean) << ","
                << fmt(sd) << "," << fmt(tail_mean) << "\n";
        std::cout << method_name(method.method) << ": val acc " << mean << " +/- " << sd
                  << (tail_mean >= 0.0 ? " tail acc " + std::to_string(tail_mean) : "") << "\n";
    }
    std::cout << "summary: " << (fs::path(spec.output_dir) / "compare_summary.csv").string()
              << "\n";
    return kExitOk;
}

int cmd_layer_scan(const std::string& config_path, const std::string& layers_arg) {
    RunConfig cfg = parse_config(config_path);
    std::vector<std::size_t> layers;
    std::stringstream ss(layers_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const long l = std::strtol(tok.c_str(), nullptr, 10);
        if (l < 1) throw std::invalid_argument("--layers: indices start at 1");
        layers.push_back(static_cast<std::size_t>(l));
    }
    if (layers.empty()) throw std::invalid_argument("--layers: empty list");

    Dataset data = build_dataset(cfg.dataset);
    auto rows = layer_scan(cfg.train, data, layers);

    fs::create_directories(cfg.output_dir);
    const fs::path table = fs::path(cfg.output_dir) / "layer_scan.csv";
    std::ofstream out(table);
    out << "layer,final_val_accuracy\n";
    for (const auto& r : rows) out << r.layer << "," << fmt(r.final_val_accuracy) << "\n";
    const fs::path plot = fs::path(cfg.output_dir) / "layer_scan_plot.csv";
    std::ofstream pd(plot);
    pd << "series,x,y\n";
    for (const auto& r : rows)
        pd << "val_accuracy," << r.layer << "," << fmt(r.final_val_accuracy) << "\n";
    for (const auto& r : rows)
        std::cout << "layer " << r.layer << ": val accuracy " << r.final_val_accuracy << "\n";
    std::cout << "table: " << table.string() << "\n";
    return kExitOk;
}

int cmd_analyze(const std::string& checkpoint_path, const std::string& dataset_path,
                const std::string& probes_arg, const std::string& out_dir, std::size_t layer,
                double epsilon, double radius, int trials) {
    if (!fs::exists(checkpoint_path))
        throw std::invalid_argument("checkpoint not found: " + checkpoint_path);
    MlpNetwork net = load_checkpoint(checkpoint_path);
    Dataset data = read_csv(dataset_path);
    if (data.features.cols != net.input_dim)
        throw std::invalid_argument("dataset feature dim " + std::to_string(data.features.cols) +
                                    " does not match checkpoint input dim " +
                                    std::to_string(net.input_dim));
    std::vector<std::string> probes;
    std::stringstream ss(probes_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) probes.push_back(tok);
    if (probes.empty()) throw std::invalid_argument("--probes: empty list");
    const std::size_t l = layer == 0 ? net.depth() - 1 : layer;
    if (l < 1 || l > net.depth()) throw std::invalid_argument("--layer out of range");

    fs::create_directories(out_dir);

    // probe sample: first 512 rows at most
    const std::size_t n = std::min<std::size_t>(512, data.size());
    Matrix feats(n, data.features.cols);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto src = data.features.row(i);
        std::copy(src.begin(), src.end(), feats.row(i).begin());
        labels[i] = data.labels[i];
    }

    for (const auto& probe : probes) {
        if (probe == "variation") {
            ForwardTrace trace = forward_full(net, feats);
            std::vector<double> acc = per_class_accuracy(net, data);
            ClassPartition part = partition(SplitMode::Balanced, acc, 0.0);
            BoundConfig bounds;
            bounds.epsilon = epsilon;
            PerturbationPlan plan;
            plan.layer = l;
            std::map<int, std::vector<std::size_t>> by_class;
            for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
            for (const auto& [c, idx] : by_class) {
                Matrix acts(idx.size(), net.layer_dim(l));
                for (std::size_t r = 0; r < idx.size(); ++r) {
                    auto src = trace.activation(l).row(idx[r]);
                    std::copy(src.begin(), src.end(), acts.row(r).begin());
                }
                const double eps_l = layer_bound(
                    class_bound(bounds, part.statistic[static_cast<std::size_t>(c)]),
                    bounds.beta, l, net.depth());
                DeltaResult res = lpa_class_delta(
                    net, l, acts, c, part.membership[static_cast<std::size_t>(c)], eps_l, {});
                plan.per_class.emplace(c, ClassDelta{std::move(res.delta), eps_l,
                                                     part.membership[static_cast<std::size_t>(c)]});
            }
            VariationReport rep = activation_variation(trace, plan, labels);
            std::ofstream out(fs::path(out_dir) / "variation.csv");
            out << "class,mean_delta_norm,mean_act_norm,ratio\n";
            for (const auto& cv : rep.classes)
                out << cv.cls << "," << fmt(cv.mean_delta_norm) << "," << fmt(cv.mean_act_norm)
                    << "," << fmt(cv.ratio) << "\n";
            std::cout << "variation report: " << (fs::path(out_dir) / "variation.csv").string()
                      << "\n";
        } else if (probe == "amplification") {
            std::ofstream out(fs::path(out_dir) / "amplification.csv");
            out << "layer,max_ratio,spectral_bound\n";
            ForwardTrace trace = forward_full(net, feats);
            for (std::size_t ll = 1; ll <= net.depth(); ++ll) {
                AmplificationEntry e =
                    amplification_probe(net, ll, trace.activation(ll), epsilon, trials, 1);
                out << e.layer << "," << fmt(e.max_ratio) << "," << fmt(e.spectral_bound) << "\n";
                std::cout << "layer " << ll << ": max ratio " << e.max_ratio << " bound "
                          << e.spectral_bound << "\n";
            }
        } else if (probe == "sharpness") {
            SharpnessResult res = sharpness_probe(net, feats, labels, l, radius, trials, 1);
            std::ofstream out(fs::path(out_dir) / "sharpness.csv");
            out << "layer,radius,trials,mean_increase,std_error\n";
            out << l << "," << fmt(radius) << "," << trials << "," << fmt(res.mean_increase)
                << "," << fmt(res.std_error) << "\n";
            std::cout << "sharpness at layer " << l << ": " << res.mean_increase << " +/- "
                      << res.std_error << "\n";
        } else {
            throw std::invalid_argument("unknown probe: " + probe);
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap();

    CLI::App app{"activation-perturbation training lab"};
    app.require_subcommand(1);

    std::string config_path, layers_arg, checkpoint_path, dataset_path;
    std::string probes_arg = "variation,amplification,sharpness";
    std::string analyze_out = "analysis";
    std::size_t layer = 0;
    double epsilon = 0.1, radius = 0.05;
    int trials = 200;

    auto* train_cmd = app.add_subcommand("train", "train one configured run");
    train_cmd->add_option("--config", config_path, "JSON run config")->required();

    auto* compare_cmd = app.add_subcommand("compare", "train several methods across seeds");
    compare_cmd->add_option("--config", config_path, "JSON compare config")->required();

    auto* scan_cmd = app.add_subcommand("layer-scan", "one full run per perturbation layer");
    scan_cmd->add_option("--config", config_path, "JSON run config")->required();
    scan_cmd->add_option("--layers", layers_arg, "comma-separated layer list")->required();

    auto* analyze_cmd = app.add_subcommand("analyze", "probe a saved checkpoint");
    analyze_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    analyze_cmd->add_option("--dataset", dataset_path, "dataset CSV")->required();
    analyze_cmd->add_option("--probes", probes_arg, "variation,amplification,sharpness");
    analyze_cmd->add_option("--out", analyze_out, "output directory");
    analyze_cmd->add_option("--layer", layer, "probe layer (default: penultimate)");
    analyze_cmd->add_option("--epsilon", epsilon, "perturbation bound for probes");
    analyze_cmd->add_option("--radius", radius, "sharpness probe radius");
    analyze_cmd->add_option("--trials", trials, "probe trials");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(config_path);
        if (compare_cmd->parsed()) return cmd_compare(config_path);
        if (scan_cmd->parsed()) return cmd_layer_scan(config_path, layers_arg);
        if (analyze_cmd->parsed())
            return cmd_analyze(checkpoint_path, dataset_path, probes_arg, analyze_out, layer,
                               epsilon, radius, trials);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}
