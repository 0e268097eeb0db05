#include "lpa/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lpa/rng.hpp"

namespace lpa {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why) {
    throw std::invalid_argument("config key '" + key + "': " + why);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object()) bad(path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.contains(it.key())) bad(path + "." + it.key(), "unknown key");
}

double get_num(const json& obj, const std::string& path, const std::string& key, double dflt) {
    if (!obj.contains(key)) return dflt;
    if (!obj[key].is_number()) bad(path + "." + key, "expected a number");
    return obj[key].get<double>();
}

std::uint64_t get_u64(const json& obj, const std::string& path, const std::string& key,
                      std::uint64_t dflt) {
    if (!obj.contains(key)) return dflt;
    if (!obj[key].is_number_unsigned() && !obj[key].is_number_integer())
        bad(path + "." + key, "expected an integer");
    return obj[key].get<std::uint64_t>();
}

std::string get_str(const json& obj, const std::string& path, const std::string& key,
                    const std::string& dflt) {
    if (!obj.contains(key)) return dflt;
    if (!obj[key].is_string()) bad(path + "." + key, "expected a string");
    return obj[key].get<std::string>();
}

DatasetSpec parse_dataset(const json& obj, const std::string& path, std::uint64_t root_seed) {
    check_keys(obj, path,
               {"scenario", "classes", "input_dim", "per_class", "imbalance", "radius", "noise",
                "train_rotations_deg", "test_rotation_deg", "seed"});
    DatasetSpec spec;
    const std::string scen = get_str(obj, path, "scenario", "balanced");
    if (scen == "balanced")
        spec.scenario = Scenario::Balanced;
    else if (scen == "longtail")
        spec.scenario = Scenario::LongTail;
    else if (scen == "domain_shift")
        spec.scenario = Scenario::DomainShift;
    else
        bad(path + ".scenario", "must be balanced|longtail|domain_shift");
    spec.classes = static_cast<std::size_t>(get_u64(obj, path, "classes", 10));
    if (spec.classes < 2) bad(path + ".classes", "must be >= 2");
    spec.input_dim = static_cast<std::size_t>(get_u64(obj, path, "input_dim", 16));
    spec.per_class = static_cast<std::size_t>(get_u64(obj, path, "per_class", 500));
    if (spec.per_class < 1) bad(path + ".per_class", "must be >= 1");
    spec.imbalance = get_num(obj, path, "imbalance", 1.0);
    if (spec.imbalance < 1.0) bad(path + ".imbalance", "must be >= 1");
    spec.radius = get_num(obj, path, "radius", 4.0);
    spec.noise = get_num(obj, path, "noise", 0.25);
    if (spec.noise < 0.0) bad(path + ".noise", "must be >= 0");
    spec.test_rotation_deg = get_num(obj, path, "test_rotation_deg", 90.0);
    if (obj.contains("train_rotations_deg")) {
        if (!obj["train_rotations_deg"].is_array())
            bad(path + ".train_rotations_deg", "expected an array of numbers");
        for (const auto& v : obj["train_rotations_deg"])
            spec.train_rotations_deg.push_back(v.get<double>());
    } else if (spec.scenario == Scenario::DomainShift) {
        spec.train_rotations_deg = {0.0, 30.0, 60.0};
    }
    spec.seed = get_u64(obj, path, "seed", root_seed);
    return spec;
}

BoundConfig parse_bounds(const json& obj, const std::string& path, const char* prefix) {
    BoundConfig b;
    const std::string p(prefix);
    b.epsilon = get_num(obj, path, p + "epsilon", 0.1);
    if (b.epsilon < 0.0) bad(path + "." + p + "epsilon", "must be >= 0");
    b.delta_epsilon = get_num(obj, path, p + "delta_epsilon", 0.0);
    if (b.delta_epsilon < 0.0) bad(path + "." + p + "delta_epsilon", "must be >= 0");
    b.tau = get_num(obj, path, p + "tau", 0.5);
    b.beta = get_num(obj, path, p + "beta", 0.7);
    if (!(b.beta > 0.0 && b.beta <= 1.0)) bad(path + "." + p + "beta", "must be in (0, 1]");
    return b;
}

MethodConfig parse_method(const json& obj, const std::string& path) {
    check_keys(obj, path,
               {"name", "dropout_keep", "mixup_alpha", "ada_epsilon", "baseline_layer", "split",
                "tau_is_mean", "epsilon", "delta_epsilon", "tau", "beta", "logit_epsilon",
                "logit_delta_epsilon", "logit_tau", "logit_beta", "pgd_steps", "pgd_step_size",
                "normalize_grad", "rank", "layer"});
    MethodConfig m;
    const std::string name = get_str(obj, path, "name", "");
    if (name == "ce")
        m.method = Method::CE;
    else if (name == "dropout")
        m.method = Method::Dropout;
    else if (name == "manifold_mixup")
        m.method = Method::ManifoldMixup;
    else if (name == "ada")
        m.method = Method::Ada;
    else if (name == "lpl")
        m.method = Method::Lpl;
    else if (name == "lpa")
        m.method = Method::Lpa;
    else if (name == "lpl_plus_lpa")
        m.method = Method::LplPlusLpa;
    else
        bad(path + ".name", "must be ce|dropout|manifold_mixup|ada|lpl|lpa|lpl_plus_lpa");

    m.dropout_keep = get_num(obj, path, "dropout_keep", 0.9);
    if (m.method == Method::Dropout && !(m.dropout_keep > 0.0 && m.dropout_keep <= 1.0))
        bad(path + ".dropout_keep", "must be in (0, 1]");
    m.mixup_alpha = get_num(obj, path, "mixup_alpha", 1.0);
    if (m.mixup_alpha < 0.0) bad(path + ".mixup_alpha", "must be >= 0");
    m.ada_epsilon = get_num(obj, path, "ada_epsilon", 0.1);
    if (m.ada_epsilon < 0.0) bad(path + ".ada_epsilon", "must be >= 0");
    m.baseline_layer = static_cast<std::size_t>(get_u64(obj, path, "baseline_layer", 0));

    const std::string split = get_str(obj, path, "split", "balanced");
    if (split == "balanced")
        m.split = SplitMode::Balanced;
    else if (split == "longtail")
        m.split = SplitMode::LongTail;
    else if (split == "domain_gen")
        m.split = SplitMode::DomainGen;
    else
        bad(path + ".split", "must be balanced|longtail|domain_gen");
    if (obj.contains("tau_is_mean")) {
        if (!obj["tau_is_mean"].is_boolean()) bad(path + ".tau_is_mean", "expected a boolean");
        m.tau_is_mean = obj["tau_is_mean"].get<bool>();
    } else {
        m.tau_is_mean = m.split == SplitMode::Balanced;
    }

    m.bounds = parse_bounds(obj, path, "");
    if (m.split == SplitMode::LongTail && !obj.contains("tau")) m.bounds.tau = 0.1;
    m.logit_bounds = parse_bounds(obj, path, "logit_");

    m.pgd.steps = static_cast<int>(get_u64(obj, path, "pgd_steps", 3));
    if (m.pgd.steps < 1) bad(path + ".pgd_steps", "must be >= 1");
    m.pgd.step_size = get_num(obj, path, "pgd_step_size", 0.0);  // 0 → 2ε/T
    if (m.pgd.step_size < 0.0) bad(path + ".pgd_step_size", "must be >= 0");
    if (obj.contains("normalize_grad")) {
        if (!obj["normalize_grad"].is_boolean()) bad(path + ".normalize_grad", "expected a boolean");
        m.pgd.normalize_grad = obj["normalize_grad"].get<bool>();
    }

    if (!obj.contains("rank")) {
        m.rank_mode = RankMode::Quarter;  // k = ⌊d_l/4⌋
    } else if (obj["rank"].is_string()) {
        const auto s = obj["rank"].get<std::string>();
        if (s == "full")
            m.rank_mode = RankMode::Full;
        else if (s == "quarter")
            m.rank_mode = RankMode::Quarter;
        else
            bad(path + ".rank", "must be \"full\", \"quarter\", or a positive integer");
    } else if (obj["rank"].is_number_integer() || obj["rank"].is_number_unsigned()) {
        m.rank_mode = RankMode::Explicit;
        m.rank = obj["rank"].get<std::size_t>();
        if (m.rank < 1) bad(path + ".rank", "must be >= 1");
    } else {
        bad(path + ".rank", "must be \"full\", \"quarter\", or a positive integer");
    }

    if (obj.contains("layer")) {
        const json& lay = obj["layer"];
        check_keys(lay, path + ".layer", {"strategy", "layers", "eval_period"});
        const std::string strat = get_str(lay, path + ".layer", "strategy", "fixed");
        if (strat == "fixed")
            m.layer_choice.strategy = LayerStrategy::Fixed;
        else if (strat == "adaptive")
            m.layer_choice.strategy = LayerStrategy::Adaptive;
        else if (strat == "multi")
            m.layer_choice.strategy = LayerStrategy::Multi;
        else
            bad(path + ".layer.strategy", "must be fixed|adaptive|multi");
        if (lay.contains("layers")) {
            if (!lay["layers"].is_array()) bad(path + ".layer.layers", "expected an array");
            for (const auto& v : lay["layers"]) {
                const auto l = v.get<std::int64_t>();
                if (l < 1) bad(path + ".layer.layers", "layer indices start at 1");
                m.layer_choice.layers.push_back(static_cast<std::size_t>(l));
            }
        }
        m.layer_choice.eval_period =
            static_cast<int>(get_u64(lay, path + ".layer", "eval_period", 10));
        if (m.layer_choice.eval_period < 1) bad(path + ".layer.eval_period", "must be >= 1");
        if (m.layer_choice.strategy != LayerStrategy::Fixed && m.layer_choice.layers.empty())
            bad(path + ".layer.layers", "adaptive/multi need an explicit layer list");
    }
    return m;
}

TrainConfig parse_train(const json& root, const std::string& base, std::uint64_t root_seed) {
    TrainConfig t;
    t.seed = root_seed;
    if (root.contains("train")) {
        const json& obj = root["train"];
        const std::string path = base + ".train";
        check_keys(obj, path,
                   {"epochs", "batch_size", "lr", "lr_decay_factor", "momentum", "weight_decay",
                    "hidden", "val_fraction"});
        t.epochs = static_cast<int>(get_u64(obj, path, "epochs", 40));
        t.batch_size = static_cast<std::size_t>(get_u64(obj, path, "batch_size", 128));
        t.lr.initial = get_num(obj, path, "lr", 0.1);
        t.lr.decay_factor = get_num(obj, path, "lr_decay_factor", 0.1);
        t.momentum = get_num(obj, path, "momentum", 0.9);
        t.weight_decay = get_num(obj, path, "weight_decay", 5e-4);
        t.val_fraction = get_num(obj, path, "val_fraction", 0.1);
        if (!(t.val_fraction > 0.0 && t.val_fraction < 1.0))
            bad(path + ".val_fraction", "must be in (0, 1)");
        if (obj.contains("hidden")) {
            if (!obj["hidden"].is_array()) bad(path + ".hidden", "expected an array");
            t.hidden.clear();
            for (const auto& v : obj["hidden"]) {
                const auto h = v.get<std::int64_t>();
                if (h < 1) bad(path + ".hidden", "layer widths must be >= 1");
                t.hidden.push_back(static_cast<std::size_t>(h));
            }
            if (t.hidden.empty()) bad(path + ".hidden", "must not be empty");
        }
    }
    return t;
}

RunConfig parse_run_json(const json& root) {
    check_keys(root, "config", {"seed", "output_dir", "dataset", "train", "method"});
    RunConfig cfg;
    cfg.seed = get_u64(root, "config", "seed", 1);
    cfg.output_dir = get_str(root, "config", "output_dir", "runs");
    if (!root.contains("dataset")) bad("config.dataset", "required");
    cfg.dataset = parse_dataset(root["dataset"], "config.dataset", cfg.seed);
    cfg.train = parse_train(root, "config", cfg.seed);
    if (!root.contains("method")) bad("config.method", "required");
    cfg.train.method = parse_method(root["method"], "config.method");
    cfg.train.validate();
    return cfg;
}

json dump_dataset(const DatasetSpec& d) {
    json o;
    o["scenario"] = d.scenario == Scenario::Balanced
                        ? "balanced"
                        : d.scenario == Scenario::LongTail ? "longtail" : "domain_shift";
    o["classes"] = d.classes;
    o["input_dim"] = d.input_dim;
    o["per_class"] = d.per_class;
    o["imbalance"] = d.imbalance;
    o["radius"] = d.radius;
    o["noise"] = d.noise;
    if (d.scenario == Scenario::DomainShift) {
        o["train_rotations_deg"] = d.train_rotations_deg;
        o["test_rotation_deg"] = d.test_rotation_deg;
    }
    o["seed"] = d.seed;
    return o;
}

json dump_method(const MethodConfig& m) {
    json o;
    o["name"] = method_name(m.method);
    o["dropout_keep"] = m.dropout_keep;
    o["mixup_alpha"] = m.mixup_alpha;
    o["ada_epsilon"] = m.ada_epsilon;
    o["baseline_layer"] = m.baseline_layer;
    o["split"] = m.split == SplitMode::Balanced
                     ? "balanced"
                     : m.split == SplitMode::LongTail ? "longtail" : "domain_gen";
    o["tau_is_mean"] = m.tau_is_mean;
    o["epsilon"] = m.bounds.epsilon;
    o["delta_epsilon"] = m.bounds.delta_epsilon;
    o["tau"] = m.bounds.tau;
    o["beta"] = m.bounds.beta;
    o["logit_epsilon"] = m.logit_bounds.epsilon;
    o["logit_delta_epsilon"] = m.logit_bounds.delta_epsilon;
    o["logit_tau"] = m.logit_bounds.tau;
    o["logit_beta"] = m.logit_bounds.beta;
    o["pgd_steps"] = m.pgd.steps;
    o["pgd_step_size"] = m.pgd.step_size;
    o["normalize_grad"] = m.pgd.normalize_grad;
    if (m.rank_mode == RankMode::Full)
        o["rank"] = "full";
    else if (m.rank_mode == RankMode::Quarter)
        o["rank"] = "quarter";
    else
        o["rank"] = m.rank;
    json lay;
    lay["strategy"] = m.layer_choice.strategy == LayerStrategy::Fixed
                          ? "fixed"
                          : m.layer_choice.strategy == LayerStrategy::Adaptive ? "adaptive"
                                                                               : "multi";
    lay["layers"] = m.layer_choice.layers;
    lay["eval_period"] = m.layer_choice.eval_period;
    o["layer"] = lay;
    return o;
}

json dump_run_json(const RunConfig& cfg) {
    json root;
    root["seed"] = cfg.seed;
    root["output_dir"] = cfg.output_dir;
    root["dataset"] = dump_dataset(cfg.dataset);
    json t;
    t["epochs"] = cfg.train.epochs;
    t["batch_size"] = cfg.train.batch_size;
    t["lr"] = cfg.train.lr.initial;
    t["lr_decay_factor"] = cfg.train.lr.decay_factor;
    t["momentum"] = cfg.train.momentum;
    t["weight_decay"] = cfg.train.weight_decay;
    t["hidden"] = cfg.train.hidden;
    t["val_fraction"] = cfg.train.val_fraction;
    root["train"] = t;
    root["method"] = dump_method(cfg.train.method);
    return root;
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config file not found: " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw std::invalid_argument("malformed JSON in " + path + ": " + e.what());
    }
    return root;
}

}  // namespace

RunConfig parse_config(const std::string& path) { return parse_run_json(load_json(path)); }

RunConfig parse_config_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
    }
    return parse_run_json(root);
}

CompareSpec parse_compare_config(const std::string& path) {
    json root = load_json(path);
    check_keys(root, "config", {"seeds", "output_dir", "dataset", "train", "methods"});
    CompareSpec spec;
    spec.output_dir = get_str(root, "config", "output_dir", "runs");
    if (!root.contains("seeds") || !root["seeds"].is_array() || root["seeds"].empty())
        bad("config.seeds", "need a nonempty array of seeds");
    for (const auto& s : root["seeds"]) spec.seeds.push_back(s.get<std::uint64_t>());
    if (!root.contains("dataset")) bad("config.dataset", "required");
    spec.dataset = parse_dataset(root["dataset"], "config.dataset", spec.seeds.front());
    spec.train = parse_train(root, "config", spec.seeds.front());
    if (!root.contains("methods") || !root["methods"].is_array() || root["methods"].size() < 2)
        bad("config.methods", "need at least 2 methods");
    std::size_t i = 0;
    for (const auto& m : root["methods"])
        spec.methods.push_back(parse_method(m, "config.methods[" + std::to_string(i++) + "]"));
    return spec;
}

std::string dump_effective(const RunConfig& cfg) { return dump_run_json(cfg).dump(2) + "\n"; }

std::string run_id(const RunConfig& cfg) {
    const std::uint64_t h = fnv1a(dump_effective(cfg));
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace lpa
