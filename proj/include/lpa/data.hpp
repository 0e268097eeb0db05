#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lpa/matrix.hpp"

namespace lpa {

enum class Scenario { Balanced, LongTail, DomainShift };

struct DatasetSpec {
    Scenario scenario = Scenario::Balanced;
    std::size_t classes = 10;
    std::size_t input_dim = 16;
    std::size_t per_class = 500;  // n_max, head-class sample count
    double imbalance = 1.0;       // ρ ≥ 1, LongTail only
    double radius = 4.0;          // cluster means live on this sphere
    double noise = 0.25;          // isotropic cluster noise σ
    std::vector<double> train_rotations_deg;  // DomainShift train domains
    double test_rotation_deg = 90.0;          // DomainShift held-out domain
    std::uint64_t seed = 1;
};

struct Dataset {
    Matrix features;                       // N × d_0
    std::vector<int> labels;               // in [0, C)
    std::vector<std::size_t> class_counts; // per-class N_c
    std::vector<int> domains;              // empty unless DomainShift
    std::size_t classes = 0;

    std::size_t size() const { return labels.size(); }
};

Dataset gen_balanced(const DatasetSpec& spec);

/// Exponential imbalance profile: n_c = round(n_max · ρ^(−c/(C−1))), ≥ 1.
Dataset gen_longtail(const DatasetSpec& spec);

/// Per-class sample counts of the long-tail profile (exposed for tests).
std::vector<std::size_t> longtail_counts(std::size_t n_max, double rho, std::size_t classes);

/// Balanced clusters; each train domain rotates the first two feature
/// coordinates by its angle, the test set uses the held-out angle.
std::pair<Dataset, Dataset> gen_domain_shift(const DatasetSpec& spec);

struct TrainValSplit {
    Dataset train;
    Dataset val;
};

/// Holds out the last `fraction` of each class (post seeded shuffle), at
/// least one sample per class.
TrainValSplit split_train_val(const Dataset& data, double fraction, std::uint64_t seed);

// CSV round-trip (header: feature_0..feature_{d-1},label,domain); doubles
// are written with 17 significant digits so the round-trip is bit-exact.
void write_csv(const Dataset& data, const std::string& path);
Dataset read_csv(const std::string& path);

}  // namespace lpa
