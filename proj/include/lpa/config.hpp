#pragma once

#include <string>
#include <vector>

#include "lpa/data.hpp"
#include "lpa/train.hpp"

namespace lpa {

struct RunConfig {
    DatasetSpec dataset;
    TrainConfig train;
    std::string output_dir = "runs";
    std::uint64_t seed = 1;
};

struct CompareSpec {
    DatasetSpec dataset;
    TrainConfig train;  // shared everything except the method
    std::vector<MethodConfig> methods;
    std::vector<std::uint64_t> seeds;
    std::string output_dir = "runs";
};

/// Parses and fully validates a JSON run config, rejecting unknown keys and
/// filling documented defaults. Error messages name the offending key path.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

CompareSpec parse_compare_config(const std::string& path);

/// Effective (defaults-filled) config as canonical JSON; re-parsing the dump
/// yields an identical config.
std::string dump_effective(const RunConfig& cfg);

/// Deterministic run id: FNV-1a hash of the effective config, hex-encoded.
std::string run_id(const RunConfig& cfg);

}  // namespace lpa
