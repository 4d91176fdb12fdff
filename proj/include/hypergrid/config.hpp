#pragma once

#include <string>

#include "hypergrid/evaluation.hpp"

namespace hypergrid {

// Flat key = value run configuration. Defaults reproduce the reference
// training setup (7x7 patches, 3 conv layers of 24 kernels, dense widths
// 512/256/128, Adam lr 1e-4, batch 64, patience 15, max 200 epochs), so an
// empty file is a valid configuration. Unknown keys are rejected.
struct RunConfig {
    std::string cube_path;
    std::string labels_path;
    std::string split_path;
    std::string dataset_name;        // defaults to the cube file stem
    std::string method_name = "ours";
    NetworkConfig net;
    TrainConfig tc;
    AugmentationKind kind = AugmentationKind::None;
    std::uint64_t base_seed = 42;
    std::size_t thin_train_per_class = 0;
};

RunConfig parse_run_config(const std::string& text, const std::string& origin);
RunConfig load_run_config(const std::string& path);

// Documented schema, one "key (default): description" line each.
std::string run_config_schema();

}  // namespace hypergrid
