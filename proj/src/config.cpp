#include "hypergrid/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace hypergrid {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    try {
        const long long v = std::stoll(value);
        if (v < 0) throw ConfigError("config: " + key + " must be >= 0");
        return static_cast<std::size_t>(v);
    } catch (const std::invalid_argument&) {
        throw ConfigError("config: bad integer for " + key + ": '" + value + "'");
    } catch (const std::out_of_range&) {
        throw ConfigError("config: integer out of range for " + key);
    }
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + value + "'");
}

std::vector<std::size_t> parse_widths(const std::string& key, const std::string& value) {
    std::vector<std::size_t> widths;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        widths.push_back(parse_size(key, item));
    }
    return widths;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
    RunConfig rc;
    std::stringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: " + origin + ":" + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "cube") rc.cube_path = value;
        else if (key == "labels") rc.labels_path = value;
        else if (key == "split") rc.split_path = value;
        else if (key == "dataset_name") rc.dataset_name = value;
        else if (key == "method_name") rc.method_name = value;
        else if (key == "patch_width") rc.net.patch_width = parse_size(key, value);
        else if (key == "patch_height") rc.net.patch_height = parse_size(key, value);
        else if (key == "conv_layers") rc.net.conv_layers = parse_size(key, value);
        else if (key == "kernels") rc.net.kernels = parse_size(key, value);
        else if (key == "kernel_extent") rc.net.kernel_extent = parse_size(key, value);
        else if (key == "dense_widths") rc.net.dense_widths = parse_widths(key, value);
        else if (key == "per_channel_kernels") rc.net.per_channel_kernels = parse_bool(key, value);
        else if (key == "augmentation") rc.kind = augmentation_from_string(value);
        else if (key == "learning_rate") rc.tc.learning_rate = parse_real(key, value);
        else if (key == "beta1") rc.tc.beta1 = parse_real(key, value);
        else if (key == "beta2") rc.tc.beta2 = parse_real(key, value);
        else if (key == "epsilon") rc.tc.epsilon = parse_real(key, value);
        else if (key == "batch_size") rc.tc.batch_size = parse_size(key, value);
        else if (key == "max_epochs") rc.tc.max_epochs = parse_size(key, value);
        else if (key == "patience") rc.tc.patience = parse_size(key, value);
        else if (key == "min_delta") rc.tc.min_delta = parse_real(key, value);
        else if (key == "seed") rc.base_seed = static_cast<std::uint64_t>(std::stoull(value));
        else if (key == "thin_train_per_class") rc.thin_train_per_class = parse_size(key, value);
        else
            throw ConfigError("config: " + origin + ":" + std::to_string(lineno) +
                              ": unknown key '" + key + "'");
    }
    validate(rc.tc);
    if (rc.dataset_name.empty() && !rc.cube_path.empty())
        rc.dataset_name = std::filesystem::path(rc.cube_path).stem().string();
    if (rc.dataset_name.empty()) rc.dataset_name = "scene";
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path);
}

std::string run_config_schema() {
    return
        "cube (required for train/experiment): path to the HGCUBE1 header file\n"
        "labels (required): path to the HGLAB1 label raster\n"
        "split (required): path to the HGSPLIT1 fold file\n"
        "dataset_name (cube file stem): dataset key used in result CSVs\n"
        "method_name (ours): method key used in result CSVs\n"
        "patch_width (7), patch_height (7): spatial patch extents, odd\n"
        "conv_layers (3): number of valid 3D convolution layers\n"
        "kernels (24): feature maps per conv layer\n"
        "kernel_extent (3): cubic kernel edge length\n"
        "dense_widths (512,256,128): hidden dense layer widths\n"
        "per_channel_kernels (false): standard per-channel conv instead of shared kernels\n"
        "augmentation (none): none|rotate|flip|zoom|mixed\n"
        "learning_rate (1e-4), beta1 (0.9), beta2 (0.999), epsilon (1e-8): Adam settings\n"
        "batch_size (64): mini-batch size\n"
        "max_epochs (200): hard epoch cap\n"
        "patience (15): consecutive non-improving epochs before early stop\n"
        "min_delta (1e-6): loss improvement below this does not reset patience\n"
        "seed (42): base seed; per-(fold,run) seeds are mixed from it\n"
        "thin_train_per_class (0): cap training pixels per class, 0 = keep all\n";
}

}  // namespace hypergrid
