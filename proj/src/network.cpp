#include "hypergrid/network.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace hypergrid {

void validate(const NetworkConfig& cfg) {
    if (cfg.num_classes < 2) throw ConfigError("network: need at least 2 classes");
    if (cfg.kernels == 0 || cfg.conv_layers == 0) throw ConfigError("network: need kernels and conv layers");
    if (cfg.kernel_extent < 2) throw ConfigError("network: kernel extent must be >= 2");
    const std::size_t shrink = cfg.conv_layers * (cfg.kernel_extent - 1);
    if (cfg.patch_width <= shrink || cfg.patch_height <= shrink || cfg.bands <= shrink)
        throw ConfigError("network: " + std::to_string(cfg.conv_layers) +
                          " valid conv layers would shrink a " + std::to_string(cfg.patch_width) + "x" +
                          std::to_string(cfg.patch_height) + "x" + std::to_string(cfg.bands) +
                          " patch below 1");
    for (std::size_t w : cfg.dense_widths)
        if (w == 0) throw ConfigError("network: zero-width dense layer");
}

std::vector<LevelShape> shape_trace(const NetworkConfig& cfg) {
    validate(cfg);
    std::vector<LevelShape> trace;
    trace.push_back({1, cfg.patch_width, cfg.patch_height, cfg.bands});
    const std::size_t d = cfg.kernel_extent - 1;
    for (std::size_t l = 1; l <= cfg.conv_layers; ++l)
        trace.push_back({cfg.kernels, cfg.patch_width - l * d, cfg.patch_height - l * d, cfg.bands - l * d});
    return trace;
}

std::size_t flatten_length(const NetworkConfig& cfg) {
    const LevelShape last = shape_trace(cfg).back();
    return last.maps * last.x * last.y * last.bands;
}

std::vector<std::size_t> layer_param_counts(const NetworkConfig& cfg) {
    validate(cfg);
    std::vector<std::size_t> counts;
    const std::size_t ksize = cfg.kernel_extent * cfg.kernel_extent * cfg.kernel_extent;
    std::size_t channels = 1;
    for (std::size_t l = 0; l < cfg.conv_layers; ++l) {
        counts.push_back(cfg.per_channel_kernels ? cfg.kernels * channels * ksize + cfg.kernels
                                                 : cfg.kernels * ksize + cfg.kernels);
        channels = cfg.kernels;
    }
    std::size_t in = flatten_length(cfg);
    std::vector<std::size_t> outs(cfg.dense_widths);
    outs.push_back(cfg.num_classes);
    for (std::size_t width : outs) {
        counts.push_back(in * width + width);
        in = width;
    }
    return counts;
}

std::size_t param_count(const NetworkConfig& cfg) {
    std::size_t total = 0;
    for (std::size_t c : layer_param_counts(cfg)) total += c;
    return total;
}

std::vector<std::string> block_names(const NetworkConfig& cfg) {
    std::vector<std::string> names;
    for (std::size_t l = 0; l < cfg.conv_layers; ++l) {
        names.push_back("conv" + std::to_string(l) + ".weights");
        names.push_back("conv" + std::to_string(l) + ".biases");
    }
    for (std::size_t d = 0; d < cfg.dense_widths.size() + 1; ++d) {
        names.push_back("dense" + std::to_string(d) + ".weights");
        names.push_back("dense" + std::to_string(d) + ".biases");
    }
    return names;
}

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

ModelParamsT<double> fd_gradients(const NetworkConfig& cfg, const ModelParamsT<double>& params,
                                  const TensorD& patch, std::size_t label, double eps) {
    ModelParamsT<double> numeric = zeros_like(params);
    ModelParamsT<double> work = params;

    std::vector<std::vector<double>*> work_blocks, num_blocks;
    for_each_block(work, [&work_blocks](std::vector<double>& b) { work_blocks.push_back(&b); });
    for_each_block(numeric, [&num_blocks](std::vector<double>& b) { num_blocks.push_back(&b); });

    for (std::size_t b = 0; b < work_blocks.size(); ++b) {
        std::vector<double>& block = *work_blocks[b];
        for (std::size_t i = 0; i < block.size(); ++i) {
            const double saved = block[i];
            block[i] = saved + eps;
            const double up = model_loss(work, cfg, patch, label);
            block[i] = saved - eps;
            const double down = model_loss(work, cfg, patch, label);
            block[i] = saved;
            (*num_blocks[b])[i] = (up - down) / (2.0 * eps);
        }
    }
    return numeric;
}

GradCheckResult max_relative_error(const NetworkConfig& cfg, const ModelParamsT<double>& analytic,
                                   const ModelParamsT<double>& numeric) {
    std::vector<const std::vector<double>*> a_blocks, n_blocks;
    for_each_block(analytic, [&a_blocks](const std::vector<double>& b) { a_blocks.push_back(&b); });
    for_each_block(numeric, [&n_blocks](const std::vector<double>& b) { n_blocks.push_back(&b); });
    const std::vector<std::string> names = block_names(cfg);

    GradCheckResult worst;
    for (std::size_t b = 0; b < a_blocks.size(); ++b) {
        for (std::size_t i = 0; i < a_blocks[b]->size(); ++i) {
            const double err = relative_error((*a_blocks[b])[i], (*n_blocks[b])[i]);
            if (err > worst.max_rel_error) {
                worst.max_rel_error = err;
                worst.block = b < names.size() ? names[b] : std::to_string(b);
                worst.index = i;
                worst.analytic = (*a_blocks[b])[i];
                worst.numeric = (*n_blocks[b])[i];
            }
        }
    }
    return worst;
}

GradCheckResult gradient_check(const NetworkConfig& cfg, std::uint64_t seed, double eps) {
    validate(cfg);
    SeededRng rng(seed);
    ModelParamsT<double> params = init_params<double>(cfg, rng);
    TensorD patch({cfg.patch_width, cfg.patch_height, cfg.bands});
    for (std::size_t i = 0; i < patch.size(); ++i) patch[i] = rng.uniform(0.0, 1.0);
    const std::size_t label = static_cast<std::size_t>(rng.below(cfg.num_classes));

    const ModelParamsT<double> analytic = loss_and_grads(params, cfg, patch, label).grads;
    const ModelParamsT<double> numeric = fd_gradients(cfg, params, patch, label, eps);
    return max_relative_error(cfg, analytic, numeric);
}

NetworkConfig tiny_verification_config() {
    NetworkConfig cfg;
    cfg.patch_width = 5;
    cfg.patch_height = 5;
    cfg.bands = 9;
    cfg.conv_layers = 2;
    cfg.kernels = 2;
    cfg.kernel_extent = 3;
    cfg.dense_widths = {8, 4};
    cfg.num_classes = 3;
    return cfg;
}

namespace {

std::string dense_widths_to_string(const std::vector<std::size_t>& widths) {
    std::string s;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(widths[i]);
    }
    return s;
}

std::vector<std::size_t> parse_widths(const std::string& s) {
    std::vector<std::size_t> widths;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        widths.push_back(std::stoull(item));
    }
    return widths;
}

void write_f32_le(std::ostream& out, const std::vector<float>& block) {
    for (float v : block) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        const unsigned char bytes[4] = {
            static_cast<unsigned char>(bits & 0xff), static_cast<unsigned char>((bits >> 8) & 0xff),
            static_cast<unsigned char>((bits >> 16) & 0xff), static_cast<unsigned char>((bits >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(bytes), 4);
    }
}

void read_f32_le(std::istream& in, std::vector<float>& block) {
    for (float& v : block) {
        unsigned char bytes[4];
        in.read(reinterpret_cast<char*>(bytes), 4);
        if (!in) throw IoError("checkpoint: truncated parameter payload");
        const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                                   (static_cast<std::uint32_t>(bytes[1]) << 8) |
                                   (static_cast<std::uint32_t>(bytes[2]) << 16) |
                                   (static_cast<std::uint32_t>(bytes[3]) << 24);
        std::memcpy(&v, &bits, 4);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkConfig& cfg, const ModelParams& params) {
    validate(cfg);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot write " + path);
    out << "HGMODEL1\n";
    out << "patch_width = " << cfg.patch_width << "\n";
    out << "patch_height = " << cfg.patch_height << "\n";
    out << "bands = " << cfg.bands << "\n";
    out << "conv_layers = " << cfg.conv_layers << "\n";
    out << "kernels = " << cfg.kernels << "\n";
    out << "kernel_extent = " << cfg.kernel_extent << "\n";
    out << "dense_widths = " << dense_widths_to_string(cfg.dense_widths) << "\n";
    out << "num_classes = " << cfg.num_classes << "\n";
    out << "per_channel_kernels = " << (cfg.per_channel_kernels ? 1 : 0) << "\n";
    out << "end_header\n";
    for_each_block(params, [&out](const std::vector<float>& block) { write_f32_le(out, block); });
    if (!out) throw IoError("checkpoint: write failed for " + path);
}

std::pair<NetworkConfig, ModelParams> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "HGMODEL1") throw IoError("checkpoint: bad magic in " + path);

    NetworkConfig cfg;
    while (std::getline(in, line)) {
        if (line == "end_header") break;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("checkpoint: malformed header line '" + line + "'");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "patch_width") cfg.patch_width = std::stoull(value);
            else if (key == "patch_height") cfg.patch_height = std::stoull(value);
            else if (key == "bands") cfg.bands = std::stoull(value);
            else if (key == "conv_layers") cfg.conv_layers = std::stoull(value);
            else if (key == "kernels") cfg.kernels = std::stoull(value);
            else if (key == "kernel_extent") cfg.kernel_extent = std::stoull(value);
            else if (key == "dense_widths") cfg.dense_widths = parse_widths(value);
            else if (key == "num_classes") cfg.num_classes = std::stoull(value);
            else if (key == "per_channel_kernels") cfg.per_channel_kernels = value != "0";
            else throw IoError("checkpoint: unknown header key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw IoError("checkpoint: bad value for '" + key + "'");
        }
    }
    validate(cfg);

    // Rebuild the parameter layout, then fill it from the payload.
    SeededRng rng(0);
    ModelParams params = init_params<float>(cfg, rng);
    for_each_block(params, [&in](std::vector<float>& block) { read_f32_le(in, block); });
    char extra;
    if (in.read(&extra, 1)) throw IoError("checkpoint: trailing bytes in " + path);
    return {cfg, params};
}

}  // namespace hypergrid
