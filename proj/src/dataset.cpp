#include "hypergrid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace hypergrid {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

void write_u16_le(std::ostream& out, std::uint16_t v) {
    const unsigned char bytes[2] = {static_cast<unsigned char>(v & 0xff),
                                    static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(bytes), 2);
}

std::uint16_t read_u16_le(std::istream& in) {
    unsigned char bytes[2];
    in.read(reinterpret_cast<char*>(bytes), 2);
    return static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
}

void write_f32_le(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(bits & 0xff), static_cast<unsigned char>((bits >> 8) & 0xff),
        static_cast<unsigned char>((bits >> 16) & 0xff), static_cast<unsigned char>((bits >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

float read_f32_le(std::istream& in) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                               (static_cast<std::uint32_t>(bytes[1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

std::string payload_path_for(const std::string& header_path) { return header_path + ".raw"; }

}  // namespace

std::vector<Coord> LabelMap::labeled_coords() const {
    std::vector<Coord> out;
    for (std::size_t x = 0; x < width; ++x)
        for (std::size_t y = 0; y < height; ++y)
            if (at(x, y) != 0) out.push_back({static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)});
    return out;
}

void save_cube(const HsiCube& cube, const std::string& header_path) {
    if (cube.reflectance.size() != cube.width * cube.height * cube.bands)
        throw std::invalid_argument("cube: tensor size does not match extents");
    const std::string payload = payload_path_for(header_path);
    {
        std::ofstream out(header_path);
        if (!out) throw IoError("cube: cannot write " + header_path);
        out << "HGCUBE1\n";
        out << "width = " << cube.width << "\n";
        out << "height = " << cube.height << "\n";
        out << "bands = " << cube.bands << "\n";
        out << "dtype = f32\n";
        out << "layout = xyl row-major\n";
        out << "byte_order = little-endian\n";
        if (!out) throw IoError("cube: write failed for " + header_path);
    }
    std::ofstream out(payload, std::ios::binary);
    if (!out) throw IoError("cube: cannot write " + payload);
    for (std::size_t i = 0; i < cube.reflectance.size(); ++i) write_f32_le(out, cube.reflectance[i]);
    if (!out) throw IoError("cube: write failed for " + payload);
}

HsiCube load_cube(const std::string& header_path) {
    std::ifstream in(header_path);
    if (!in) throw IoError("cube: cannot open " + header_path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "HGCUBE1")
        throw IoError("cube: bad magic in " + header_path);

    HsiCube cube;
    bool dtype_ok = false, layout_ok = false, order_ok = false;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("cube: malformed header line '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "width") cube.width = std::stoull(value);
        else if (key == "height") cube.height = std::stoull(value);
        else if (key == "bands") cube.bands = std::stoull(value);
        else if (key == "dtype") dtype_ok = value == "f32";
        else if (key == "layout") layout_ok = value == "xyl row-major";
        else if (key == "byte_order") order_ok = value == "little-endian";
        else throw IoError("cube: unknown header key '" + key + "'");
    }
    if (!dtype_ok || !layout_ok || !order_ok)
        throw IoError("cube: unsupported dtype/layout/byte_order in " + header_path);
    if (cube.width == 0 || cube.height == 0 || cube.bands == 0)
        throw IoError("cube: missing extents in " + header_path);

    const std::string payload = payload_path_for(header_path);
    std::ifstream pin(payload, std::ios::binary);
    if (!pin) throw IoError("cube: cannot open payload " + payload);
    pin.seekg(0, std::ios::end);
    const std::size_t bytes = static_cast<std::size_t>(pin.tellg());
    const std::size_t want = cube.width * cube.height * cube.bands * 4;
    if (bytes != want)
        throw IoError("cube: payload " + payload + " holds " + std::to_string(bytes) +
                      " bytes, header declares " + std::to_string(want));
    pin.seekg(0);
    std::vector<float> values(cube.width * cube.height * cube.bands);
    for (float& v : values) v = read_f32_le(pin);
    if (!pin) throw IoError("cube: payload read failed for " + payload);
    cube.reflectance = Tensor({cube.width, cube.height, cube.bands}, std::move(values));
    return cube;
}

void save_labels(const LabelMap& labels, const std::string& path) {
    if (labels.labels.size() != labels.width * labels.height)
        throw std::invalid_argument("labels: raster size does not match extents");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("labels: cannot write " + path);
    out << "HGLAB1\n";
    out << "width = " << labels.width << "\n";
    out << "height = " << labels.height << "\n";
    out << "end_header\n";
    for (std::uint16_t v : labels.labels) write_u16_le(out, v);
    if (!out) throw IoError("labels: write failed for " + path);
}

LabelMap load_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("labels: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "HGLAB1") throw IoError("labels: bad magic in " + path);
    LabelMap labels;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line == "end_header") break;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("labels: malformed header line '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "width") labels.width = std::stoull(value);
        else if (key == "height") labels.height = std::stoull(value);
        else throw IoError("labels: unknown header key '" + key + "'");
    }
    if (labels.width == 0 || labels.height == 0) throw IoError("labels: missing extents in " + path);
    labels.labels.resize(labels.width * labels.height);
    for (std::uint16_t& v : labels.labels) {
        v = read_u16_le(in);
        if (!in) throw IoError("labels: truncated payload in " + path);
    }
    char extra;
    if (in.read(&extra, 1)) throw IoError("labels: trailing bytes in " + path);
    return labels;
}

std::pair<HsiCube, LabelMap> load_scene(const std::string& cube_header, const std::string& labels_path) {
    HsiCube cube = load_cube(cube_header);
    LabelMap labels = load_labels(labels_path);
    if (labels.width != cube.width || labels.height != cube.height)
        throw IoError("scene: label raster " + std::to_string(labels.width) + "x" +
                      std::to_string(labels.height) + " does not match cube " +
                      std::to_string(cube.width) + "x" + std::to_string(cube.height));
    return {std::move(cube), std::move(labels)};
}

std::size_t mirror_index(std::ptrdiff_t i, std::size_t n) {
    const std::ptrdiff_t sn = static_cast<std::ptrdiff_t>(n);
    while (i < 0 || i >= sn) {
        if (i < 0) i = -i;
        if (i >= sn) i = 2 * sn - 2 - i;
    }
    return static_cast<std::size_t>(i);
}

PaddedCube mirror_pad(const HsiCube& cube, std::size_t radius) {
    if (radius >= std::min(cube.width, cube.height))
        throw std::invalid_argument("mirror_pad: radius " + std::to_string(radius) +
                                    " too large for " + std::to_string(cube.width) + "x" +
                                    std::to_string(cube.height) + " scene");
    PaddedCube out;
    out.width = cube.width;
    out.height = cube.height;
    out.bands = cube.bands;
    out.radius = radius;
    const std::size_t pw = cube.width + 2 * radius, ph = cube.height + 2 * radius;
    out.data = Tensor({pw, ph, cube.bands});
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(radius);
    for (std::size_t px = 0; px < pw; ++px) {
        const std::size_t sx = mirror_index(static_cast<std::ptrdiff_t>(px) - r, cube.width);
        for (std::size_t py = 0; py < ph; ++py) {
            const std::size_t sy = mirror_index(static_cast<std::ptrdiff_t>(py) - r, cube.height);
            const float* src = cube.reflectance.data() + (sx * cube.height + sy) * cube.bands;
            float* dst = out.data.data() + (px * ph + py) * cube.bands;
            std::copy(src, src + cube.bands, dst);
        }
    }
    return out;
}

Tensor extract_patch(const PaddedCube& padded, std::size_t x, std::size_t y, std::size_t size) {
    if (size % 2 == 0) throw std::invalid_argument("extract_patch: size must be odd");
    const std::size_t half = (size - 1) / 2;
    if (padded.radius < half)
        throw std::out_of_range("extract_patch: padding radius " + std::to_string(padded.radius) +
                                " cannot center a " + std::to_string(size) + "-wide patch");
    if (x >= padded.width || y >= padded.height)
        throw std::out_of_range("extract_patch: coordinate outside the original scene");

    Tensor patch({size, size, padded.bands});
    const std::size_t ph = padded.height + 2 * padded.radius;
    // (x, y) is in original coordinates; +radius moves into padded space.
    const std::size_t x0 = x + padded.radius - half, y0 = y + padded.radius - half;
    float* dst = patch.data();
    for (std::size_t i = 0; i < size; ++i) {
        const float* src = padded.data.data() + ((x0 + i) * ph + y0) * padded.bands;
        std::copy(src, src + size * padded.bands, dst);
        dst += size * padded.bands;
    }
    return patch;
}

NormalizationStats fit_normalization(const HsiCube& cube, const std::vector<Coord>& train_coords) {
    if (train_coords.empty()) throw std::invalid_argument("normalization: empty coordinate set");
    NormalizationStats stats;
    stats.min.assign(cube.bands, std::numeric_limits<float>::infinity());
    stats.max.assign(cube.bands, -std::numeric_limits<float>::infinity());
    for (const Coord& c : train_coords) {
        if (c.x >= cube.width || c.y >= cube.height)
            throw std::out_of_range("normalization: coordinate outside the scene");
        const float* px = cube.reflectance.data() + (c.x * cube.height + c.y) * cube.bands;
        for (std::size_t b = 0; b < cube.bands; ++b) {
            stats.min[b] = std::min(stats.min[b], px[b]);
            stats.max[b] = std::max(stats.max[b], px[b]);
        }
    }
    return stats;
}

HsiCube apply_normalization(const HsiCube& cube, const NormalizationStats& stats) {
    if (stats.min.size() != cube.bands || stats.max.size() != cube.bands)
        throw std::invalid_argument("normalization: stats band count mismatch");
    HsiCube out = cube;
    for (std::size_t b = 0; b < cube.bands; ++b) {
        const float lo = stats.min[b];
        const float range = stats.max[b] - lo;
        float* data = out.reflectance.data();
        const std::size_t n = cube.width * cube.height;
        if (range <= 0.0f) {
            for (std::size_t i = 0; i < n; ++i) data[i * cube.bands + b] = 0.0f;
        } else {
            for (std::size_t i = 0; i < n; ++i)
                data[i * cube.bands + b] = (data[i * cube.bands + b] - lo) / range;
        }
    }
    return out;
}

SplitSpec generate_patch_splits(const LabelMap& labels, std::size_t folds, std::size_t block_size,
                                std::size_t patch_radius, SeededRng& rng) {
    if (folds < 2) throw SplitError("split: need at least 2 folds");
    if (block_size < 2 * patch_radius + 1)
        throw SplitError("split: block size " + std::to_string(block_size) +
                         " must cover a full patch (>= " + std::to_string(2 * patch_radius + 1) + ")");

    const std::size_t bx_n = (labels.width + block_size - 1) / block_size;
    const std::size_t by_n = (labels.height + block_size - 1) / block_size;

    // Dominant class per block drives stratification: deal each class's
    // blocks round-robin so every fold sees as many classes as possible.
    struct Block {
        std::size_t bx, by;
    };
    std::map<std::uint16_t, std::vector<Block>> by_class;
    for (std::size_t bx = 0; bx < bx_n; ++bx) {
        for (std::size_t by = 0; by < by_n; ++by) {
            std::map<std::uint16_t, std::size_t> counts;
            for (std::size_t x = bx * block_size; x < std::min((bx + 1) * block_size, labels.width); ++x)
                for (std::size_t y = by * block_size; y < std::min((by + 1) * block_size, labels.height); ++y)
                    if (labels.at(x, y) != 0) ++counts[labels.at(x, y)];
            if (counts.empty()) continue;
            std::uint16_t dominant = 0;
            std::size_t best = 0;
            for (const auto& [cls, n] : counts)
                if (n > best) best = n, dominant = cls;
            by_class[dominant].push_back({bx, by});
        }
    }
    std::size_t populated = 0;
    for (const auto& [cls, blocks] : by_class) populated += blocks.size();
    if (populated < folds)
        throw SplitError("split: scene provides only " + std::to_string(populated) +
                         " labeled blocks for " + std::to_string(folds) + " folds");

    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> fold_blocks(folds);
    std::size_t next_fold = rng.below(folds);
    for (auto& [cls, blocks] : by_class) {
        rng.shuffle_in_place(blocks);
        for (const Block& b : blocks) {
            fold_blocks[next_fold % folds].push_back({b.bx, b.by});
            ++next_fold;
        }
    }

    SplitSpec split;
    split.patch_radius = patch_radius;
    split.block_size = block_size;
    split.folds.resize(folds);

    std::vector<std::size_t> fold_of_pixel(labels.width * labels.height, folds);
    for (std::size_t f = 0; f < folds; ++f) {
        for (const auto& [bx, by] : fold_blocks[f]) {
            for (std::size_t x = bx * block_size; x < std::min((bx + 1) * block_size, labels.width); ++x) {
                for (std::size_t y = by * block_size; y < std::min((by + 1) * block_size, labels.height); ++y) {
                    if (labels.at(x, y) == 0) continue;
                    split.folds[f].test.push_back({static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)});
                    fold_of_pixel[x * labels.height + y] = f;
                }
            }
        }
    }

    // Train candidates for fold f: labeled pixels of the other folds whose
    // patch stays Chebyshev-clear of every fold-f test patch. Two radius-r
    // squares are disjoint iff the centers are more than 2r apart, so a
    // prefix-sum over test origins answers each candidate in O(1).
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::uint32_t> prefix((labels.width + 1) * (labels.height + 1), 0);
        auto pre = [&](std::size_t x, std::size_t y) -> std::uint32_t& {
            return prefix[x * (labels.height + 1) + y];
        };
        for (std::size_t x = 0; x < labels.width; ++x)
            for (std::size_t y = 0; y < labels.height; ++y) {
                const bool is_test = fold_of_pixel[x * labels.height + y] == f;
                pre(x + 1, y + 1) = pre(x, y + 1) + pre(x + 1, y) - pre(x, y) + (is_test ? 1u : 0u);
            }
        const std::ptrdiff_t reach = static_cast<std::ptrdiff_t>(2 * patch_radius);
        for (std::size_t x = 0; x < labels.width; ++x) {
            for (std::size_t y = 0; y < labels.height; ++y) {
                if (labels.at(x, y) == 0) continue;
                const std::size_t owner = fold_of_pixel[x * labels.height + y];
                if (owner == f) continue;
                const std::size_t x0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(x) - reach));
                const std::size_t y0 = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(y) - reach));
                const std::size_t x1 = std::min(labels.width, x + 2 * patch_radius + 1);
                const std::size_t y1 = std::min(labels.height, y + 2 * patch_radius + 1);
                const std::uint32_t nearby =
                    pre(x1, y1) - pre(x0, y1) - pre(x1, y0) + pre(x0, y0);
                if (nearby == 0)
                    split.folds[f].train.push_back({static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)});
            }
        }
    }
    return split;
}

LeakageReport verify_no_leakage(const SplitSpec& split, const LabelMap& labels) {
    LeakageReport report;
    const std::size_t W = labels.width, H = labels.height;
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(split.patch_radius);

    // Partition: every labeled pixel in exactly one fold's test set.
    std::vector<std::uint8_t> seen(W * H, 0);
    for (const SplitFold& fold : split.folds)
        for (const Coord& c : fold.test)
            if (c.x < W && c.y < H) ++seen[c.x * H + c.y];
    for (std::size_t x = 0; x < W; ++x)
        for (std::size_t y = 0; y < H; ++y) {
            const bool labeled = labels.at(x, y) != 0;
            const std::uint8_t n = seen[x * H + y];
            if ((labeled && n != 1) || (!labeled && n != 0)) ++report.partition_violations;
        }

    // Overlap: paint every test-patch pixel, then walk every train-patch
    // pixel and count hits.
    for (const SplitFold& fold : split.folds) {
        std::vector<std::int32_t> owner(W * H, -1);
        for (std::size_t t = 0; t < fold.test.size(); ++t) {
            const Coord& c = fold.test[t];
            for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
                for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
                    const std::ptrdiff_t px = static_cast<std::ptrdiff_t>(c.x) + dx;
                    const std::ptrdiff_t py = static_cast<std::ptrdiff_t>(c.y) + dy;
                    if (px < 0 || py < 0 || px >= static_cast<std::ptrdiff_t>(W) ||
                        py >= static_cast<std::ptrdiff_t>(H))
                        continue;
                    owner[static_cast<std::size_t>(px) * H + static_cast<std::size_t>(py)] =
                        static_cast<std::int32_t>(t);
                }
            }
        }
        for (const Coord& c : fold.train) {
            std::int32_t hit = -1;
            for (std::ptrdiff_t dx = -r; dx <= r && hit < 0; ++dx) {
                for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
                    const std::ptrdiff_t px = static_cast<std::ptrdiff_t>(c.x) + dx;
                    const std::ptrdiff_t py = static_cast<std::ptrdiff_t>(c.y) + dy;
                    if (px < 0 || py < 0 || px >= static_cast<std::ptrdiff_t>(W) ||
                        py >= static_cast<std::ptrdiff_t>(H))
                        continue;
                    const std::int32_t o = owner[static_cast<std::size_t>(px) * H + static_cast<std::size_t>(py)];
                    if (o >= 0) {
                        hit = o;
                        break;
                    }
                }
            }
            if (hit >= 0) {
                ++report.overlap_violations;
                if (!report.first_offender)
                    report.first_offender = std::make_pair(c, fold.test[static_cast<std::size_t>(hit)]);
            }
        }
    }
    return report;
}

SynthScene synth_scene(SeededRng& rng, std::size_t width, std::size_t height, std::size_t bands,
                       std::size_t classes, double noise_sigma) {
    if (classes < 2) throw std::invalid_argument("synth: need at least 2 classes");
    if (bands < 1) throw std::invalid_argument("synth: need at least 1 band");
    if (width * height < 10 * classes)
        throw std::invalid_argument("synth: scene smaller than 10 pixels per class");
    if (noise_sigma < 0) throw std::invalid_argument("synth: negative noise");

    SynthScene scene;
    scene.cube.width = width;
    scene.cube.height = height;
    scene.cube.bands = bands;
    scene.labels.width = width;
    scene.labels.height = height;
    scene.labels.labels.assign(width * height, 0);

    // Smooth prototypes: a few random Gaussian bumps plus one bump anchored
    // per class so prototypes stay pairwise separated.
    const double fb = static_cast<double>(bands);
    scene.prototypes.assign(classes, std::vector<float>(bands, 0.0f));
    for (std::size_t c = 0; c < classes; ++c) {
        struct Bump {
            double amp, center, width;
        };
        std::vector<Bump> bumps;
        for (int j = 0; j < 3; ++j)
            bumps.push_back({rng.uniform(0.2, 0.8), rng.uniform(0.0, fb),
                             rng.uniform(std::max(1.0, fb / 20.0), std::max(1.5, fb / 8.0))});
        bumps.push_back({0.9, (static_cast<double>(c) + 0.5) * fb / static_cast<double>(classes),
                         std::max(1.0, fb / (4.0 * static_cast<double>(classes)))});
        for (std::size_t b = 0; b < bands; ++b) {
            double v = 0.1;
            for (const Bump& bump : bumps) {
                const double d = (static_cast<double>(b) - bump.center) / bump.width;
                v += bump.amp * std::exp(-0.5 * d * d);
            }
            scene.prototypes[c][b] = static_cast<float>(v);
        }
    }

    // Voronoi regions from distinct seed pixels; ties go to the lower class.
    std::vector<Coord> seeds;
    while (seeds.size() < classes) {
        Coord c{static_cast<std::uint32_t>(rng.below(width)), static_cast<std::uint32_t>(rng.below(height))};
        if (std::find(seeds.begin(), seeds.end(), c) == seeds.end()) seeds.push_back(c);
    }
    std::vector<std::uint16_t> region(width * height, 0);
    for (std::size_t x = 0; x < width; ++x) {
        for (std::size_t y = 0; y < height; ++y) {
            std::size_t best = 0;
            std::uint64_t best_d = UINT64_MAX;
            for (std::size_t c = 0; c < classes; ++c) {
                const std::int64_t dx = static_cast<std::int64_t>(x) - seeds[c].x;
                const std::int64_t dy = static_cast<std::int64_t>(y) - seeds[c].y;
                const std::uint64_t d = static_cast<std::uint64_t>(dx * dx + dy * dy);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            region[x * height + y] = static_cast<std::uint16_t>(best + 1);
        }
    }
    scene.labels.labels = region;

    // Unlabeled background strips; seed pixels stay labeled so every class
    // keeps at least one ground-truth pixel.
    const std::size_t strips = std::max<std::size_t>(1, std::min(width, height) / 16);
    for (std::size_t s = 0; s < strips; ++s) {
        const bool vertical = rng.below(2) == 0;
        if (vertical) {
            const std::size_t x = rng.below(width);
            for (std::size_t y = 0; y < height; ++y) {
                const Coord c{static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)};
                if (std::find(seeds.begin(), seeds.end(), c) == seeds.end())
                    scene.labels.at(x, y) = 0;
            }
        } else {
            const std::size_t y = rng.below(height);
            for (std::size_t x = 0; x < width; ++x) {
                const Coord c{static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)};
                if (std::find(seeds.begin(), seeds.end(), c) == seeds.end())
                    scene.labels.at(x, y) = 0;
            }
        }
    }

    scene.cube.reflectance = Tensor({width, height, bands});
    float* data = scene.cube.reflectance.data();
    for (std::size_t x = 0; x < width; ++x) {
        for (std::size_t y = 0; y < height; ++y) {
            const std::vector<float>& proto = scene.prototypes[region[x * height + y] - 1];
            float* px = data + (x * height + y) * bands;
            for (std::size_t b = 0; b < bands; ++b) {
                double v = proto[b];
                if (noise_sigma > 0) v += rng.normal(0.0, noise_sigma);
                px[b] = static_cast<float>(v);
            }
        }
    }
    return scene;
}

void save_split(const SplitSpec& split, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("split: cannot write " + path);
    out << "HGSPLIT1\n";
    out << "folds = " << split.folds.size() << "\n";
    out << "block_size = " << split.block_size << "\n";
    out << "patch_radius = " << split.patch_radius << "\n";
    for (std::size_t f = 0; f < split.folds.size(); ++f) {
        out << "fold = " << f << "\n";
        out << "train =";
        for (const Coord& c : split.folds[f].train) out << ' ' << c.x << ',' << c.y;
        out << "\n";
        out << "test =";
        for (const Coord& c : split.folds[f].test) out << ' ' << c.x << ',' << c.y;
        out << "\n";
    }
    if (!out) throw IoError("split: write failed for " + path);
}

namespace {

std::vector<Coord> parse_coord_list(const std::string& body, const std::string& path) {
    std::vector<Coord> coords;
    std::stringstream ss(body);
    std::string item;
    while (ss >> item) {
        const auto comma = item.find(',');
        if (comma == std::string::npos) throw IoError("split: malformed coordinate '" + item + "' in " + path);
        coords.push_back({static_cast<std::uint32_t>(std::stoul(item.substr(0, comma))),
                          static_cast<std::uint32_t>(std::stoul(item.substr(comma + 1)))});
    }
    return coords;
}

}  // namespace

SplitSpec load_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("split: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "HGSPLIT1") throw IoError("split: bad magic in " + path);

    SplitSpec split;
    std::size_t declared_folds = 0;
    std::ptrdiff_t current = -1;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("split: malformed line '" + line + "' in " + path);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "folds") {
            declared_folds = std::stoull(value);
            split.folds.resize(declared_folds);
        } else if (key == "block_size") {
            split.block_size = std::stoull(value);
        } else if (key == "patch_radius") {
            split.patch_radius = std::stoull(value);
        } else if (key == "fold") {
            current = static_cast<std::ptrdiff_t>(std::stoull(value));
            if (current < 0 || static_cast<std::size_t>(current) >= split.folds.size())
                throw IoError("split: fold index out of range in " + path);
        } else if (key == "train" || key == "test") {
            if (current < 0) throw IoError("split: coordinate list before any fold in " + path);
            auto coords = parse_coord_list(value, path);
            if (key == "train")
                split.folds[static_cast<std::size_t>(current)].train = std::move(coords);
            else
                split.folds[static_cast<std::size_t>(current)].test = std::move(coords);
        } else {
            throw IoError("split: unknown key '" + key + "' in " + path);
        }
    }
    if (declared_folds == 0) throw IoError("split: no folds declared in " + path);
    return split;
}

}  // namespace hypergrid
