#include "hypergrid/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hypergrid {

AugmentationKind augmentation_from_string(const std::string& name) {
    if (name == "none") return AugmentationKind::None;
    if (name == "rotate") return AugmentationKind::Rotate;
    if (name == "flip") return AugmentationKind::Flip;
    if (name == "zoom") return AugmentationKind::Zoom;
    if (name == "mixed") return AugmentationKind::Mixed;
    throw ConfigError("augmentation: unknown kind '" + name + "' (none|rotate|flip|zoom|mixed)");
}

std::string to_string(AugmentationKind kind) {
    switch (kind) {
        case AugmentationKind::None: return "none";
        case AugmentationKind::Rotate: return "rotate";
        case AugmentationKind::Flip: return "flip";
        case AugmentationKind::Zoom: return "zoom";
        case AugmentationKind::Mixed: return "mixed";
    }
    return "none";
}

AugmentationBudget compute_budget(const std::vector<std::size_t>& class_counts) {
    if (class_counts.empty() || std::all_of(class_counts.begin(), class_counts.end(),
                                            [](std::size_t n) { return n == 0; }))
        throw std::invalid_argument("budget: no training samples in any class");
    const std::size_t n_max = *std::max_element(class_counts.begin(), class_counts.end());
    AugmentationBudget budget;
    budget.originals = class_counts;
    budget.synthetic.resize(class_counts.size());
    for (std::size_t c = 0; c < class_counts.size(); ++c)
        budget.synthetic[c] = std::min(class_counts[c], n_max - class_counts[c]);
    return budget;
}

Sample flip_sample(const Sample& sample, FlipAxis axis) {
    const std::size_t a = sample.patch.extent(0), b = sample.patch.extent(1),
                      bands = sample.patch.extent(2);
    Sample out = sample;
    out.synthetic = true;
    const float* src = sample.patch.data();
    float* dst = out.patch.data();
    for (std::size_t x = 0; x < a; ++x) {
        for (std::size_t y = 0; y < b; ++y) {
            const std::size_t sx = axis == FlipAxis::Horizontal ? a - 1 - x : x;
            const std::size_t sy = axis == FlipAxis::Vertical ? b - 1 - y : y;
            std::copy(src + (sx * b + sy) * bands, src + (sx * b + sy + 1) * bands,
                      dst + (x * b + y) * bands);
        }
    }
    return out;
}

std::size_t rotation_source_extent(std::size_t patch_size) {
    std::size_t e = static_cast<std::size_t>(
        std::ceil(static_cast<double>(patch_size) * std::numbers::sqrt2));
    if (e % 2 == 0) ++e;
    return e;
}

Sample rotate_sample(const PaddedCube& padded, Coord origin, int label, double angle_deg,
                     std::size_t patch_size) {
    const std::size_t src_size = rotation_source_extent(patch_size);
    const std::size_t src_half = (src_size - 1) / 2;
    if (padded.radius < src_half)
        throw std::out_of_range("rotate: padding radius " + std::to_string(padded.radius) +
                                " cannot host the " + std::to_string(src_size) + "-wide source window");

    const Tensor source = extract_patch(padded, origin.x, origin.y, src_size);
    const std::size_t bands = padded.bands;

    const double theta = angle_deg * std::numbers::pi / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double src_c = static_cast<double>(src_half);
    const double out_c = static_cast<double>(patch_size - 1) / 2.0;

    Sample out;
    out.patch = Tensor({patch_size, patch_size, bands});
    out.label = label;
    out.origin = origin;
    out.synthetic = true;

    const float* sdata = source.data();
    float* odata = out.patch.data();
    for (std::size_t i = 0; i < patch_size; ++i) {
        for (std::size_t j = 0; j < patch_size; ++j) {
            // Inverse-rotate the target cell into the source window.
            const double u = static_cast<double>(i) - out_c;
            const double v = static_cast<double>(j) - out_c;
            const double xs = src_c + ct * u + st * v;
            const double ys = src_c - st * u + ct * v;
            // The crop radius is < src_half, so all four neighbors exist.
            const std::size_t x0 = static_cast<std::size_t>(std::floor(xs));
            const std::size_t y0 = static_cast<std::size_t>(std::floor(ys));
            const double fx = xs - static_cast<double>(x0);
            const double fy = ys - static_cast<double>(y0);
            const std::size_t x1 = std::min(x0 + 1, src_size - 1);
            const std::size_t y1 = std::min(y0 + 1, src_size - 1);
            const float* p00 = sdata + (x0 * src_size + y0) * bands;
            const float* p01 = sdata + (x0 * src_size + y1) * bands;
            const float* p10 = sdata + (x1 * src_size + y0) * bands;
            const float* p11 = sdata + (x1 * src_size + y1) * bands;
            float* dst = odata + (i * patch_size + j) * bands;
            for (std::size_t band = 0; band < bands; ++band) {
                const double top = (1.0 - fx) * p00[band] + fx * p10[band];
                const double bot = (1.0 - fx) * p01[band] + fx * p11[band];
                dst[band] = static_cast<float>((1.0 - fy) * top + fy * bot);
            }
        }
    }
    return out;
}

Sample zoom_sample(const Sample& sample, double factor) {
    if (factor < 1.1 || factor > 1.5)
        throw std::invalid_argument("zoom: factor " + std::to_string(factor) +
                                    " outside [1.1, 1.5]");
    const std::size_t a = sample.patch.extent(0), b = sample.patch.extent(1),
                      bands = sample.patch.extent(2);
    Sample out = sample;
    out.synthetic = true;
    const double cx = static_cast<double>(a - 1) / 2.0;
    const double cy = static_cast<double>(b - 1) / 2.0;
    const float* sdata = sample.patch.data();
    float* odata = out.patch.data();
    for (std::size_t i = 0; i < a; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            const double xs = cx + (static_cast<double>(i) - cx) / factor;
            const double ys = cy + (static_cast<double>(j) - cy) / factor;
            const std::size_t x0 = static_cast<std::size_t>(std::floor(xs));
            const std::size_t y0 = static_cast<std::size_t>(std::floor(ys));
            const double fx = xs - static_cast<double>(x0);
            const double fy = ys - static_cast<double>(y0);
            const std::size_t x1 = std::min(x0 + 1, a - 1);
            const std::size_t y1 = std::min(y0 + 1, b - 1);
            const float* p00 = sdata + (x0 * b + y0) * bands;
            const float* p01 = sdata + (x0 * b + y1) * bands;
            const float* p10 = sdata + (x1 * b + y0) * bands;
            const float* p11 = sdata + (x1 * b + y1) * bands;
            float* dst = odata + (i * b + j) * bands;
            for (std::size_t band = 0; band < bands; ++band) {
                const double top = (1.0 - fx) * p00[band] + fx * p10[band];
                const double bot = (1.0 - fx) * p01[band] + fx * p11[band];
                dst[band] = static_cast<float>((1.0 - fy) * top + fy * bot);
            }
        }
    }
    return out;
}

std::vector<Sample> augment_training_set(const PaddedCube& padded, const std::vector<Sample>& train,
                                         AugmentationKind kind, const AugmentationBudget& budget,
                                         SeededRng& rng) {
    std::vector<Sample> out = train;
    if (kind == AugmentationKind::None) return out;
    if (train.empty()) throw std::invalid_argument("augment: empty training set");

    const std::size_t classes = budget.originals.size();
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const int label = train[i].label;
        if (label < 1 || static_cast<std::size_t>(label) > classes)
            throw std::invalid_argument("augment: sample label outside the budget's class range");
        by_class[static_cast<std::size_t>(label - 1)].push_back(i);
    }
    for (std::size_t c = 0; c < classes; ++c)
        if (by_class[c].size() != budget.originals[c])
            throw std::invalid_argument("augment: budget originals do not match the sample counts");

    const std::size_t patch_size = train.front().patch.extent(0);
    for (std::size_t c = 0; c < classes; ++c) {
        if (budget.synthetic[c] == 0) continue;
        // Per-class stream so classes could be synthesized in parallel.
        SeededRng class_rng = rng.fork(c + 1);
        for (std::size_t s = 0; s < budget.synthetic[c]; ++s) {
            const Sample& source = train[by_class[c][class_rng.below(by_class[c].size())]];
            AugmentationKind op = kind;
            if (kind == AugmentationKind::Mixed) {
                switch (class_rng.below(3)) {
                    case 0: op = AugmentationKind::Rotate; break;
                    case 1: op = AugmentationKind::Flip; break;
                    default: op = AugmentationKind::Zoom; break;
                }
            }
            switch (op) {
                case AugmentationKind::Rotate:
                    out.push_back(rotate_sample(padded, source.origin, source.label,
                                                class_rng.uniform(0.0, 360.0), patch_size));
                    break;
                case AugmentationKind::Flip:
                    out.push_back(flip_sample(source, class_rng.below(2) == 0 ? FlipAxis::Horizontal
                                                                              : FlipAxis::Vertical));
                    break;
                case AugmentationKind::Zoom:
                    out.push_back(zoom_sample(source, class_rng.uniform(1.1, 1.5)));
                    break;
                default:
                    break;
            }
        }
    }
    return out;
}

}  // namespace hypergrid
