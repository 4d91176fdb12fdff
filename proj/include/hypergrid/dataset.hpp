#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hypergrid/errors.hpp"
#include "hypergrid/rng.hpp"
#include "hypergrid/tensor.hpp"

namespace hypergrid {

// (x, y) pixel coordinate; x indexes width, y indexes height.
struct Coord {
    std::uint32_t x = 0, y = 0;
    bool operator==(const Coord&) const = default;
    bool operator<(const Coord& o) const { return x != o.x ? x < o.x : y < o.y; }
};

// Reflectance tensor stored (width, height, bands) row-major:
// offset(x, y, band) = (x * height + y) * bands + band.
struct HsiCube {
    std::size_t width = 0, height = 0, bands = 0;
    Tensor reflectance;

    float at(std::size_t x, std::size_t y, std::size_t band) const {
        return reflectance[(x * height + y) * bands + band];
    }
};

// Class ids 1..num_classes; 0 marks unlabeled background, which is excluded
// from training, testing and every metric.
struct LabelMap {
    std::size_t width = 0, height = 0;
    std::vector<std::uint16_t> labels;  // offset(x, y) = x * height + y

    std::uint16_t at(std::size_t x, std::size_t y) const { return labels[x * height + y]; }
    std::uint16_t& at(std::size_t x, std::size_t y) { return labels[x * height + y]; }
    std::uint16_t num_classes() const {
        std::uint16_t m = 0;
        for (std::uint16_t v : labels) m = std::max(m, v);
        return m;
    }
    std::vector<Coord> labeled_coords() const;
};

// Spatially mirror-padded cube; patch extraction addresses original
// coordinates, the padding keeps border-centered patches in range.
struct PaddedCube {
    std::size_t width = 0, height = 0, bands = 0;  // original extents
    std::size_t radius = 0;
    Tensor data;  // (width + 2r, height + 2r, bands)

    float at(std::size_t px, std::size_t py, std::size_t band) const {
        return data[(px * (height + 2 * radius) + py) * bands + band];
    }
};

struct Sample {
    Tensor patch;  // (a, b, bands)
    int label = 0;
    Coord origin;
    bool synthetic = false;
};

struct NormalizationStats {
    std::vector<float> min, max;  // one pair per band
};

struct SplitFold {
    std::vector<Coord> train, test;
};

// Per-fold train/test pixel assignment with the no-overlap guarantee for
// patches of radius patch_radius.
struct SplitSpec {
    std::vector<SplitFold> folds;
    std::size_t patch_radius = 0;
    std::size_t block_size = 0;
};

struct LeakageReport {
    std::size_t overlap_violations = 0;
    std::size_t partition_violations = 0;
    std::optional<std::pair<Coord, Coord>> first_offender;  // (train, test)

    bool ok() const { return overlap_violations == 0 && partition_violations == 0; }
};

struct SynthScene {
    HsiCube cube;
    LabelMap labels;
    std::vector<std::vector<float>> prototypes;  // per class, noise-free spectrum
};

// Scene files: "HGCUBE1" text header (<base>.hgc) plus raw little-endian f32
// payload (<base>.hgc.raw); labels in a single "HGLAB1" file (text header,
// then little-endian u16 payload). See docs/formats.md.
void save_cube(const HsiCube& cube, const std::string& header_path);
HsiCube load_cube(const std::string& header_path);
void save_labels(const LabelMap& labels, const std::string& path);
LabelMap load_labels(const std::string& path);

// Loads both files and rejects mismatched extents.
std::pair<HsiCube, LabelMap> load_scene(const std::string& cube_header, const std::string& labels_path);

// Reflect-without-repeat index: [1,2,3] padded by 1 reads [2,1,2,3,2].
std::size_t mirror_index(std::ptrdiff_t i, std::size_t n);

// Spatial reflection padding; the spectral axis is untouched.
PaddedCube mirror_pad(const HsiCube& cube, std::size_t radius);

// The s x s spatial window (s odd) centered on original coordinate (x, y).
Tensor extract_patch(const PaddedCube& padded, std::size_t x, std::size_t y, std::size_t size);

// Per-band min/max over the given training pixels only.
NormalizationStats fit_normalization(const HsiCube& cube, const std::vector<Coord>& train_coords);

// Linear map of each band to [0,1] by the fitted stats; constant bands go to
// 0; values outside the fitted range are not clipped.
HsiCube apply_normalization(const HsiCube& cube, const NormalizationStats& stats);

// Tiles the scene into g x g blocks, assigns each block wholly to one fold
// (stratified by the block's dominant class), and prunes every training pixel
// whose patch would share any pixel with a test patch of that fold.
SplitSpec generate_patch_splits(const LabelMap& labels, std::size_t folds, std::size_t block_size,
                                std::size_t patch_radius, SeededRng& rng);

// Brute-force audit of the split invariant: walks every train-patch pixel
// against the set of all test-patch pixels, per fold, and checks the fold
// partition. Violations are data, not errors.
LeakageReport verify_no_leakage(const SplitSpec& split, const LabelMap& labels);

// Random scene: per-class smooth spectral prototypes (Gaussian bump mixtures),
// Voronoi class regions grown from seed pixels, iid Gaussian noise, and a few
// unlabeled background strips.
SynthScene synth_scene(SeededRng& rng, std::size_t width, std::size_t height, std::size_t bands,
                       std::size_t classes, double noise_sigma);

// SplitSpec as structured text ("HGSPLIT1").
void save_split(const SplitSpec& split, const std::string& path);
SplitSpec load_split(const std::string& path);

}  // namespace hypergrid
