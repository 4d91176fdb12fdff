#pragma once

#include <string>
#include <vector>

#include "hypergrid/dataset.hpp"
#include "hypergrid/rng.hpp"

namespace hypergrid {

enum class AugmentationKind { None, Rotate, Flip, Zoom, Mixed };

AugmentationKind augmentation_from_string(const std::string& name);
std::string to_string(AugmentationKind kind);

// Per-class synthesis budget: each class is at most doubled, and never past
// the size of the most numerous class, so at least half of every class's
// training examples stay original.
struct AugmentationBudget {
    std::vector<std::size_t> originals;  // n_c, index = class id - 1
    std::vector<std::size_t> synthetic;  // s_c = max(0, min(n_c, N_max - n_c))
};

AugmentationBudget compute_budget(const std::vector<std::size_t>& class_counts);

enum class FlipAxis { Horizontal, Vertical };

// Reverses one spatial axis of the patch; bands untouched.
Sample flip_sample(const Sample& sample, FlipAxis axis);

// Smallest odd source window that contains a patch_size x patch_size crop
// under any rotation (>= patch_size * sqrt 2).
std::size_t rotation_source_extent(std::size_t patch_size);

// Pulls an enlarged window around the origin, rotates every band's plane by
// angle_deg (bilinear), and crops the central patch, so rotated patches are
// never cut off and need no fill value.
Sample rotate_sample(const PaddedCube& padded, Coord origin, int label, double angle_deg,
                     std::size_t patch_size);

// Bilinear zoom-in: resamples the central (size/factor)-wide sub-window onto
// the full patch grid. factor must lie in [1.1, 1.5].
Sample zoom_sample(const Sample& sample, double factor);

// Appends budget.synthetic[c] synthetic samples per class, drawing source
// samples uniformly with replacement and applying the kind's operation
// (Mixed picks one of rotate/flip/zoom per sample). Originals are returned
// untouched; synthesis happens once, before training.
std::vector<Sample> augment_training_set(const PaddedCube& padded, const std::vector<Sample>& train,
                                         AugmentationKind kind, const AugmentationBudget& budget,
                                         SeededRng& rng);

}  // namespace hypergrid
