#pragma once

#include <cstdint>
#include <vector>

#include "pottsvb/grid.hpp"

namespace pottsvb {

/// Synthetic head phantom: background outside an elliptical "head",
/// interior tissue classes as concentric bands whose boundaries are
/// perturbed by seeded low-frequency sinusoids.
struct PhantomSpec {
    int height = 64;
    int width = 64;
    int num_classes = 4; // background, fluid, gray, white
    std::vector<double> class_means = {0.05, 0.35, 0.65, 0.9};
    std::vector<double> class_stddevs = {0.05, 0.05, 0.05, 0.05};

    /// Defaults adjusted to a different class count: means evenly spaced
    /// over [0.05, 0.9], stddevs 0.05.
    static PhantomSpec with_classes(int num_classes);
};

struct Phantom {
    ImageGrid image;
    LabelField labels;
    Mask mask;
};

/// Deterministic phantom for the given seed. Voxel intensities are drawn
/// from the Gaussian of the voxel's true class and clipped to [0, 1].
/// Every class is guaranteed at least 1% of the voxels (the band
/// perturbation is redrawn up to 10 times, then generation fails).
Phantom generate_phantom(const PhantomSpec& spec, std::uint64_t seed);

} // namespace pottsvb
