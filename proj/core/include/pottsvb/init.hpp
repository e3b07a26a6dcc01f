#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "pottsvb/grid.hpp"

namespace pottsvb {

/// A voxel with an observed class label and its intensity vector.
struct LabeledVoxel {
    int index = 0;
    int class_index = 0;
    Eigen::VectorXd intensity;
};

using LabeledVoxelSet = std::vector<LabeledVoxel>;

struct KmeansResult {
    std::vector<Eigen::VectorXd> centers;
    ResponsibilityField responsibilities;
    std::vector<double> wcss_trace; // within-cluster sum of squares per iteration
    int iterations = 0;
};

/// Lloyd's k-means on voxel intensities with k-means++ seeding (max 100
/// iterations, 1e-8 center-movement tolerance), then responsibilities
/// rho_ik proportional to exp(-||x_i - c_k||). Deterministic given seed.
KmeansResult kmeans_init(const ImageGrid& image, int num_classes, std::uint64_t seed);

/// Responsibilities from the distance to the nearest labeled voxel of each
/// class in intensity space: rho_ik proportional to exp(-d_k). Labeled
/// voxels themselves get exact one-hot rows.
ResponsibilityField knn_init(const ImageGrid& image, const LabeledVoxelSet& labeled,
                             int num_classes);

/// Uniformly samples per_class voxel indices per class without
/// replacement; intensities filled from the image. Deterministic given seed.
LabeledVoxelSet sample_labels(const ImageGrid& image, const LabelField& truth, int per_class,
                              std::uint64_t seed);

} // namespace pottsvb
