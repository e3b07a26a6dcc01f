#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace pottsvb {

/// H x W grid of D-dimensional voxels, row-major. Intensities are
/// conventionally in [0, 1] but this is not enforced.
class ImageGrid {
public:
    ImageGrid(int height, int width, int channels, std::vector<double> data);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    int voxel_count() const { return height_ * width_; }

    std::span<const double> voxel(int i) const {
        return {data_.data() + static_cast<std::size_t>(i) * channels_,
                static_cast<std::size_t>(channels_)};
    }
    double value(int i, int d) const { return data_[static_cast<std::size_t>(i) * channels_ + d]; }
    const std::vector<double>& data() const { return data_; }

private:
    int height_;
    int width_;
    int channels_;
    std::vector<double> data_;
};

/// Per-voxel class indices in {0, ..., K-1}; the dense encoding of a
/// one-hot segmentation.
class LabelField {
public:
    LabelField(int height, int width, int num_classes, std::vector<int> labels);

    int height() const { return height_; }
    int width() const { return width_; }
    int num_classes() const { return num_classes_; }
    int voxel_count() const { return height_ * width_; }

    int label(int i) const { return labels_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& labels() const { return labels_; }

private:
    int height_;
    int width_;
    int num_classes_;
    std::vector<int> labels_;
};

/// Per-voxel probability vector over K classes; every row sums to 1
/// within 1e-12 (validated at construction).
class ResponsibilityField {
public:
    ResponsibilityField(int height, int width, int num_classes, std::vector<double> values);

    int height() const { return height_; }
    int width() const { return width_; }
    int num_classes() const { return num_classes_; }
    int voxel_count() const { return height_ * width_; }

    std::span<const double> row(int i) const {
        return {values_.data() + static_cast<std::size_t>(i) * num_classes_,
                static_cast<std::size_t>(num_classes_)};
    }
    double at(int i, int k) const { return values_[static_cast<std::size_t>(i) * num_classes_ + k]; }
    const std::vector<double>& values() const { return values_; }

private:
    int height_;
    int width_;
    int num_classes_;
    std::vector<double> values_;
};

/// Per-voxel boolean evaluation region (true = inside).
class Mask {
public:
    Mask(int height, int width, std::vector<std::uint8_t> inside);

    int height() const { return height_; }
    int width() const { return width_; }
    int voxel_count() const { return height_ * width_; }

    bool inside(int i) const { return inside_[static_cast<std::size_t>(i)] != 0; }
    int count() const;
    const std::vector<std::uint8_t>& values() const { return inside_; }

private:
    int height_;
    int width_;
    std::vector<std::uint8_t> inside_;
};

/// Per-voxel vector of summed neighbor class weights. For one-hot input
/// each row sums to the voxel's neighbor count (4 interior, 3 edge,
/// 2 corner).
class NeighborCountField {
public:
    NeighborCountField(int height, int width, int num_classes, std::vector<double> values);

    int height() const { return height_; }
    int width() const { return width_; }
    int num_classes() const { return num_classes_; }
    int voxel_count() const { return height_ * width_; }

    std::span<const double> row(int i) const {
        return {values_.data() + static_cast<std::size_t>(i) * num_classes_,
                static_cast<std::size_t>(num_classes_)};
    }
    double at(int i, int k) const { return values_[static_cast<std::size_t>(i) * num_classes_ + k]; }

private:
    int height_;
    int width_;
    int num_classes_;
    std::vector<double> values_;
};

/// In-grid 4-connected neighbors of a voxel, in up/down/left/right order.
struct NeighborList {
    std::array<int, 4> indices;
    int count = 0;

    const int* begin() const { return indices.data(); }
    const int* end() const { return indices.data() + count; }
};

NeighborList neighbors(int i, int height, int width);

NeighborCountField neighbor_class_counts(const LabelField& labels);
NeighborCountField neighbor_class_counts(const ResponsibilityField& rho);

/// Dense N x K one-hot expansion, row-major.
std::vector<std::uint8_t> one_hot(const LabelField& labels);

/// Per-voxel argmax decode; ties broken toward the lowest class index.
LabelField argmax_labels(const ResponsibilityField& rho);

} // namespace pottsvb
