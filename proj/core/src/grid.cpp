#include "pottsvb/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pottsvb {

namespace {

void check_dims(int height, int width, const char* what) {
    if (height < 1 || width < 1) {
        throw std::invalid_argument(std::string(what) + ": height and width must be >= 1");
    }
}

} // namespace

ImageGrid::ImageGrid(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_dims(height, width, "ImageGrid");
    if (channels < 1) {
        throw std::invalid_argument("ImageGrid: channels must be >= 1");
    }
    const std::size_t expected =
        static_cast<std::size_t>(height) * width * channels;
    if (data_.size() != expected) {
        throw std::invalid_argument("ImageGrid: data length " + std::to_string(data_.size()) +
                                    " does not equal H*W*D = " + std::to_string(expected));
    }
}

LabelField::LabelField(int height, int width, int num_classes, std::vector<int> labels)
    : height_(height), width_(width), num_classes_(num_classes), labels_(std::move(labels)) {
    check_dims(height, width, "LabelField");
    if (num_classes < 1) {
        throw std::invalid_argument("LabelField: num_classes must be >= 1");
    }
    if (labels_.size() != static_cast<std::size_t>(height) * width) {
        throw std::invalid_argument("LabelField: label count does not equal H*W");
    }
    for (const int y : labels_) {
        if (y < 0 || y >= num_classes) {
            throw std::invalid_argument("LabelField: label " + std::to_string(y) +
                                        " out of range for K = " + std::to_string(num_classes));
        }
    }
}

ResponsibilityField::ResponsibilityField(int height, int width, int num_classes,
                                         std::vector<double> values)
    : height_(height), width_(width), num_classes_(num_classes), values_(std::move(values)) {
    check_dims(height, width, "ResponsibilityField");
    if (num_classes < 1) {
        throw std::invalid_argument("ResponsibilityField: num_classes must be >= 1");
    }
    const std::size_t n = static_cast<std::size_t>(height) * width;
    if (values_.size() != n * num_classes) {
        throw std::invalid_argument("ResponsibilityField: value count does not equal H*W*K");
    }
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int k = 0; k < num_classes; ++k) {
            const double v = values_[i * num_classes + k];
            if (!(v >= 0.0 && v <= 1.0)) {
                throw std::invalid_argument("ResponsibilityField: entry outside [0, 1] at voxel " +
                                            std::to_string(i));
            }
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-12) {
            throw std::invalid_argument("ResponsibilityField: row " + std::to_string(i) +
                                        " sums to " + std::to_string(sum) + ", not 1");
        }
    }
}

Mask::Mask(int height, int width, std::vector<std::uint8_t> inside)
    : height_(height), width_(width), inside_(std::move(inside)) {
    check_dims(height, width, "Mask");
    if (inside_.size() != static_cast<std::size_t>(height) * width) {
        throw std::invalid_argument("Mask: value count does not equal H*W");
    }
}

int Mask::count() const {
    return static_cast<int>(std::count_if(inside_.begin(), inside_.end(),
                                          [](std::uint8_t v) { return v != 0; }));
}

NeighborCountField::NeighborCountField(int height, int width, int num_classes,
                                       std::vector<double> values)
    : height_(height), width_(width), num_classes_(num_classes), values_(std::move(values)) {
    check_dims(height, width, "NeighborCountField");
    if (num_classes < 1) {
        throw std::invalid_argument("NeighborCountField: num_classes must be >= 1");
    }
    if (values_.size() != static_cast<std::size_t>(height) * width * num_classes) {
        throw std::invalid_argument("NeighborCountField: value count does not equal H*W*K");
    }
}

NeighborList neighbors(int i, int height, int width) {
    if (i < 0 || i >= height * width) {
        throw std::invalid_argument("neighbors: voxel index " + std::to_string(i) +
                                    " out of range for " + std::to_string(height) + "x" +
                                    std::to_string(width) + " grid");
    }
    const int y = i / width;
    const int x = i % width;
    NeighborList out;
    if (y > 0) out.indices[out.count++] = i - width;
    if (y < height - 1) out.indices[out.count++] = i + width;
    if (x > 0) out.indices[out.count++] = i - 1;
    if (x < width - 1) out.indices[out.count++] = i + 1;
    return out;
}

NeighborCountField neighbor_class_counts(const LabelField& labels) {
    const int h = labels.height();
    const int w = labels.width();
    const int k = labels.num_classes();
    const int n = labels.voxel_count();
    std::vector<double> counts(static_cast<std::size_t>(n) * k, 0.0);
    for (int i = 0; i < n; ++i) {
        for (const int j : neighbors(i, h, w)) {
            counts[static_cast<std::size_t>(i) * k + labels.label(j)] += 1.0;
        }
    }
    return {h, w, k, std::move(counts)};
}

NeighborCountField neighbor_class_counts(const ResponsibilityField& rho) {
    const int h = rho.height();
    const int w = rho.width();
    const int kk = rho.num_classes();
    const int n = rho.voxel_count();
    std::vector<double> counts(static_cast<std::size_t>(n) * kk, 0.0);
    for (int i = 0; i < n; ++i) {
        double* row = counts.data() + static_cast<std::size_t>(i) * kk;
        for (const int j : neighbors(i, h, w)) {
            const auto weights = rho.row(j);
            for (int k = 0; k < kk; ++k) {
                row[k] += weights[k];
            }
        }
    }
    return {h, w, kk, std::move(counts)};
}

std::vector<std::uint8_t> one_hot(const LabelField& labels) {
    const int k = labels.num_classes();
    std::vector<std::uint8_t> out(static_cast<std::size_t>(labels.voxel_count()) * k, 0);
    for (int i = 0; i < labels.voxel_count(); ++i) {
        out[static_cast<std::size_t>(i) * k + labels.label(i)] = 1;
    }
    return out;
}

LabelField argmax_labels(const ResponsibilityField& rho) {
    const int n = rho.voxel_count();
    const int kk = rho.num_classes();
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto row = rho.row(i);
        int best = 0;
        for (int k = 1; k < kk; ++k) {
            if (row[k] > row[best]) best = k;
        }
        labels[static_cast<std::size_t>(i)] = best;
    }
    return {rho.height(), rho.width(), kk, std::move(labels)};
}

} // namespace pottsvb
