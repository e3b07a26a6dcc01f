#include "pottsvb/init.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "pottsvb/rng.hpp"

namespace pottsvb {

namespace {

double squared_distance(std::span<const double> x, const Eigen::VectorXd& c) {
    double sum = 0.0;
    for (Eigen::Index d = 0; d < c.size(); ++d) {
        const double diff = x[static_cast<std::size_t>(d)] - c(d);
        sum += diff * diff;
    }
    return sum;
}

// Responsibilities from exp(-distance) kernels, normalized per voxel.
ResponsibilityField distance_kernel_responsibilities(const ImageGrid& image,
                                                     const std::vector<Eigen::VectorXd>& anchors) {
    const int n = image.voxel_count();
    const int kk = static_cast<int>(anchors.size());
    std::vector<double> values(static_cast<std::size_t>(n) * kk);
    std::vector<double> kernel(static_cast<std::size_t>(kk));
    for (int i = 0; i < n; ++i) {
        const auto x = image.voxel(i);
        double sum = 0.0;
        for (int k = 0; k < kk; ++k) {
            const double d = std::sqrt(squared_distance(x, anchors[static_cast<std::size_t>(k)]));
            kernel[static_cast<std::size_t>(k)] = std::exp(-d);
            sum += kernel[static_cast<std::size_t>(k)];
        }
        double* row = values.data() + static_cast<std::size_t>(i) * kk;
        for (int k = 0; k < kk; ++k) {
            row[k] = kernel[static_cast<std::size_t>(k)] / sum;
        }
    }
    return {image.height(), image.width(), kk, std::move(values)};
}

} // namespace

KmeansResult kmeans_init(const ImageGrid& image, int num_classes, std::uint64_t seed) {
    const int n = image.voxel_count();
    if (num_classes < 1) {
        throw std::invalid_argument("kmeans_init: num_classes must be >= 1");
    }
    if (num_classes > n) {
        throw std::invalid_argument("kmeans_init: K = " + std::to_string(num_classes) +
                                    " exceeds voxel count " + std::to_string(n));
    }
    const int dim = image.channels();
    Rng rng(seed);

    auto voxel_vector = [&](int i) {
        Eigen::VectorXd v(dim);
        const auto x = image.voxel(i);
        for (int d = 0; d < dim; ++d) v(d) = x[static_cast<std::size_t>(d)];
        return v;
    };

    // k-means++ seeding: first center uniform, later centers sampled with
    // probability proportional to squared distance from the chosen set.
    std::vector<Eigen::VectorXd> centers;
    centers.reserve(static_cast<std::size_t>(num_classes));
    centers.push_back(voxel_vector(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)))));
    std::vector<double> min_sq(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        min_sq[static_cast<std::size_t>(i)] = squared_distance(image.voxel(i), centers.front());
    }
    while (static_cast<int>(centers.size()) < num_classes) {
        double total = 0.0;
        for (const double d : min_sq) total += d;
        int chosen;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double cum = 0.0;
            chosen = n - 1;
            for (int i = 0; i < n; ++i) {
                cum += min_sq[static_cast<std::size_t>(i)];
                if (cum >= target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            // All points coincide with existing centers; fall back to uniform.
            chosen = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
        }
        centers.push_back(voxel_vector(chosen));
        for (int i = 0; i < n; ++i) {
            min_sq[static_cast<std::size_t>(i)] = std::min(
                min_sq[static_cast<std::size_t>(i)], squared_distance(image.voxel(i), centers.back()));
        }
    }

    // Lloyd iterations.
    constexpr int kMaxIterations = 100;
    constexpr double kMoveTolerance = 1e-8;
    std::vector<int> assignment(static_cast<std::size_t>(n), 0);
    std::vector<double> wcss_trace;
    int iterations = 0;
    for (int iter = 1; iter <= kMaxIterations; ++iter) {
        // Assignment step (ties toward the lowest center index).
        double wcss = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto x = image.voxel(i);
            double best = std::numeric_limits<double>::infinity();
            int best_k = 0;
            for (int k = 0; k < num_classes; ++k) {
                const double d = squared_distance(x, centers[static_cast<std::size_t>(k)]);
                if (d < best) {
                    best = d;
                    best_k = k;
                }
            }
            assignment[static_cast<std::size_t>(i)] = best_k;
            wcss += best;
        }
        wcss_trace.push_back(wcss);
        iterations = iter;

        // Update step; empty clusters keep their center.
        std::vector<Eigen::VectorXd> sums(static_cast<std::size_t>(num_classes),
                                          Eigen::VectorXd::Zero(dim));
        std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
        for (int i = 0; i < n; ++i) {
            const int k = assignment[static_cast<std::size_t>(i)];
            const auto x = image.voxel(i);
            auto& s = sums[static_cast<std::size_t>(k)];
            for (int d = 0; d < dim; ++d) s(d) += x[static_cast<std::size_t>(d)];
            ++counts[static_cast<std::size_t>(k)];
        }
        double max_move = 0.0;
        for (int k = 0; k < num_classes; ++k) {
            if (counts[static_cast<std::size_t>(k)] == 0) continue;
            const Eigen::VectorXd updated =
                sums[static_cast<std::size_t>(k)] / counts[static_cast<std::size_t>(k)];
            max_move = std::max(max_move, (updated - centers[static_cast<std::size_t>(k)]).norm());
            centers[static_cast<std::size_t>(k)] = updated;
        }
        if (max_move <= kMoveTolerance) {
            break;
        }
    }

    return {centers, distance_kernel_responsibilities(image, centers), std::move(wcss_trace),
            iterations};
}

ResponsibilityField knn_init(const ImageGrid& image, const LabeledVoxelSet& labeled,
                             int num_classes) {
    if (labeled.empty()) {
        throw std::invalid_argument("knn_init: labeled voxel set is empty");
    }
    const int n = image.voxel_count();
    const int dim = image.channels();
    for (const LabeledVoxel& lv : labeled) {
        if (lv.index < 0 || lv.index >= n) {
            throw std::invalid_argument("knn_init: labeled voxel index out of range");
        }
        if (lv.class_index < 0 || lv.class_index >= num_classes) {
            throw std::invalid_argument("knn_init: labeled class index out of range");
        }
        if (lv.intensity.size() != dim) {
            throw std::invalid_argument("knn_init: labeled intensity dimension mismatch");
        }
    }
    std::vector<bool> covered(static_cast<std::size_t>(num_classes), false);
    for (const LabeledVoxel& lv : labeled) {
        covered[static_cast<std::size_t>(lv.class_index)] = true;
    }
    for (int k = 0; k < num_classes; ++k) {
        if (!covered[static_cast<std::size_t>(k)]) {
            throw std::invalid_argument("knn_init: no labeled voxel for class " +
                                        std::to_string(k));
        }
    }

    std::vector<double> values(static_cast<std::size_t>(n) * num_classes);
    std::vector<double> kernel(static_cast<std::size_t>(num_classes));
    for (int i = 0; i < n; ++i) {
        const auto x = image.voxel(i);
        double sum = 0.0;
        for (int k = 0; k < num_classes; ++k) {
            double min_d = std::numeric_limits<double>::infinity();
            for (const LabeledVoxel& lv : labeled) {
                if (lv.class_index != k) continue;
                min_d = std::min(min_d, std::sqrt(squared_distance(x, lv.intensity)));
            }
            kernel[static_cast<std::size_t>(k)] = std::exp(-min_d);
            sum += kernel[static_cast<std::size_t>(k)];
        }
        double* row = values.data() + static_cast<std::size_t>(i) * num_classes;
        for (int k = 0; k < num_classes; ++k) {
            row[k] = kernel[static_cast<std::size_t>(k)] / sum;
        }
    }
    // Labeled voxels are observed: exact one-hot.
    for (const LabeledVoxel& lv : labeled) {
        double* row = values.data() + static_cast<std::size_t>(lv.index) * num_classes;
        std::fill(row, row + num_classes, 0.0);
        row[lv.class_index] = 1.0;
    }
    return {image.height(), image.width(), num_classes, std::move(values)};
}

LabeledVoxelSet sample_labels(const ImageGrid& image, const LabelField& truth, int per_class,
                              std::uint64_t seed) {
    if (per_class < 0) {
        throw std::invalid_argument("sample_labels: per_class must be >= 0");
    }
    if (truth.height() != image.height() || truth.width() != image.width()) {
        throw std::invalid_argument("sample_labels: truth grid does not match image");
    }
    const int kk = truth.num_classes();
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(kk));
    for (int i = 0; i < truth.voxel_count(); ++i) {
        by_class[static_cast<std::size_t>(truth.label(i))].push_back(i);
    }

    Rng rng(seed);
    LabeledVoxelSet out;
    out.reserve(static_cast<std::size_t>(kk) * per_class);
    for (int k = 0; k < kk; ++k) {
        auto& pool = by_class[static_cast<std::size_t>(k)];
        if (static_cast<int>(pool.size()) < per_class) {
            throw std::invalid_argument("sample_labels: class " + std::to_string(k) + " has " +
                                        std::to_string(pool.size()) + " voxels, need " +
                                        std::to_string(per_class));
        }
        // Partial Fisher-Yates: the first per_class entries are the sample.
        for (int j = 0; j < per_class; ++j) {
            const std::size_t pick =
                j + rng.uniform_int(static_cast<std::uint64_t>(pool.size() - j));
            std::swap(pool[static_cast<std::size_t>(j)], pool[pick]);
            const int idx = pool[static_cast<std::size_t>(j)];
            LabeledVoxel lv;
            lv.index = idx;
            lv.class_index = k;
            const auto x = image.voxel(idx);
            lv.intensity.resize(image.channels());
            for (int d = 0; d < image.channels(); ++d) {
                lv.intensity(d) = x[static_cast<std::size_t>(d)];
            }
            out.push_back(std::move(lv));
        }
    }
    return out;
}

} // namespace pottsvb
