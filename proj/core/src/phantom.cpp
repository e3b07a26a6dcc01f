#include "pottsvb/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pottsvb/errors.hpp"
#include "pottsvb/rng.hpp"

namespace pottsvb {

PhantomSpec PhantomSpec::with_classes(int num_classes) {
    PhantomSpec spec;
    spec.num_classes = num_classes;
    spec.class_means.clear();
    spec.class_stddevs.clear();
    for (int k = 0; k < num_classes; ++k) {
        const double t = num_classes > 1 ? static_cast<double>(k) / (num_classes - 1) : 0.0;
        spec.class_means.push_back(0.05 + t * (0.9 - 0.05));
        spec.class_stddevs.push_back(0.05);
    }
    return spec;
}

namespace {

void validate(const PhantomSpec& spec) {
    if (spec.height < 1 || spec.width < 1) {
        throw std::invalid_argument("generate_phantom: height and width must be >= 1");
    }
    if (spec.num_classes < 1) {
        throw std::invalid_argument("generate_phantom: num_classes must be >= 1");
    }
    if (spec.class_means.size() != static_cast<std::size_t>(spec.num_classes) ||
        spec.class_stddevs.size() != static_cast<std::size_t>(spec.num_classes)) {
        throw std::invalid_argument("generate_phantom: means/stddevs must have K entries");
    }
    for (const double m : spec.class_means) {
        if (!(m >= 0.0 && m <= 1.0)) {
            throw std::invalid_argument("generate_phantom: class means must lie in [0, 1]");
        }
    }
    for (const double s : spec.class_stddevs) {
        if (!(s > 0.0)) {
            throw std::invalid_argument("generate_phantom: class stddevs must be > 0");
        }
    }
}

struct BandPerturbation {
    double amp1, freq1, phase1;
    double amp2, freq2, phase2;

    double displacement(double theta) const {
        return amp1 * std::sin(freq1 * theta + phase1) + amp2 * std::sin(freq2 * theta + phase2);
    }
};

} // namespace

Phantom generate_phantom(const PhantomSpec& spec, std::uint64_t seed) {
    validate(spec);
    const int h = spec.height;
    const int w = spec.width;
    const int kk = spec.num_classes;
    const int n = h * w;
    Rng rng(seed);

    const double cy = (h - 1) / 2.0;
    const double cx = (w - 1) / 2.0;
    const double semi_y = 0.45 * h;
    const double semi_x = 0.45 * w;

    // Interior band boundaries at equal-area radii; K - 1 interior bands.
    std::vector<double> boundaries; // descending, between 0 and 1
    for (int j = 1; j <= kk - 2; ++j) {
        boundaries.push_back(std::sqrt(static_cast<double>(kk - 1 - j) / (kk - 1)));
    }

    const int min_per_class = std::max(1, static_cast<int>(std::ceil(0.01 * n)));
    std::vector<int> labels(static_cast<std::size_t>(n));
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n));

    bool balanced = false;
    for (int attempt = 0; attempt < 10 && !balanced; ++attempt) {
        BandPerturbation pert;
        pert.amp1 = rng.uniform(0.02, 0.06);
        pert.freq1 = 2.0;
        pert.phase1 = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        pert.amp2 = rng.uniform(0.02, 0.06);
        pert.freq2 = 3.0;
        pert.phase2 = rng.uniform(0.0, 2.0 * 3.14159265358979323846);

        std::vector<int> counts(static_cast<std::size_t>(kk), 0);
        for (int i = 0; i < n; ++i) {
            const double dy = (i / w - cy) / semi_y;
            const double dx = (i % w - cx) / semi_x;
            const double r = std::sqrt(dy * dy + dx * dx);
            const bool inside = r <= 1.0;
            mask[static_cast<std::size_t>(i)] = inside ? 1 : 0;
            int label = 0;
            if (inside && kk > 1) {
                const double theta = std::atan2(dy, dx);
                const double r_pert = std::max(0.0, r + pert.displacement(theta));
                label = 1;
                for (const double b : boundaries) {
                    if (r_pert <= b) ++label;
                }
            }
            labels[static_cast<std::size_t>(i)] = label;
            ++counts[static_cast<std::size_t>(label)];
        }
        balanced = std::all_of(counts.begin(), counts.end(),
                               [&](int c) { return c >= min_per_class; });
    }
    if (!balanced) {
        throw numeric_error("generate_phantom: a class stays below 1% of voxels after 10 "
                            "perturbation redraws");
    }

    std::vector<double> intensity(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int k = labels[static_cast<std::size_t>(i)];
        const double v = spec.class_means[static_cast<std::size_t>(k)] +
                         spec.class_stddevs[static_cast<std::size_t>(k)] * rng.normal();
        intensity[static_cast<std::size_t>(i)] = std::clamp(v, 0.0, 1.0);
    }

    return {ImageGrid(h, w, 1, std::move(intensity)), LabelField(h, w, kk, std::move(labels)),
            Mask(h, w, std::move(mask))};
}

} // namespace pottsvb
