#include "pottsvb/potts.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pottsvb/errors.hpp"

namespace pottsvb {

SmoothnessParams::SmoothnessParams(std::vector<double> beta, double beta_max)
    : beta_(std::move(beta)), beta_max_(beta_max) {
    if (beta_.empty()) {
        throw std::invalid_argument("SmoothnessParams: at least one class required");
    }
    if (!(beta_max > 0.0)) {
        throw std::invalid_argument("SmoothnessParams: beta_max must be > 0");
    }
    for (const double b : beta_) {
        if (!(b >= 0.0 && b <= beta_max)) {
            throw std::invalid_argument("SmoothnessParams: beta entries must lie in [0, beta_max]");
        }
    }
}

SmoothnessParams SmoothnessParams::zeros(int num_classes, double beta_max) {
    return SmoothnessParams(std::vector<double>(static_cast<std::size_t>(num_classes), 0.0),
                            beta_max);
}

SmoothnessParams SmoothnessParams::uniform(int num_classes, double value, double beta_max) {
    return SmoothnessParams(std::vector<double>(static_cast<std::size_t>(num_classes), value),
                            beta_max);
}

namespace {

void check_classes(const LabelField& labels, int beta_classes, const char* what) {
    if (labels.num_classes() != beta_classes) {
        throw std::invalid_argument(std::string(what) + ": labels have K = " +
                                    std::to_string(labels.num_classes()) + " but beta has K = " +
                                    std::to_string(beta_classes));
    }
}

} // namespace

PottsLogProb potts_log_prob(const LabelField& labels, const SmoothnessParams& beta) {
    return potts_log_prob(labels, neighbor_class_counts(labels), beta);
}

PottsLogProb potts_log_prob(const LabelField& labels, const NeighborCountField& counts,
                            const SmoothnessParams& beta) {
    check_classes(labels, beta.num_classes(), "potts_log_prob");
    const int n = labels.voxel_count();
    const int kk = beta.num_classes();
    PottsLogProb out;
    out.per_voxel.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto ybar = counts.row(i);
        // log-sum-exp over classes with max-subtraction.
        double max = beta.beta(0) * ybar[0];
        for (int k = 1; k < kk; ++k) {
            max = std::max(max, beta.beta(k) * ybar[k]);
        }
        double sum = 0.0;
        for (int k = 0; k < kk; ++k) {
            sum += std::exp(beta.beta(k) * ybar[k] - max);
        }
        const int own = labels.label(i);
        const double v = beta.beta(own) * ybar[own] - (max + std::log(sum));
        out.per_voxel[static_cast<std::size_t>(i)] = v;
        out.total += v;
    }
    return out;
}

std::vector<double> potts_gradient(const LabelField& labels, const SmoothnessParams& beta) {
    return potts_gradient(labels, neighbor_class_counts(labels), beta);
}

std::vector<double> potts_gradient(const LabelField& labels, const NeighborCountField& counts,
                                   const SmoothnessParams& beta) {
    check_classes(labels, beta.num_classes(), "potts_gradient");
    const int n = labels.voxel_count();
    const int kk = beta.num_classes();
    std::vector<double> grad(static_cast<std::size_t>(kk), 0.0);
    std::vector<double> softmax(static_cast<std::size_t>(kk));
    for (int i = 0; i < n; ++i) {
        const auto ybar = counts.row(i);
        double max = beta.beta(0) * ybar[0];
        for (int k = 1; k < kk; ++k) {
            max = std::max(max, beta.beta(k) * ybar[k]);
        }
        double sum = 0.0;
        for (int k = 0; k < kk; ++k) {
            softmax[static_cast<std::size_t>(k)] = std::exp(beta.beta(k) * ybar[k] - max);
            sum += softmax[static_cast<std::size_t>(k)];
        }
        const int own = labels.label(i);
        grad[static_cast<std::size_t>(own)] += ybar[own];
        for (int k = 0; k < kk; ++k) {
            grad[static_cast<std::size_t>(k)] -= ybar[k] * softmax[static_cast<std::size_t>(k)] / sum;
        }
    }
    return grad;
}

BetaFitResult fit_beta(std::span<const LabelField> segmentations, const BetaFitConfig& config) {
    if (segmentations.empty()) {
        throw std::invalid_argument("fit_beta: at least one segmentation required");
    }
    if (!(config.initial_step > 0.0) || config.max_iterations < 1 ||
        !(config.gradient_tolerance > 0.0) || !(config.beta_max > 0.0)) {
        throw std::invalid_argument("fit_beta: config fields must be positive");
    }
    const int kk = segmentations.front().num_classes();
    for (const LabelField& seg : segmentations) {
        if (seg.num_classes() != kk) {
            throw std::invalid_argument("fit_beta: segmentations disagree on K (" +
                                        std::to_string(kk) + " vs " +
                                        std::to_string(seg.num_classes()) + ")");
        }
    }

    // Neighbor counts depend only on the labels; compute once.
    std::vector<NeighborCountField> counts;
    counts.reserve(segmentations.size());
    for (const LabelField& seg : segmentations) {
        counts.push_back(neighbor_class_counts(seg));
    }

    auto objective = [&](const SmoothnessParams& b) {
        double total = 0.0;
        for (std::size_t s = 0; s < segmentations.size(); ++s) {
            total += potts_log_prob(segmentations[s], counts[s], b).total;
        }
        if (!std::isfinite(total)) {
            throw numeric_error("fit_beta: non-finite objective");
        }
        return total;
    };
    auto gradient = [&](const SmoothnessParams& b) {
        std::vector<double> g(static_cast<std::size_t>(kk), 0.0);
        for (std::size_t s = 0; s < segmentations.size(); ++s) {
            const auto gs = potts_gradient(segmentations[s], counts[s], b);
            for (int k = 0; k < kk; ++k) {
                g[static_cast<std::size_t>(k)] += gs[static_cast<std::size_t>(k)];
            }
        }
        return g;
    };
    auto clamp = [&](std::vector<double> b) {
        for (double& v : b) {
            v = std::clamp(v, 0.0, config.beta_max);
        }
        return b;
    };

    std::vector<double> beta(static_cast<std::size_t>(kk), 0.0);
    double obj = objective(SmoothnessParams(beta, config.beta_max));
    BetaFitResult result{SmoothnessParams(beta, config.beta_max), 0, obj, {obj}};

    double step = config.initial_step;
    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        const auto grad = gradient(SmoothnessParams(beta, config.beta_max));
        // Projected gradient: zeroed where a bound is active and pushing out.
        double proj_norm_sq = 0.0;
        for (int k = 0; k < kk; ++k) {
            double g = grad[static_cast<std::size_t>(k)];
            if ((beta[static_cast<std::size_t>(k)] <= 0.0 && g < 0.0) ||
                (beta[static_cast<std::size_t>(k)] >= config.beta_max && g > 0.0)) {
                g = 0.0;
            }
            proj_norm_sq += g * g;
        }
        if (std::sqrt(proj_norm_sq) < config.gradient_tolerance) {
            // A vanishing projected gradient can still hide an optimum that
            // sits exactly on a bound: on that coordinate the pull decays
            // exponentially but never changes sign. Probe each coordinate's
            // active bound directly; stop once none improves.
            bool snapped = false;
            for (int k = 0; k < kk && !snapped; ++k) {
                const double g = grad[static_cast<std::size_t>(k)];
                if (g == 0.0) continue;
                std::vector<double> cand(beta);
                cand[static_cast<std::size_t>(k)] = g > 0.0 ? config.beta_max : 0.0;
                if (cand[static_cast<std::size_t>(k)] == beta[static_cast<std::size_t>(k)]) {
                    continue;
                }
                const double cand_obj = objective(SmoothnessParams(cand, config.beta_max));
                if (cand_obj > obj) {
                    beta = std::move(cand);
                    obj = cand_obj;
                    snapped = true;
                }
            }
            result.iterations = iter;
            result.objective_trace.push_back(obj);
            if (!snapped) {
                break;
            }
            continue;
        }

        // Backtracking: halve the step until the objective does not decrease.
        bool accepted = false;
        double s = step;
        for (int h = 0; h <= 30; ++h) {
            std::vector<double> cand(beta);
            for (int k = 0; k < kk; ++k) {
                cand[static_cast<std::size_t>(k)] += s * grad[static_cast<std::size_t>(k)];
            }
            cand = clamp(std::move(cand));
            if (cand == beta) {
                s *= 0.5;
                continue;
            }
            const double cand_obj = objective(SmoothnessParams(cand, config.beta_max));
            if (cand_obj >= obj) {
                beta = std::move(cand);
                obj = cand_obj;
                step = s * 2.0;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        result.iterations = iter;
        result.objective_trace.push_back(obj);
        if (!accepted) {
            break;
        }
    }

    result.params = SmoothnessParams(beta, config.beta_max);
    result.objective = obj;
    return result;
}

} // namespace pottsvb
