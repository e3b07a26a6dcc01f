#pragma once

#include <span>
#include <vector>

#include "pottsvb/grid.hpp"

namespace pottsvb {

/// Per-class Potts interaction strengths, kept in [0, beta_max].
class SmoothnessParams {
public:
    explicit SmoothnessParams(std::vector<double> beta, double beta_max = 10.0);

    static SmoothnessParams zeros(int num_classes, double beta_max = 10.0);
    static SmoothnessParams uniform(int num_classes, double value, double beta_max = 10.0);

    int num_classes() const { return static_cast<int>(beta_.size()); }
    double beta(int k) const { return beta_[static_cast<std::size_t>(k)]; }
    const std::vector<double>& beta() const { return beta_; }
    double beta_max() const { return beta_max_; }

private:
    std::vector<double> beta_;
    double beta_max_;
};

struct BetaFitConfig {
    double initial_step = 1e-3;
    int max_iterations = 1000;
    double gradient_tolerance = 1e-6;
    double beta_max = 10.0;
};

struct PottsLogProb {
    std::vector<double> per_voxel;
    double total = 0.0;
};

/// Local hidden Potts log-likelihood of a segmentation:
/// per voxel, sum_k beta_k y_ik ybar_ik - log sum_k exp(beta_k ybar_ik).
PottsLogProb potts_log_prob(const LabelField& labels, const SmoothnessParams& beta);
PottsLogProb potts_log_prob(const LabelField& labels, const NeighborCountField& counts,
                            const SmoothnessParams& beta);

/// Gradient of the total log-likelihood in beta; component k is
/// sum_i [ y_ik ybar_ik - ybar_ik exp(beta_k ybar_ik) / sum_m exp(beta_m ybar_im) ].
std::vector<double> potts_gradient(const LabelField& labels, const SmoothnessParams& beta);
std::vector<double> potts_gradient(const LabelField& labels, const NeighborCountField& counts,
                                   const SmoothnessParams& beta);

struct BetaFitResult {
    SmoothnessParams params;
    int iterations = 0;
    double objective = 0.0;
    std::vector<double> objective_trace;
};

/// Maximum-likelihood smoothness parameters over one or more hard
/// segmentations: projected gradient ascent from beta = 0 with
/// backtracking line search, each beta_k clamped to [0, beta_max].
BetaFitResult fit_beta(std::span<const LabelField> segmentations,
                       const BetaFitConfig& config = {});

} // namespace pottsvb
