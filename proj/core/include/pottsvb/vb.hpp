#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pottsvb/grid.hpp"
#include "pottsvb/potts.hpp"

namespace pottsvb {

/// Dirichlet / Normal-Wishart parameters for one mixture component.
struct ClassHyperparams {
    double alpha = 1.0;
    Eigen::VectorXd upsilon;
    double gamma = 1.0;
    double nu = 2.0;
    Eigen::MatrixXd delta;
};

/// Per-class hyperparameter set; validates positivity and SPD constraints
/// and dimension consistency across classes.
class Hyperparams {
public:
    explicit Hyperparams(std::vector<ClassHyperparams> classes);

    int num_classes() const { return static_cast<int>(classes_.size()); }
    int dim() const { return static_cast<int>(classes_.front().upsilon.size()); }
    const ClassHyperparams& cls(int k) const { return classes_[static_cast<std::size_t>(k)]; }
    const std::vector<ClassHyperparams>& classes() const { return classes_; }

    /// Weak data-dependent default: alpha0 = 1, gamma0 = 1, nu0 = D + 1,
    /// upsilon0 at K evenly spaced per-channel intensity quantiles,
    /// Delta0 = I / var(image).
    static Hyperparams weak_default(const ImageGrid& image, int num_classes);

private:
    std::vector<ClassHyperparams> classes_;
};

using PriorHyperparams = Hyperparams;
using PosteriorHyperparams = Hyperparams;

/// Weighted sufficient statistics per class: S0 (effective count),
/// S1 (weighted sum), S2 (weighted scatter about the weighted mean).
struct SufficientStats {
    std::vector<double> s0;
    std::vector<Eigen::VectorXd> s1;
    std::vector<Eigen::MatrixXd> s2;

    int num_classes() const { return static_cast<int>(s0.size()); }
};

/// Observed-label constraints: at most one (voxel, class) clamp per voxel.
class ClampSet {
public:
    ClampSet() = default;
    ClampSet(std::vector<std::pair<int, int>> clamps, int num_voxels, int num_classes);

    bool empty() const { return clamps_.empty(); }
    std::size_t size() const { return clamps_.size(); }
    const std::vector<std::pair<int, int>>& entries() const { return clamps_; }
    std::optional<int> clamped_class(int voxel) const;

private:
    std::vector<std::pair<int, int>> clamps_; // sorted by voxel index
};

struct VbConfig {
    int max_iterations = 30;
    double tolerance = 1e-5; // mean absolute responsibility change
};

/// One variational E-step: responsibilities from the current posterior,
/// with the Potts neighbor term evaluated on rho_prev (mean-field
/// substitution), then clamp overwrite.
ResponsibilityField e_step(const ImageGrid& image, const PosteriorHyperparams& post,
                           const SmoothnessParams& beta, const ResponsibilityField& rho_prev,
                           const ClampSet& clamps);

SufficientStats compute_stats(const ImageGrid& image, const ResponsibilityField& rho);

/// Conjugate posterior update; classes with S0 = 0 keep their prior.
PosteriorHyperparams m_step(const PriorHyperparams& priors, const SufficientStats& stats);

struct FitResult {
    ResponsibilityField responsibilities;
    PosteriorHyperparams posterior;
    std::vector<double> trace; // mean absolute responsibility change per iteration
};

using FitObserver =
    std::function<void(int iteration, const ResponsibilityField& rho, double change)>;

/// Alternates m_step(compute_stats(...)) and e_step from rho_init until the
/// mean absolute responsibility change drops below tolerance or
/// max_iterations is reached. Clamped rows are verified to stay exact
/// one-hot and all rows to stay normalized after every E-step.
FitResult fit(const ImageGrid& image, const PriorHyperparams& priors,
              const SmoothnessParams& beta, const ResponsibilityField& rho_init,
              const ClampSet& clamps, const VbConfig& config = {},
              const FitObserver& observer = {});

/// Argmax decode of the responsibilities.
LabelField segment(const ResponsibilityField& rho);

/// Returns a copy of rho with clamped rows replaced by exact one-hot rows.
ResponsibilityField apply_clamps(const ResponsibilityField& rho, const ClampSet& clamps);

} // namespace pottsvb
