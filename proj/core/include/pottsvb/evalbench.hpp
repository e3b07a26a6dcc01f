#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pottsvb/grid.hpp"
#include "pottsvb/init.hpp"
#include "pottsvb/phantom.hpp"
#include "pottsvb/potts.hpp"
#include "pottsvb/vb.hpp"

namespace pottsvb {

enum class Method { UGM, SGM, UHP, SHP, OneNN };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

/// Error-minimizing assignment of predicted cluster indices onto tissue
/// indices, by exhaustive search over all K! permutations (K <= 8).
/// Returned vector maps predicted index -> tissue index.
std::vector<int> match_clusters(const LabelField& pred, const LabelField& truth, const Mask& mask);

LabelField apply_permutation(const LabelField& labels, const std::vector<int>& perm);

/// Fraction of masked voxels where pred != truth.
double classification_error(const LabelField& pred, const LabelField& truth, const Mask& mask);

/// Number of unordered 4-neighbor pairs with differing labels.
std::int64_t boundary_length(const LabelField& labels);

/// Nearest labeled voxel in intensity space; ties toward the lowest class.
LabelField onenn_baseline(const ImageGrid& image, const LabeledVoxelSet& labeled, int num_classes);

/// Pre-existing target data on disk (alternative to phantom generation).
struct TargetInput {
    std::string image_path;
    std::string labels_path;
    std::string mask_path;
};

struct ExperimentConfig {
    PhantomSpec target_phantom;
    std::vector<TargetInput> target_inputs; // when non-empty, used instead of target_phantom

    PhantomSpec source_phantom;
    std::vector<std::string> source_label_paths; // when non-empty, used instead of source_phantom
    int source_count = 5;                        // generated source segmentations for beta fitting

    std::vector<Method> methods;
    bool beta_fitted = true;  // fit beta on the source; otherwise use beta_fixed
    double beta_fixed = 0.1;
    double beta_max = 10.0;

    int repetitions = 10;
    int labels_per_class = 1;
    std::uint64_t base_seed = 0;
    VbConfig vb;
    int jobs = 0; // repetition parallelism; 0 = hardware concurrency
};

struct MethodResult {
    Method method = Method::UGM;
    std::vector<double> errors;            // per repetition
    std::vector<double> runtime_ms;        // measured per repetition
    std::vector<int> iterations;           // VB iterations per repetition (0 for 1NN)
    std::vector<LabelField> segmentations; // tissue-matched segmentation per repetition
    double mean_error = 0.0;
    double sem = 0.0;
    bool sem_degenerate = false; // repetitions == 1, SEM reported as 0
};

struct ResultsTable {
    std::vector<MethodResult> rows;
    int repetitions = 0;
    std::vector<double> beta_used; // empty when no Potts method ran
    bool beta_was_fitted = false;
    int beta_fit_iterations = 0;
    double beta_fit_objective = 0.0;
};

double mean_of(const std::vector<double>& values);
/// Standard error of the mean: Bessel-corrected stddev / sqrt(R); 0 for R = 1.
double sem_of(const std::vector<double>& values);

/// The full cross-center protocol: fit (or fix) beta, then per repetition
/// generate/load the target, sample labels, run every requested method,
/// score masked errors, and aggregate mean +/- SEM.
ResultsTable run_experiment(const ExperimentConfig& config);

} // namespace pottsvb
