#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "experiment_config.hpp"
#include "pottsvb/errors.hpp"
#include "pottsvb/evalbench.hpp"
#include "pottsvb/init.hpp"
#include "pottsvb/io.hpp"
#include "pottsvb/phantom.hpp"
#include "pottsvb/potts.hpp"
#include "pottsvb/vb.hpp"

namespace fs = std::filesystem;
using namespace pottsvb;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct PhantomArgs {
    std::string out_dir;
    std::uint64_t seed = 0;
    int height = 64;
    int width = 64;
    int classes = 4;
};

int cmd_phantom(const PhantomArgs& args) {
    PhantomSpec spec = PhantomSpec::with_classes(args.classes);
    spec.height = args.height;
    spec.width = args.width;
    const Phantom phantom = generate_phantom(spec, args.seed);
    fs::create_directories(args.out_dir);
    write_grid(fs::path(args.out_dir) / "image.gt", phantom.image);
    write_grid(fs::path(args.out_dir) / "labels.gt", phantom.labels);
    write_grid(fs::path(args.out_dir) / "mask.gt", phantom.mask);
    std::printf("phantom: %dx%d, %d classes, seed %" PRIu64 " -> %s/{image,labels,mask}.gt\n",
                args.height, args.width, args.classes, args.seed, args.out_dir.c_str());
    return kExitOk;
}

struct FitBetaArgs {
    std::vector<std::string> label_paths;
    std::string out_path;
    double beta_max = 10.0;
    double tolerance = 1e-6;
};

int cmd_fit_beta(const FitBetaArgs& args) {
    std::vector<LabelField> segmentations;
    segmentations.reserve(args.label_paths.size());
    for (const std::string& path : args.label_paths) {
        segmentations.push_back(read_labels(path));
    }
    BetaFitConfig config;
    config.beta_max = args.beta_max;
    config.gradient_tolerance = args.tolerance;
    const BetaFitResult result = fit_beta(segmentations, config);

    BetaFile file;
    file.beta = result.params.beta();
    file.beta_max = args.beta_max;
    file.iterations = result.iterations;
    file.objective = result.objective;
    write_beta(args.out_path, file);

    std::printf("fitted beta on %zu segmentation(s), %d iteration(s), objective %.6g\n",
                segmentations.size(), result.iterations, result.objective);
    for (std::size_t k = 0; k < file.beta.size(); ++k) {
        std::printf("  beta[%zu] = %.6g\n", k, file.beta[k]);
    }
    return kExitOk;
}

struct SegmentArgs {
    std::string image_path;
    std::string out_dir;
    std::string beta_path;
    double beta_fixed = 0.1;
    bool beta_fixed_given = false;
    std::string labels_given_path;
    bool semi = false;
    int classes = 4;
    std::uint64_t seed = 0;
    int max_iterations = 30;
    double tolerance = 1e-5;
};

int cmd_segment(const SegmentArgs& args) {
    const ImageGrid image = read_image(args.image_path);

    SmoothnessParams beta = SmoothnessParams::uniform(args.classes, args.beta_fixed);
    if (!args.beta_path.empty()) {
        const BetaFile file = read_beta(args.beta_path);
        if (static_cast<int>(file.beta.size()) != args.classes) {
            throw std::invalid_argument("beta file has K = " + std::to_string(file.beta.size()) +
                                        " but --classes is " + std::to_string(args.classes));
        }
        beta = SmoothnessParams(file.beta, file.beta_max);
    }

    ResponsibilityField rho_init(1, 1, 1, {1.0});
    ClampSet clamps;
    if (args.semi) {
        const LabeledVoxelSet labeled =
            read_labeled_voxels(args.labels_given_path, image, args.classes);
        std::vector<std::pair<int, int>> pairs;
        pairs.reserve(labeled.size());
        for (const LabeledVoxel& lv : labeled) {
            pairs.emplace_back(lv.index, lv.class_index);
        }
        clamps = ClampSet(std::move(pairs), image.voxel_count(), args.classes);
        rho_init = knn_init(image, labeled, args.classes);
    } else {
        rho_init = kmeans_init(image, args.classes, args.seed).responsibilities;
    }

    const PriorHyperparams priors = Hyperparams::weak_default(image, args.classes);
    VbConfig config;
    config.max_iterations = args.max_iterations;
    config.tolerance = args.tolerance;
    const FitResult result = fit(image, priors, beta, rho_init, clamps, config,
                                 [](int iteration, const ResponsibilityField&, double change) {
                                     std::printf("  iteration %d: change %.3e\n", iteration,
                                                 change);
                                 });

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    write_grid(out / "labels.gt", segment(result.responsibilities));
    write_grid(out / "resp.gt", result.responsibilities);
    write_hyperparams(out / "posterior.json", result.posterior);
    export_pgm(out / "seg.pgm", segment(result.responsibilities));
    std::printf("segmented %s: %zu iteration(s), final change %.3e -> %s\n",
                args.image_path.c_str(), result.trace.size(), result.trace.back(),
                args.out_dir.c_str());
    return kExitOk;
}

struct EvalArgs {
    std::string pred_path;
    std::string truth_path;
    std::string mask_path;
    bool match = false;
};

LabelField widen_classes(const LabelField& labels, int num_classes) {
    if (labels.num_classes() == num_classes) return labels;
    return {labels.height(), labels.width(), num_classes, labels.labels()};
}

int cmd_eval(const EvalArgs& args) {
    LabelField pred = read_labels(args.pred_path);
    LabelField truth = read_labels(args.truth_path);
    const Mask mask = read_mask(args.mask_path);
    const int kk = std::max(pred.num_classes(), truth.num_classes());
    pred = widen_classes(pred, kk);
    truth = widen_classes(truth, kk);

    if (args.match) {
        const std::vector<int> perm = match_clusters(pred, truth, mask);
        pred = apply_permutation(pred, perm);
        std::printf("permutation:");
        for (const int p : perm) std::printf(" %d", p);
        std::printf("\n");
    }
    std::printf("%.6f\n", classification_error(pred, truth, mask));
    return kExitOk;
}

struct ExperimentArgs {
    std::string config_path;
    std::string out_dir;
    int jobs = 0;
};

int cmd_experiment(const ExperimentArgs& args) {
    ExperimentConfig config = cli::load_experiment_config(args.config_path);
    if (args.jobs > 0) config.jobs = args.jobs;

    const ResultsTable table = run_experiment(config);

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    write_results_csv(out / "results.csv", table);
    write_summary_csv(out / "summary.csv", table);
    for (const MethodResult& row : table.rows) {
        for (std::size_t rep = 0; rep < row.segmentations.size(); ++rep) {
            char name[64];
            std::snprintf(name, sizeof(name), "%s_rep%02zu.pgm", to_string(row.method).c_str(),
                          rep);
            export_pgm(out / name, row.segmentations[rep]);
        }
    }
    if (!table.beta_used.empty() && table.beta_was_fitted) {
        BetaFile file;
        file.beta = table.beta_used;
        file.beta_max = config.beta_max;
        file.iterations = table.beta_fit_iterations;
        file.objective = table.beta_fit_objective;
        write_beta(out / "beta.json", file);
    }

    if (!table.beta_used.empty()) {
        std::printf("beta (%s):", table.beta_was_fitted ? "fitted" : "fixed");
        for (const double b : table.beta_used) std::printf(" %.6g", b);
        std::printf("\n");
    }
    std::printf("%-6s %-12s %-12s %s\n", "method", "mean_error", "sem", "mean_runtime_ms");
    for (const MethodResult& row : table.rows) {
        std::printf("%-6s %-12.6g %-12.6g %.1f%s\n", to_string(row.method).c_str(),
                    row.mean_error, row.sem, mean_of(row.runtime_ms),
                    row.sem_degenerate ? "  (single repetition, SEM degenerate)" : "");
    }
    std::printf("wrote %s/{results.csv,summary.csv} and %d PGM(s)\n", args.out_dir.c_str(),
                static_cast<int>(table.rows.size()) * table.repetitions);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variational Bayes image segmentation with a hidden Potts smoothness prior"};
    app.require_subcommand(1);

    PhantomArgs phantom_args;
    CLI::App* phantom = app.add_subcommand("phantom", "Generate a synthetic phantom");
    phantom->add_option("--out", phantom_args.out_dir, "Output directory")->required();
    phantom->add_option("--seed", phantom_args.seed, "Random seed")->required();
    phantom->add_option("--height", phantom_args.height, "Grid height");
    phantom->add_option("--width", phantom_args.width, "Grid width");
    phantom->add_option("--classes", phantom_args.classes, "Number of classes");

    FitBetaArgs fit_beta_args;
    CLI::App* fitbeta = app.add_subcommand("fit-beta", "Fit smoothness parameters to segmentations");
    fitbeta->add_option("--labels", fit_beta_args.label_paths, "Label tensor files")
        ->required()
        ->expected(-1);
    fitbeta->add_option("--out", fit_beta_args.out_path, "Output beta JSON file")->required();
    fitbeta->add_option("--beta-max", fit_beta_args.beta_max, "Upper cap on each beta");
    fitbeta->add_option("--tol", fit_beta_args.tolerance, "Projected-gradient tolerance");

    SegmentArgs segment_args;
    CLI::App* seg = app.add_subcommand("segment", "Segment an image");
    seg->add_option("--image", segment_args.image_path, "Image tensor file")->required();
    seg->add_option("--out", segment_args.out_dir, "Output directory")->required();
    auto* beta_file_opt = seg->add_option("--beta", segment_args.beta_path, "Fitted beta JSON file");
    auto* beta_fixed_opt =
        seg->add_option("--beta-fixed", segment_args.beta_fixed, "Uniform fixed beta (default 0.1)");
    beta_file_opt->excludes(beta_fixed_opt);
    seg->add_option("--labels-given", segment_args.labels_given_path,
                    "Labeled voxels JSON (list of {index, class})");
    seg->add_flag("--semi", segment_args.semi, "Semi-supervised mode (requires --labels-given)");
    seg->add_option("--classes", segment_args.classes, "Number of classes");
    seg->add_option("--seed", segment_args.seed, "Initialization seed");
    seg->add_option("--max-iter", segment_args.max_iterations, "Iteration cap");
    seg->add_option("--tol", segment_args.tolerance, "Responsibility-change tolerance");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "Masked classification error");
    eval->add_option("--pred", eval_args.pred_path, "Predicted labels")->required();
    eval->add_option("--truth", eval_args.truth_path, "Ground-truth labels")->required();
    eval->add_option("--mask", eval_args.mask_path, "Evaluation mask")->required();
    eval->add_flag("--match", eval_args.match, "Apply cluster-to-tissue matching first");

    ExperimentArgs experiment_args;
    CLI::App* experiment = app.add_subcommand("experiment", "Run the cross-center experiment");
    experiment->add_option("--config", experiment_args.config_path, "Experiment config JSON")
        ->required();
    experiment->add_option("--out", experiment_args.out_dir, "Output directory")->required();
    experiment->add_option("--jobs", experiment_args.jobs, "Parallel repetitions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    // Flag combinations CLI11 cannot express.
    if (seg->parsed() && segment_args.semi && segment_args.labels_given_path.empty()) {
        std::fprintf(stderr, "error: --semi requires --labels-given\n%s\n",
                     seg->help().c_str());
        return kExitUsage;
    }

    try {
        if (phantom->parsed()) return cmd_phantom(phantom_args);
        if (fitbeta->parsed()) return cmd_fit_beta(fit_beta_args);
        if (seg->parsed()) return cmd_segment(segment_args);
        if (eval->parsed()) return cmd_eval(eval_args);
        if (experiment->parsed()) return cmd_experiment(experiment_args);
    } catch (const cli::config_error& e) {
        std::fprintf(stderr, "invalid config: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
    return kExitUsage;
}
