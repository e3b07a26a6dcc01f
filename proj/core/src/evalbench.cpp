#include "pottsvb/evalbench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <thread>

#include "pottsvb/io.hpp"
#include "pottsvb/rng.hpp"

namespace pottsvb {

std::string to_string(Method method) {
    switch (method) {
        case Method::UGM: return "UGM";
        case Method::SGM: return "SGM";
        case Method::UHP: return "UHP";
        case Method::SHP: return "SHP";
        case Method::OneNN: return "1NN";
    }
    throw std::invalid_argument("to_string: unknown method");
}

Method method_from_string(const std::string& name) {
    if (name == "UGM") return Method::UGM;
    if (name == "SGM") return Method::SGM;
    if (name == "UHP") return Method::UHP;
    if (name == "SHP") return Method::SHP;
    if (name == "1NN") return Method::OneNN;
    throw std::invalid_argument("unknown method name: " + name);
}

namespace {

void check_field_shapes(const LabelField& pred, const LabelField& truth, const Mask& mask,
                        const char* what) {
    if (pred.height() != truth.height() || pred.width() != truth.width() ||
        pred.height() != mask.height() || pred.width() != mask.width()) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
    }
}

} // namespace

std::vector<int> match_clusters(const LabelField& pred, const LabelField& truth,
                                const Mask& mask) {
    check_field_shapes(pred, truth, mask, "match_clusters");
    if (pred.num_classes() != truth.num_classes()) {
        throw std::invalid_argument("match_clusters: pred and truth disagree on K");
    }
    const int kk = pred.num_classes();
    if (kk > 8) {
        throw std::invalid_argument("match_clusters: exhaustive search refused for K = " +
                                    std::to_string(kk) + " > 8");
    }

    // Masked confusion counts; agreement under a permutation is then a
    // K x K lookup instead of a full pass per permutation.
    std::vector<std::int64_t> confusion(static_cast<std::size_t>(kk) * kk, 0);
    for (int i = 0; i < pred.voxel_count(); ++i) {
        if (!mask.inside(i)) continue;
        ++confusion[static_cast<std::size_t>(pred.label(i)) * kk + truth.label(i)];
    }

    std::vector<int> perm(static_cast<std::size_t>(kk));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    std::int64_t best_agree = -1;
    do {
        std::int64_t agree = 0;
        for (int p = 0; p < kk; ++p) {
            agree += confusion[static_cast<std::size_t>(p) * kk + perm[static_cast<std::size_t>(p)]];
        }
        if (agree > best_agree) {
            best_agree = agree;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

LabelField apply_permutation(const LabelField& labels, const std::vector<int>& perm) {
    if (perm.size() != static_cast<std::size_t>(labels.num_classes())) {
        throw std::invalid_argument("apply_permutation: permutation size does not equal K");
    }
    std::vector<int> out(static_cast<std::size_t>(labels.voxel_count()));
    for (int i = 0; i < labels.voxel_count(); ++i) {
        out[static_cast<std::size_t>(i)] = perm[static_cast<std::size_t>(labels.label(i))];
    }
    return {labels.height(), labels.width(), labels.num_classes(), std::move(out)};
}

double classification_error(const LabelField& pred, const LabelField& truth, const Mask& mask) {
    check_field_shapes(pred, truth, mask, "classification_error");
    std::int64_t wrong = 0;
    std::int64_t total = 0;
    for (int i = 0; i < pred.voxel_count(); ++i) {
        if (!mask.inside(i)) continue;
        ++total;
        if (pred.label(i) != truth.label(i)) ++wrong;
    }
    if (total == 0) {
        throw std::invalid_argument("classification_error: mask is empty");
    }
    return static_cast<double>(wrong) / static_cast<double>(total);
}

std::int64_t boundary_length(const LabelField& labels) {
    const int h = labels.height();
    const int w = labels.width();
    std::int64_t count = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int i = y * w + x;
            if (x + 1 < w && labels.label(i) != labels.label(i + 1)) ++count;
            if (y + 1 < h && labels.label(i) != labels.label(i + w)) ++count;
        }
    }
    return count;
}

LabelField onenn_baseline(const ImageGrid& image, const LabeledVoxelSet& labeled,
                          int num_classes) {
    if (labeled.empty()) {
        throw std::invalid_argument("onenn_baseline: labeled voxel set is empty");
    }
    std::vector<bool> covered(static_cast<std::size_t>(num_classes), false);
    for (const LabeledVoxel& lv : labeled) {
        if (lv.class_index < 0 || lv.class_index >= num_classes) {
            throw std::invalid_argument("onenn_baseline: labeled class index out of range");
        }
        covered[static_cast<std::size_t>(lv.class_index)] = true;
    }
    for (int k = 0; k < num_classes; ++k) {
        if (!covered[static_cast<std::size_t>(k)]) {
            throw std::invalid_argument("onenn_baseline: no labeled voxel for class " +
                                        std::to_string(k));
        }
    }

    const int n = image.voxel_count();
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto x = image.voxel(i);
        double best = std::numeric_limits<double>::infinity();
        int best_class = num_classes;
        for (const LabeledVoxel& lv : labeled) {
            double sq = 0.0;
            for (Eigen::Index d = 0; d < lv.intensity.size(); ++d) {
                const double diff = x[static_cast<std::size_t>(d)] - lv.intensity(d);
                sq += diff * diff;
            }
            if (sq < best || (sq == best && lv.class_index < best_class)) {
                best = sq;
                best_class = lv.class_index;
            }
        }
        out[static_cast<std::size_t>(i)] = best_class;
    }
    return {image.height(), image.width(), num_classes, std::move(out)};
}

double mean_of(const std::vector<double>& values) {
    if (values.empty()) {
        throw std::invalid_argument("mean_of: empty input");
    }
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

double sem_of(const std::vector<double>& values) {
    if (values.empty()) {
        throw std::invalid_argument("sem_of: empty input");
    }
    const std::size_t r = values.size();
    if (r == 1) return 0.0;
    const double m = mean_of(values);
    double ss = 0.0;
    for (const double v : values) {
        ss += (v - m) * (v - m);
    }
    const double stddev = std::sqrt(ss / static_cast<double>(r - 1));
    return stddev / std::sqrt(static_cast<double>(r));
}

namespace {

bool uses_potts(Method m) { return m == Method::UHP || m == Method::SHP; }
bool uses_labels(Method m) {
    return m == Method::SGM || m == Method::SHP || m == Method::OneNN;
}

struct RepOutcome {
    double error = 0.0;
    double runtime_ms = 0.0;
    int iterations = 0;
    std::optional<LabelField> segmentation;
};

// Seed streams; arbitrary distinct tags.
constexpr std::uint64_t kSourceStream = 0x736f7572ULL;
constexpr std::uint64_t kTargetStream = 0x74617267ULL;
constexpr std::uint64_t kLabelStream = 0x6c61626cULL;
constexpr std::uint64_t kInitStream = 0x696e6974ULL;

RepOutcome run_method(Method method, const ExperimentConfig& config, const ImageGrid& image,
                      const LabelField& truth, const Mask& mask,
                      const LabeledVoxelSet& labeled, const SmoothnessParams& beta_potts,
                      std::uint64_t init_seed) {
    const int kk = truth.num_classes();
    const auto start = std::chrono::steady_clock::now();

    LabelField pred(1, 1, 1, {0});
    int iterations = 0;
    if (method == Method::OneNN) {
        pred = onenn_baseline(image, labeled, kk);
    } else {
        const PriorHyperparams priors = Hyperparams::weak_default(image, kk);
        const bool semi = method == Method::SGM || method == Method::SHP;
        const SmoothnessParams beta =
            uses_potts(method) ? beta_potts : SmoothnessParams::zeros(kk, config.beta_max);

        ResponsibilityField rho_init(1, 1, 1, {1.0});
        ClampSet clamps;
        if (semi) {
            std::vector<std::pair<int, int>> pairs;
            pairs.reserve(labeled.size());
            for (const LabeledVoxel& lv : labeled) {
                pairs.emplace_back(lv.index, lv.class_index);
            }
            clamps = ClampSet(std::move(pairs), image.voxel_count(), kk);
            rho_init = knn_init(image, labeled, kk);
        } else {
            rho_init = kmeans_init(image, kk, init_seed).responsibilities;
        }

        const FitResult fitted = fit(image, priors, beta, rho_init, clamps, config.vb);
        iterations = static_cast<int>(fitted.trace.size());
        pred = segment(fitted.responsibilities);
        if (!semi) {
            pred = apply_permutation(pred, match_clusters(pred, truth, mask));
        }
    }

    const auto stop = std::chrono::steady_clock::now();
    RepOutcome outcome;
    outcome.error = classification_error(pred, truth, mask);
    outcome.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    outcome.iterations = iterations;
    outcome.segmentation = std::move(pred);
    return outcome;
}

} // namespace

ResultsTable run_experiment(const ExperimentConfig& config) {
    if (config.repetitions < 1) {
        throw std::invalid_argument("run_experiment: repetitions must be >= 1");
    }
    if (config.methods.empty()) {
        throw std::invalid_argument("run_experiment: at least one method required");
    }
    if (config.labels_per_class < 1 &&
        std::any_of(config.methods.begin(), config.methods.end(), uses_labels)) {
        throw std::invalid_argument("run_experiment: semi-supervised methods need labels_per_class >= 1");
    }

    // Target class count: from the phantom spec, or from the first label
    // file when running on pre-existing data.
    const int kk = config.target_inputs.empty()
                       ? config.target_phantom.num_classes
                       : read_labels(config.target_inputs.front().labels_path).num_classes();
    const bool any_potts = std::any_of(config.methods.begin(), config.methods.end(), uses_potts);

    ResultsTable table;
    table.repetitions = config.repetitions;

    // Smoothness parameters: fitted on source segmentations or fixed.
    SmoothnessParams beta_potts = SmoothnessParams::zeros(kk, config.beta_max);
    if (any_potts) {
        if (config.beta_fitted) {
            std::vector<LabelField> sources;
            if (!config.source_label_paths.empty()) {
                for (const std::string& path : config.source_label_paths) {
                    sources.push_back(read_labels(path));
                }
            } else {
                if (config.source_count < 1) {
                    throw std::invalid_argument("run_experiment: source_count must be >= 1");
                }
                for (int s = 0; s < config.source_count; ++s) {
                    sources.push_back(
                        generate_phantom(config.source_phantom,
                                         derive_seed(config.base_seed, kSourceStream, s))
                            .labels);
                }
            }
            BetaFitConfig fit_config;
            fit_config.beta_max = config.beta_max;
            const BetaFitResult fitted = fit_beta(sources, fit_config);
            if (fitted.params.num_classes() != kk) {
                throw std::invalid_argument("run_experiment: source K = " +
                                            std::to_string(fitted.params.num_classes()) +
                                            " does not match target K = " + std::to_string(kk));
            }
            beta_potts = fitted.params;
            table.beta_was_fitted = true;
            table.beta_fit_iterations = fitted.iterations;
            table.beta_fit_objective = fitted.objective;
        } else {
            beta_potts = SmoothnessParams::uniform(kk, config.beta_fixed, config.beta_max);
        }
        table.beta_used = beta_potts.beta();
    }

    // Per-repetition work; every repetition derives its own seed streams,
    // so execution order cannot affect the results.
    const int reps = config.repetitions;
    std::vector<std::vector<RepOutcome>> outcomes(
        static_cast<std::size_t>(reps),
        std::vector<RepOutcome>(config.methods.size()));
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(reps));

    auto run_repetition = [&](int rep) {
        ImageGrid image(1, 1, 1, {0.0});
        LabelField truth(1, 1, 1, {0});
        Mask mask(1, 1, {1});
        if (config.target_inputs.empty()) {
            Phantom phantom = generate_phantom(config.target_phantom,
                                               derive_seed(config.base_seed, kTargetStream, rep));
            image = std::move(phantom.image);
            truth = std::move(phantom.labels);
            mask = std::move(phantom.mask);
        } else {
            const TargetInput& input =
                config.target_inputs[static_cast<std::size_t>(rep) % config.target_inputs.size()];
            image = read_image(input.image_path);
            truth = read_labels(input.labels_path);
            mask = read_mask(input.mask_path);
        }

        LabeledVoxelSet labeled;
        if (std::any_of(config.methods.begin(), config.methods.end(), uses_labels)) {
            labeled = sample_labels(image, truth, config.labels_per_class,
                                    derive_seed(config.base_seed, kLabelStream, rep));
        }
        const std::uint64_t init_seed = derive_seed(config.base_seed, kInitStream, rep);

        for (std::size_t m = 0; m < config.methods.size(); ++m) {
            const Method method = config.methods[m];
            try {
                outcomes[static_cast<std::size_t>(rep)][m] = run_method(
                    method, config, image, truth, mask, labeled, beta_potts, init_seed);
            } catch (const std::exception& e) {
                throw std::runtime_error("method " + to_string(method) + ", repetition " +
                                         std::to_string(rep) + ": " + e.what());
            }
        }
    };

    int jobs = config.jobs > 0 ? config.jobs
                               : static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::clamp(jobs, 1, reps);
    if (jobs == 1) {
        for (int rep = 0; rep < reps; ++rep) {
            run_repetition(rep);
        }
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t) {
            workers.emplace_back([&]() {
                while (true) {
                    const int rep = next.fetch_add(1);
                    if (rep >= reps) break;
                    try {
                        run_repetition(rep);
                    } catch (...) {
                        failures[static_cast<std::size_t>(rep)] = std::current_exception();
                    }
                }
            });
        }
        for (std::thread& worker : workers) {
            worker.join();
        }
        for (const std::exception_ptr& failure : failures) {
            if (failure) std::rethrow_exception(failure);
        }
    }

    // Aggregate per method, repetition-major order fixed.
    for (std::size_t m = 0; m < config.methods.size(); ++m) {
        MethodResult row;
        row.method = config.methods[m];
        for (int rep = 0; rep < reps; ++rep) {
            RepOutcome& outcome = outcomes[static_cast<std::size_t>(rep)][m];
            row.errors.push_back(outcome.error);
            row.runtime_ms.push_back(outcome.runtime_ms);
            row.iterations.push_back(outcome.iterations);
            row.segmentations.push_back(std::move(*outcome.segmentation));
        }
        row.mean_error = mean_of(row.errors);
        row.sem = sem_of(row.errors);
        row.sem_degenerate = reps == 1;
        table.rows.push_back(std::move(row));
    }
    return table;
}

} // namespace pottsvb
