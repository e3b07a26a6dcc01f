#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "pottsvb/evalbench.hpp"
#include "pottsvb/rng.hpp"
#include "test_util.hpp"

using namespace pottsvb;

namespace {

Mask full_mask(int h, int w) {
    return {h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w, 1)};
}

// Independent oracle: enumerate permutations recursively and score each by
// a direct voxel pass.
double brute_force_best_error(const LabelField& pred, const LabelField& truth, const Mask& mask) {
    std::vector<int> perm(static_cast<std::size_t>(pred.num_classes()));
    std::iota(perm.begin(), perm.end(), 0);
    double best = 2.0;
    do {
        int wrong = 0, total = 0;
        for (int i = 0; i < pred.voxel_count(); ++i) {
            if (!mask.inside(i)) continue;
            ++total;
            if (perm[static_cast<std::size_t>(pred.label(i))] != truth.label(i)) ++wrong;
        }
        best = std::min(best, static_cast<double>(wrong) / total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

} // namespace

TEST_CASE("match_clusters: identity when prediction equals truth") {
    const auto truth = testutil::random_labels(4, 4, 3, 1);
    const auto perm = match_clusters(truth, truth, full_mask(4, 4));
    CHECK(perm == std::vector<int>{0, 1, 2});
}

TEST_CASE("match_clusters: undoes a label swap exactly") {
    const auto truth = testutil::random_labels(5, 5, 2, 2);
    std::vector<int> swapped(truth.labels());
    for (auto& v : swapped) v = 1 - v;
    const LabelField pred(5, 5, 2, std::move(swapped));
    const auto perm = match_clusters(pred, truth, full_mask(5, 5));
    CHECK(perm == std::vector<int>{1, 0});
    CHECK(classification_error(apply_permutation(pred, perm), truth, full_mask(5, 5)) == 0.0);
}

TEST_CASE("match_clusters: agrees with the brute-force oracle") {
    Rng rng(100);
    for (int trial = 0; trial < 100; ++trial) {
        const auto pred = testutil::random_labels(6, 6, 3, 1000 + trial);
        const auto truth = testutil::random_labels(6, 6, 3, 2000 + trial);
        const auto mask = full_mask(6, 6);
        const auto perm = match_clusters(pred, truth, mask);
        const double matched = classification_error(apply_permutation(pred, perm), truth, mask);
        CHECK(matched == doctest::Approx(brute_force_best_error(pred, truth, mask)));
        // Matching never hurts.
        CHECK(matched <= classification_error(pred, truth, mask) + 1e-15);
    }
}

TEST_CASE("match_clusters: refuses K > 8") {
    const auto big = testutil::random_labels(4, 4, 9, 3);
    CHECK_THROWS_AS(match_clusters(big, big, full_mask(4, 4)), std::invalid_argument);
}

TEST_CASE("classification_error: counting basics") {
    const auto truth = testutil::checkerboard(4, 4);
    CHECK(classification_error(truth, truth, full_mask(4, 4)) == 0.0);

    std::vector<int> flipped(truth.labels());
    for (auto& v : flipped) v = 1 - v;
    CHECK(classification_error(LabelField(4, 4, 2, flipped), truth, full_mask(4, 4)) == 1.0);

    // Half wrong inside the mask.
    std::vector<int> half(truth.labels());
    for (int i = 0; i < 8; ++i) half[static_cast<std::size_t>(i)] = 1 - half[static_cast<std::size_t>(i)];
    CHECK(classification_error(LabelField(4, 4, 2, half), truth, full_mask(4, 4)) ==
          doctest::Approx(0.5));
}

TEST_CASE("classification_error: invariant to changes outside the mask") {
    const auto truth = testutil::random_labels(4, 4, 2, 4);
    Mask mask(4, 4, {1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0});
    std::vector<int> outside_changed(truth.labels());
    for (int i = 8; i < 16; ++i) {
        outside_changed[static_cast<std::size_t>(i)] =
            1 - outside_changed[static_cast<std::size_t>(i)];
    }
    CHECK(classification_error(LabelField(4, 4, 2, outside_changed), truth, mask) == 0.0);
}

TEST_CASE("classification_error: empty mask throws") {
    const auto truth = testutil::checkerboard(2, 2);
    const Mask empty(2, 2, {0, 0, 0, 0});
    CHECK_THROWS_AS(classification_error(truth, truth, empty), std::invalid_argument);
}

TEST_CASE("boundary_length: basic counts") {
    CHECK(boundary_length(testutil::uniform_field(5, 7, 3, 1)) == 0);
    CHECK(boundary_length(testutil::checkerboard(2, 2)) == 4);
    // Vertical half-split: one differing pair per row.
    std::vector<int> split(6 * 8, 0);
    for (int y = 0; y < 6; ++y) {
        for (int x = 4; x < 8; ++x) split[static_cast<std::size_t>(y) * 8 + x] = 1;
    }
    CHECK(boundary_length(LabelField(6, 8, 2, std::move(split))) == 6);
}

TEST_CASE("onenn_baseline: nearest prototype and tie-breaks") {
    const ImageGrid image(1, 3, 1, {0.2, 0.5, 1.0});
    LabeledVoxelSet labeled;
    LabeledVoxel a, b;
    a.index = 0;
    a.class_index = 0;
    a.intensity = Eigen::VectorXd::Constant(1, 0.0);
    b.index = 2;
    b.class_index = 1;
    b.intensity = Eigen::VectorXd::Constant(1, 1.0);
    labeled.push_back(a);
    labeled.push_back(b);
    const auto pred = onenn_baseline(image, labeled, 2);
    CHECK(pred.label(0) == 0); // 0.2 is nearer 0
    CHECK(pred.label(1) == 0); // exact tie -> lower class index
    CHECK(pred.label(2) == 1); // labeled voxel keeps its own class
}

TEST_CASE("mean/sem: degenerate and standard cases") {
    CHECK(mean_of({0.5}) == 0.5);
    CHECK(sem_of({0.5}) == 0.0);
    const std::vector<double> values{0.1, 0.2, 0.3};
    CHECK(mean_of(values) == doctest::Approx(0.2));
    CHECK(sem_of(values) == doctest::Approx(0.1 / std::sqrt(3.0)).epsilon(1e-12));
}

namespace {

ExperimentConfig small_config() {
    ExperimentConfig config;
    config.target_phantom.height = 24;
    config.target_phantom.width = 24;
    config.source_phantom.height = 24;
    config.source_phantom.width = 24;
    config.source_count = 2;
    config.repetitions = 2;
    config.base_seed = 5;
    config.jobs = 1;
    return config;
}

} // namespace

TEST_CASE("run_experiment: deterministic across runs") {
    ExperimentConfig config = small_config();
    config.methods = {Method::UGM, Method::OneNN};
    const auto a = run_experiment(config);
    const auto b = run_experiment(config);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t m = 0; m < a.rows.size(); ++m) {
        CHECK(a.rows[m].errors == b.rows[m].errors);
        CHECK(a.rows[m].mean_error == b.rows[m].mean_error);
        CHECK(a.rows[m].sem == b.rows[m].sem);
        for (std::size_t r = 0; r < a.rows[m].segmentations.size(); ++r) {
            CHECK(a.rows[m].segmentations[r].labels() == b.rows[m].segmentations[r].labels());
        }
    }
}

TEST_CASE("run_experiment: UHP with beta = 0 reproduces UGM exactly") {
    ExperimentConfig config = small_config();
    config.methods = {Method::UGM, Method::UHP};
    config.beta_fitted = false;
    config.beta_fixed = 0.0;
    const auto table = run_experiment(config);
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].errors == table.rows[1].errors);
}

TEST_CASE("run_experiment: single repetition flags the degenerate SEM") {
    ExperimentConfig config = small_config();
    config.methods = {Method::UGM};
    config.repetitions = 1;
    const auto table = run_experiment(config);
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0].sem == 0.0);
    CHECK(table.rows[0].sem_degenerate);
}

TEST_CASE("run_experiment: aggregates recompute from raw errors") {
    ExperimentConfig config = small_config();
    config.methods = {Method::OneNN, Method::SGM};
    config.repetitions = 3;
    const auto table = run_experiment(config);
    for (const auto& row : table.rows) {
        CHECK(row.mean_error == mean_of(row.errors));
        CHECK(row.sem == sem_of(row.errors));
        CHECK(static_cast<int>(row.errors.size()) == 3);
    }
}

TEST_CASE("run_experiment: parallel repetitions match sequential") {
    ExperimentConfig config = small_config();
    config.methods = {Method::UGM, Method::SHP};
    config.repetitions = 4;
    config.beta_fitted = false;
    config.beta_fixed = 0.1;
    config.jobs = 1;
    const auto sequential = run_experiment(config);
    config.jobs = 4;
    const auto parallel = run_experiment(config);
    for (std::size_t m = 0; m < sequential.rows.size(); ++m) {
        CHECK(sequential.rows[m].errors == parallel.rows[m].errors);
    }
}

TEST_CASE("larger smoothing shortens boundaries on noisy phantoms") {
    PhantomSpec spec;
    spec.height = 32;
    spec.width = 32;
    spec.class_stddevs = {0.15, 0.15, 0.15, 0.15};
    double smooth_total = 0.0;
    double rough_total = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto phantom = generate_phantom(spec, seed);
        const auto priors = Hyperparams::weak_default(phantom.image, 4);
        const auto init = kmeans_init(phantom.image, 4, seed);
        const auto rough = fit(phantom.image, priors, SmoothnessParams::zeros(4),
                               init.responsibilities, {});
        const auto smooth = fit(phantom.image, priors, SmoothnessParams::uniform(4, 2.0),
                                init.responsibilities, {});
        rough_total += static_cast<double>(boundary_length(segment(rough.responsibilities)));
        smooth_total += static_cast<double>(boundary_length(segment(smooth.responsibilities)));
    }
    CHECK(smooth_total < rough_total);
}
