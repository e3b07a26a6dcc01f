#include "pottsvb/vb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "pottsvb/errors.hpp"
#include "pottsvb/special.hpp"

namespace pottsvb {

Hyperparams::Hyperparams(std::vector<ClassHyperparams> classes) : classes_(std::move(classes)) {
    if (classes_.empty()) {
        throw std::invalid_argument("Hyperparams: at least one class required");
    }
    const Eigen::Index dim = classes_.front().upsilon.size();
    if (dim < 1) {
        throw std::invalid_argument("Hyperparams: dimension must be >= 1");
    }
    for (std::size_t k = 0; k < classes_.size(); ++k) {
        const ClassHyperparams& c = classes_[k];
        const std::string where = "Hyperparams class " + std::to_string(k);
        if (c.upsilon.size() != dim) {
            throw std::invalid_argument(where + ": inconsistent dimension");
        }
        if (!(c.alpha > 0.0)) throw std::invalid_argument(where + ": alpha must be > 0");
        if (!(c.gamma > 0.0)) throw std::invalid_argument(where + ": gamma must be > 0");
        if (!(c.nu > static_cast<double>(dim) - 1.0)) {
            throw std::invalid_argument(where + ": nu must be > D - 1");
        }
        if (c.delta.rows() != dim || c.delta.cols() != dim) {
            throw std::invalid_argument(where + ": Delta must be D x D");
        }
        Eigen::LLT<Eigen::MatrixXd> llt(c.delta);
        if (llt.info() != Eigen::Success) {
            throw std::invalid_argument(where + ": Delta must be symmetric positive-definite");
        }
    }
}

Hyperparams Hyperparams::weak_default(const ImageGrid& image, int num_classes) {
    if (num_classes < 1) {
        throw std::invalid_argument("weak_default: num_classes must be >= 1");
    }
    const int dim = image.channels();
    const int n = image.voxel_count();

    // Per-channel sorted copies for quantile anchors.
    std::vector<std::vector<double>> sorted(static_cast<std::size_t>(dim));
    for (int d = 0; d < dim; ++d) {
        auto& channel = sorted[static_cast<std::size_t>(d)];
        channel.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            channel[static_cast<std::size_t>(i)] = image.value(i, d);
        }
        std::sort(channel.begin(), channel.end());
    }
    auto quantile = [&](int d, double q) {
        const auto& channel = sorted[static_cast<std::size_t>(d)];
        const double pos = q * static_cast<double>(n - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, channel.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return channel[lo] + frac * (channel[hi] - channel[lo]);
    };

    // Pooled variance across all values, floored against constant images.
    const auto& all = image.data();
    const double mean = std::accumulate(all.begin(), all.end(), 0.0) / all.size();
    double var = 0.0;
    for (const double v : all) {
        var += (v - mean) * (v - mean);
    }
    var = std::max(var / all.size(), 1e-12);

    std::vector<ClassHyperparams> classes;
    classes.reserve(static_cast<std::size_t>(num_classes));
    for (int k = 0; k < num_classes; ++k) {
        ClassHyperparams c;
        c.alpha = 1.0;
        c.gamma = 1.0;
        c.nu = dim + 1.0;
        c.upsilon.resize(dim);
        const double q = (k + 0.5) / num_classes;
        for (int d = 0; d < dim; ++d) {
            c.upsilon(d) = quantile(d, q);
        }
        c.delta = Eigen::MatrixXd::Identity(dim, dim) / var;
        classes.push_back(std::move(c));
    }
    return Hyperparams(std::move(classes));
}

ClampSet::ClampSet(std::vector<std::pair<int, int>> clamps, int num_voxels, int num_classes)
    : clamps_(std::move(clamps)) {
    std::sort(clamps_.begin(), clamps_.end());
    for (std::size_t i = 0; i < clamps_.size(); ++i) {
        const auto [voxel, cls] = clamps_[i];
        if (voxel < 0 || voxel >= num_voxels) {
            throw std::invalid_argument("ClampSet: voxel index " + std::to_string(voxel) +
                                        " out of range");
        }
        if (cls < 0 || cls >= num_classes) {
            throw std::invalid_argument("ClampSet: class index " + std::to_string(cls) +
                                        " out of range");
        }
        if (i > 0 && clamps_[i - 1].first == voxel) {
            throw std::invalid_argument("ClampSet: voxel " + std::to_string(voxel) +
                                        " clamped more than once");
        }
    }
}

std::optional<int> ClampSet::clamped_class(int voxel) const {
    const auto it = std::lower_bound(clamps_.begin(), clamps_.end(), voxel,
                                     [](const auto& entry, int v) { return entry.first < v; });
    if (it != clamps_.end() && it->first == voxel) {
        return it->second;
    }
    return std::nullopt;
}

namespace {

void write_one_hot_rows(std::vector<double>& values, int num_classes, const ClampSet& clamps) {
    for (const auto& [voxel, cls] : clamps.entries()) {
        double* row = values.data() + static_cast<std::size_t>(voxel) * num_classes;
        std::fill(row, row + num_classes, 0.0);
        row[cls] = 1.0;
    }
}

void check_shapes(const ImageGrid& image, const Hyperparams& post, const SmoothnessParams& beta,
                  const ResponsibilityField& rho_prev) {
    if (post.dim() != image.channels()) {
        throw std::invalid_argument("e_step: hyperparameter dimension does not match channels");
    }
    if (post.num_classes() != rho_prev.num_classes() || post.num_classes() != beta.num_classes()) {
        throw std::invalid_argument("e_step: class count mismatch");
    }
    if (rho_prev.height() != image.height() || rho_prev.width() != image.width()) {
        throw std::invalid_argument("e_step: responsibility grid does not match image");
    }
}

} // namespace

ResponsibilityField e_step(const ImageGrid& image, const PosteriorHyperparams& post,
                           const SmoothnessParams& beta, const ResponsibilityField& rho_prev,
                           const ClampSet& clamps) {
    check_shapes(image, post, beta, rho_prev);
    const int n = image.voxel_count();
    const int kk = post.num_classes();
    const int dim = post.dim();

    // Per-class constants: E[log pi_k] and the data-independent part of
    // E[log N(x | .)].
    std::vector<double> alpha(static_cast<std::size_t>(kk));
    for (int k = 0; k < kk; ++k) {
        alpha[static_cast<std::size_t>(k)] = post.cls(k).alpha;
    }
    const std::vector<double> elog_pi = expect_log_mixture_weights(alpha);
    std::vector<double> constant(static_cast<std::size_t>(kk));
    for (int k = 0; k < kk; ++k) {
        const ClassHyperparams& c = post.cls(k);
        constant[static_cast<std::size_t>(k)] =
            elog_pi[static_cast<std::size_t>(k)] -
            0.5 * dim * std::log(2.0 * 3.14159265358979323846) +
            0.5 * expect_log_det_precision(c.nu, c.delta);
    }

    // Mean-field neighbor term from the previous responsibilities.
    const NeighborCountField ybar = neighbor_class_counts(rho_prev);

    std::vector<double> values(static_cast<std::size_t>(n) * kk);
    std::vector<double> log_r(static_cast<std::size_t>(kk));
    std::vector<double> diff(static_cast<std::size_t>(dim));
    for (int i = 0; i < n; ++i) {
        const auto x = image.voxel(i);
        const auto counts = ybar.row(i);
        for (int k = 0; k < kk; ++k) {
            const ClassHyperparams& c = post.cls(k);
            for (int d = 0; d < dim; ++d) {
                diff[static_cast<std::size_t>(d)] = x[static_cast<std::size_t>(d)] - c.upsilon(d);
            }
            double quad = 0.0;
            for (int d = 0; d < dim; ++d) {
                double inner = 0.0;
                for (int e = 0; e < dim; ++e) {
                    inner += c.delta(d, e) * diff[static_cast<std::size_t>(e)];
                }
                quad += diff[static_cast<std::size_t>(d)] * inner;
            }
            const double expect_quad = dim / c.gamma + c.nu * quad;
            const double lr = constant[static_cast<std::size_t>(k)] - 0.5 * expect_quad +
                              beta.beta(k) * counts[k];
            if (!std::isfinite(lr)) {
                throw numeric_error("e_step: non-finite expectation for class " +
                                    std::to_string(k) + " at voxel " + std::to_string(i));
            }
            log_r[static_cast<std::size_t>(k)] = lr;
        }
        const double lse = log_sum_exp(log_r);
        double* row = values.data() + static_cast<std::size_t>(i) * kk;
        for (int k = 0; k < kk; ++k) {
            row[k] = std::exp(log_r[static_cast<std::size_t>(k)] - lse);
        }
    }

    write_one_hot_rows(values, kk, clamps);
    return {image.height(), image.width(), kk, std::move(values)};
}

SufficientStats compute_stats(const ImageGrid& image, const ResponsibilityField& rho) {
    if (rho.height() != image.height() || rho.width() != image.width()) {
        throw std::invalid_argument("compute_stats: responsibility grid does not match image");
    }
    const int n = image.voxel_count();
    const int kk = rho.num_classes();
    const int dim = image.channels();

    SufficientStats stats;
    stats.s0.assign(static_cast<std::size_t>(kk), 0.0);
    stats.s1.assign(static_cast<std::size_t>(kk), Eigen::VectorXd::Zero(dim));
    stats.s2.assign(static_cast<std::size_t>(kk), Eigen::MatrixXd::Zero(dim, dim));

    // First pass: effective counts and weighted sums, row-major order.
    for (int i = 0; i < n; ++i) {
        const auto x = image.voxel(i);
        const auto row = rho.row(i);
        for (int k = 0; k < kk; ++k) {
            const double w = row[k];
            stats.s0[static_cast<std::size_t>(k)] += w;
            auto& s1 = stats.s1[static_cast<std::size_t>(k)];
            for (int d = 0; d < dim; ++d) {
                s1(d) += w * x[static_cast<std::size_t>(d)];
            }
        }
    }

    // Weighted means; zero-count classes keep a zero mean (their scatter
    // stays zero as well since every weight is zero).
    std::vector<Eigen::VectorXd> mean(static_cast<std::size_t>(kk), Eigen::VectorXd::Zero(dim));
    for (int k = 0; k < kk; ++k) {
        if (stats.s0[static_cast<std::size_t>(k)] > 0.0) {
            mean[static_cast<std::size_t>(k)] =
                stats.s1[static_cast<std::size_t>(k)] / stats.s0[static_cast<std::size_t>(k)];
        }
    }

    // Second pass: weighted scatter about the weighted mean.
    std::vector<double> diff(static_cast<std::size_t>(dim));
    for (int i = 0; i < n; ++i) {
        const auto x = image.voxel(i);
        const auto row = rho.row(i);
        for (int k = 0; k < kk; ++k) {
            const double w = row[k];
            if (w == 0.0) continue;
            const auto& mu = mean[static_cast<std::size_t>(k)];
            auto& s2 = stats.s2[static_cast<std::size_t>(k)];
            for (int d = 0; d < dim; ++d) {
                diff[static_cast<std::size_t>(d)] = x[static_cast<std::size_t>(d)] - mu(d);
            }
            for (int d = 0; d < dim; ++d) {
                for (int e = 0; e < dim; ++e) {
                    s2(d, e) += w * diff[static_cast<std::size_t>(d)] * diff[static_cast<std::size_t>(e)];
                }
            }
        }
    }
    return stats;
}

PosteriorHyperparams m_step(const PriorHyperparams& priors, const SufficientStats& stats) {
    if (priors.num_classes() != stats.num_classes()) {
        throw std::invalid_argument("m_step: class count mismatch");
    }
    const int dim = priors.dim();
    std::vector<ClassHyperparams> classes;
    classes.reserve(static_cast<std::size_t>(priors.num_classes()));

    for (int k = 0; k < priors.num_classes(); ++k) {
        const ClassHyperparams& prior = priors.cls(k);
        const double s0 = stats.s0[static_cast<std::size_t>(k)];
        if (s0 == 0.0) {
            classes.push_back(prior); // empty cluster: posterior equals prior
            continue;
        }
        const Eigen::VectorXd& s1 = stats.s1[static_cast<std::size_t>(k)];
        const Eigen::MatrixXd& s2 = stats.s2[static_cast<std::size_t>(k)];
        const Eigen::VectorXd mean = s1 / s0;

        ClassHyperparams post;
        post.alpha = prior.alpha + s0;
        post.gamma = prior.gamma + s0;
        post.nu = prior.nu + s0;
        post.upsilon = (prior.gamma * prior.upsilon + s1) / (prior.gamma + s0);

        const Eigen::MatrixXd prior_delta_inv =
            prior.delta.llt().solve(Eigen::MatrixXd::Identity(dim, dim));
        const Eigen::VectorXd dev = mean - prior.upsilon;
        Eigen::MatrixXd delta_inv = prior_delta_inv + s2 +
                                    (prior.gamma * s0) / (prior.gamma + s0) * dev * dev.transpose();
        delta_inv = 0.5 * (delta_inv + delta_inv.transpose());

        Eigen::LLT<Eigen::MatrixXd> llt(delta_inv);
        if (llt.info() != Eigen::Success) {
            throw numeric_error("m_step: updated precision scale for class " + std::to_string(k) +
                                " is not symmetric positive-definite");
        }
        Eigen::MatrixXd delta = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
        post.delta = 0.5 * (delta + delta.transpose());
        classes.push_back(std::move(post));
    }
    return PosteriorHyperparams(std::move(classes));
}

namespace {

// The normalization and clamp-persistence contract, enforced after every
// E-step of a fit run.
void check_e_step_invariants(const ResponsibilityField& rho, const ClampSet& clamps) {
    const int kk = rho.num_classes();
    for (int i = 0; i < rho.voxel_count(); ++i) {
        const auto row = rho.row(i);
        double sum = 0.0;
        for (int k = 0; k < kk; ++k) sum += row[k];
        if (std::fabs(sum - 1.0) > 1e-12) {
            throw numeric_error("fit: responsibility row " + std::to_string(i) +
                                " not normalized");
        }
    }
    for (const auto& [voxel, cls] : clamps.entries()) {
        const auto row = rho.row(voxel);
        for (int k = 0; k < kk; ++k) {
            if (row[k] != (k == cls ? 1.0 : 0.0)) {
                throw numeric_error("fit: clamp violated at voxel " + std::to_string(voxel));
            }
        }
    }
}

} // namespace

FitResult fit(const ImageGrid& image, const PriorHyperparams& priors,
              const SmoothnessParams& beta, const ResponsibilityField& rho_init,
              const ClampSet& clamps, const VbConfig& config, const FitObserver& observer) {
    if (config.max_iterations < 1 || !(config.tolerance > 0.0)) {
        throw std::invalid_argument("fit: config fields must be positive");
    }
    ResponsibilityField rho = rho_init;
    PosteriorHyperparams posterior = priors;
    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(config.max_iterations));

    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        posterior = m_step(priors, compute_stats(image, rho));
        ResponsibilityField next = e_step(image, posterior, beta, rho, clamps);
        check_e_step_invariants(next, clamps);

        double change = 0.0;
        const auto& a = rho.values();
        const auto& b = next.values();
        for (std::size_t j = 0; j < a.size(); ++j) {
            change += std::fabs(a[j] - b[j]);
        }
        change /= static_cast<double>(a.size());

        rho = std::move(next);
        trace.push_back(change);
        if (observer) {
            observer(iter, rho, change);
        }
        if (change < config.tolerance) {
            break;
        }
    }
    return {std::move(rho), std::move(posterior), std::move(trace)};
}

LabelField segment(const ResponsibilityField& rho) { return argmax_labels(rho); }

ResponsibilityField apply_clamps(const ResponsibilityField& rho, const ClampSet& clamps) {
    std::vector<double> values = rho.values();
    write_one_hot_rows(values, rho.num_classes(), clamps);
    return {rho.height(), rho.width(), rho.num_classes(), std::move(values)};
}

} // namespace pottsvb
