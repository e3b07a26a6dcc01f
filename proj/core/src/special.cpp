#include "pottsvb/special.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "pottsvb/errors.hpp"

namespace pottsvb {

double digamma(double x) {
    if (!(x > 0.0)) {
        throw std::domain_error("digamma: argument must be > 0, got " + std::to_string(x));
    }
    // Shift into the asymptotic regime: psi(x) = psi(x + 1) - 1/x.
    double shift = 0.0;
    while (x < 6.0) {
        shift -= 1.0 / x;
        x += 1.0;
    }
    // Asymptotic series psi(x) ~ ln x - 1/(2x) - sum_n B_2n / (2n x^2n),
    // Bernoulli terms through x^-14.
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double acc = 0.0;
    // Coefficients of inv^2..inv^14 (even powers): -B_2n / (2n).
    static constexpr double coeff[] = {
        -1.0 / 12.0,        // x^-2
        1.0 / 120.0,        // x^-4
        -1.0 / 252.0,       // x^-6
        1.0 / 240.0,        // x^-8
        -1.0 / 132.0,       // x^-10
        691.0 / 32760.0,    // x^-12
        -1.0 / 12.0,        // x^-14
    };
    double power = inv2;
    for (const double c : coeff) {
        acc += c * power;
        power *= inv2;
    }
    return shift + std::log(x) - 0.5 * inv + acc;
}

std::vector<double> expect_log_mixture_weights(std::span<const double> alpha) {
    double total = 0.0;
    for (const double a : alpha) {
        if (!(a > 0.0)) {
            throw std::domain_error("expect_log_mixture_weights: alpha entries must be > 0");
        }
        total += a;
    }
    const double psi_total = digamma(total);
    std::vector<double> out;
    out.reserve(alpha.size());
    for (const double a : alpha) {
        out.push_back(digamma(a) - psi_total);
    }
    return out;
}

namespace {

// log |M| of an SPD matrix via Cholesky; throws numeric_error if not SPD.
double spd_log_det(const Eigen::MatrixXd& m, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        throw numeric_error(std::string(what) + ": matrix is not symmetric positive-definite");
    }
    const Eigen::MatrixXd& l = llt.matrixLLT();
    double log_det = 0.0;
    for (Eigen::Index d = 0; d < m.rows(); ++d) {
        log_det += 2.0 * std::log(l(d, d));
    }
    return log_det;
}

} // namespace

double expect_log_det_precision(double nu, const Eigen::MatrixXd& delta) {
    const int dim = static_cast<int>(delta.rows());
    if (delta.cols() != dim) {
        throw std::invalid_argument("expect_log_det_precision: Delta must be square");
    }
    if (!(nu > dim - 1)) {
        throw std::domain_error("expect_log_det_precision: requires nu > D - 1");
    }
    double sum = 0.0;
    for (int d = 1; d <= dim; ++d) {
        sum += digamma((nu + 1.0 - d) / 2.0);
    }
    return sum + dim * std::log(2.0) + spd_log_det(delta, "expect_log_det_precision");
}

double expect_quadratic(const Eigen::VectorXd& x, const Eigen::VectorXd& upsilon,
                        double gamma, double nu, const Eigen::MatrixXd& delta) {
    if (!(gamma > 0.0)) {
        throw std::domain_error("expect_quadratic: gamma must be > 0");
    }
    if (x.size() != upsilon.size() || delta.rows() != x.size() || delta.cols() != x.size()) {
        throw std::invalid_argument("expect_quadratic: dimension mismatch");
    }
    const Eigen::VectorXd diff = x - upsilon;
    return static_cast<double>(x.size()) / gamma + nu * diff.dot(delta * diff);
}

double expect_log_gaussian(const Eigen::VectorXd& x, const Eigen::VectorXd& upsilon,
                           double gamma, double nu, const Eigen::MatrixXd& delta) {
    const double dim = static_cast<double>(x.size());
    return -0.5 * dim * std::log(2.0 * 3.14159265358979323846) +
           0.5 * expect_log_det_precision(nu, delta) -
           0.5 * expect_quadratic(x, upsilon, gamma, nu, delta);
}

double log_sum_exp(std::span<const double> values) {
    double max = -std::numeric_limits<double>::infinity();
    for (const double v : values) {
        if (v > max) max = v;
    }
    if (!std::isfinite(max)) {
        return max;
    }
    double sum = 0.0;
    for (const double v : values) {
        sum += std::exp(v - max);
    }
    return max + std::log(sum);
}

} // namespace pottsvb
