#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pottsvb {

/// Digamma psi(x) for x > 0, accurate to better than 1e-10 over (0, 1e6].
/// Recurrence-shifts the argument to x >= 6 and evaluates an asymptotic
/// series with Bernoulli terms through x^-14.
double digamma(double x);

/// E[log pi_k] = psi(alpha_k) - psi(sum alpha) under a Dirichlet posterior.
std::vector<double> expect_log_mixture_weights(std::span<const double> alpha);

/// E[log |Lambda|] = sum_d psi((nu + 1 - d) / 2) + D log 2 + log |Delta|
/// under a Wishart(nu, Delta) posterior. Requires nu > D - 1 and SPD Delta.
double expect_log_det_precision(double nu, const Eigen::MatrixXd& delta);

/// E[(x - mu)' Lambda (x - mu)] = D / gamma + nu (x - upsilon)' Delta (x - upsilon).
double expect_quadratic(const Eigen::VectorXd& x, const Eigen::VectorXd& upsilon,
                        double gamma, double nu, const Eigen::MatrixXd& delta);

/// E[log N(x | mu, Lambda^-1)] composed from the two expectations above.
double expect_log_gaussian(const Eigen::VectorXd& x, const Eigen::VectorXd& upsilon,
                           double gamma, double nu, const Eigen::MatrixXd& delta);

/// log sum_k exp(v_k) with max-subtraction.
double log_sum_exp(std::span<const double> values);

} // namespace pottsvb
