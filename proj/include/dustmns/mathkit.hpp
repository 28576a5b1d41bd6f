#pragma once

#include <functional>
#include <vector>

namespace dustmns::math {

/// Calibration map g_k(x) = 1 - (1 - x)^(1/k), the inverse of max_exceed_prob.
[[nodiscard]] double calibration_map(double x, int k);

struct CalibrationDerivs {
    double first;
    double second;
};

/// g_k'(x) and g_k''(x). Singular at x = 1.
[[nodiscard]] CalibrationDerivs calibration_derivs(double x, int k);

/// q_k(theta) = 1 - (1 - theta)^k: probability that the maximum of k iid units exceeds c.
[[nodiscard]] double max_exceed_prob(double theta, int k);

/// Regularized incomplete beta function I_c(alpha, beta).
///
/// Continued fraction (modified Lentz) with the usual symmetry switch at
/// c = (alpha + 1) / (alpha + beta + 2). Tolerance 1e-14, at most 300 terms.
[[nodiscard]] double reg_inc_beta(double c, double alpha, double beta);

/// Inverse of reg_inc_beta in c, by bracketed root finding.
[[nodiscard]] double beta_quantile(double u, double alpha, double beta);

struct BinomialMass {
    double pmf;
    double cdf;
};

/// Pr(X = r) and Pr(X <= r) for X ~ Binomial(n, p), evaluated in log space.
[[nodiscard]] BinomialMass binom_pmf_cdf(int n, double p, int r);

/// Full pmf vector of Binomial(n, p), indices 0..n.
[[nodiscard]] std::vector<double> binom_pmf_all(int n, double p);

/// Pr(p_{r:k} > c) = Pr(at least k - r + 1 of k iid units exceed c), for 1 <= r <= k.
[[nodiscard]] double order_stat_exceed(int r, int k, double theta);

/// First and second derivatives of order_stat_exceed with respect to theta.
[[nodiscard]] double order_stat_exceed_slope(int r, int k, double theta);
[[nodiscard]] double order_stat_exceed_curvature(int r, int k, double theta);

/// Mean of the zero-truncated binomial ZTBin(nu, rho).
[[nodiscard]] double ztbin_mean(int nu, double rho);

struct RootSolveSpec {
    double lower = 0.0;
    double upper = 1.0;
    double abs_tol = 1e-10;
    int max_iter = 200;
};

/// Bracketed root finder: secant steps guarded by bisection. Converges whenever
/// f is continuous and changes sign over [lower, upper].
///
/// @throws BracketError if f(lower) and f(upper) share a sign.
/// @throws ConvergenceError if max_iter is exhausted.
[[nodiscard]] double solve_root(const std::function<double(double)>& f, const RootSolveSpec& spec);

[[nodiscard]] double normal_cdf(double x);
[[nodiscard]] double normal_quantile(double p);

/// Two-sided critical value z_{alpha/2} for a confidence level in (0, 1).
[[nodiscard]] double z_critical(double level);

}  // namespace dustmns::math
