#include "dustmns/mathkit.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "dustmns/errors.hpp"

namespace dustmns::math {

namespace {

// glibc's lgamma writes the global signgam; lgamma_r keeps concurrent callers race-free.
double log_gamma(double x) {
#if defined(__GLIBC__)
    int sign = 0;
    return ::lgamma_r(x, &sign);
#else
    return std::lgamma(x);
#endif
}

double log_choose(int n, int r) {
    return log_gamma(n + 1.0) - log_gamma(r + 1.0) - log_gamma(n - r + 1.0);
}

// Binomial pmf, zero outside 0..n.
double binom_pmf(int j, int n, double p) {
    if (j < 0 || j > n) {
        return 0.0;
    }
    if (p == 0.0) {
        return j == 0 ? 1.0 : 0.0;
    }
    if (p == 1.0) {
        return j == n ? 1.0 : 0.0;
    }
    return std::exp(log_choose(n, j) + j * std::log(p) + (n - j) * std::log1p(-p));
}

void require_unit_interval(double x, const char* what) {
    if (!(x >= 0.0 && x <= 1.0)) {
        throw DomainError(std::string(what) + " must lie in [0, 1], got " + std::to_string(x));
    }
}

void require_set_size(int k) {
    if (k < 1) {
        throw DomainError("set size k must be >= 1, got " + std::to_string(k));
    }
}

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-14;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) {
        d = kTiny;
    }
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) {
            d = kTiny;
        }
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) {
            c = kTiny;
        }
        d = 1.0 / d;
        h *= d * c;

        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) {
            d = kTiny;
        }
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) {
            c = kTiny;
        }
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) {
            return h;
        }
    }
    throw ConvergenceError("incomplete beta continued fraction did not converge");
}

}  // namespace

double calibration_map(double x, int k) {
    require_unit_interval(x, "calibration argument");
    require_set_size(k);
    return -std::expm1(std::log1p(-x) / k);
}

CalibrationDerivs calibration_derivs(double x, int k) {
    require_set_size(k);
    if (x == 1.0) {
        throw SingularityError("calibration map derivatives are singular at x = 1");
    }
    require_unit_interval(x, "calibration argument");
    const double log_tail = std::log1p(-x);
    const double inv_k = 1.0 / k;
    return {inv_k * std::exp((inv_k - 1.0) * log_tail),
            (k - 1.0) * inv_k * inv_k * std::exp((inv_k - 2.0) * log_tail)};
}

double max_exceed_prob(double theta, int k) {
    require_unit_interval(theta, "theta");
    require_set_size(k);
    return -std::expm1(k * std::log1p(-theta));
}

double reg_inc_beta(double c, double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
        throw DomainError("incomplete beta shapes must be positive and finite");
    }
    require_unit_interval(c, "incomplete beta argument");
    if (c == 0.0) {
        return 0.0;
    }
    if (c == 1.0) {
        return 1.0;
    }
    const double log_front = log_gamma(alpha + beta) - log_gamma(alpha) - log_gamma(beta) +
                             alpha * std::log(c) + beta * std::log1p(-c);
    const double front = std::exp(log_front);
    if (c < (alpha + 1.0) / (alpha + beta + 2.0)) {
        return front * beta_continued_fraction(alpha, beta, c) / alpha;
    }
    return 1.0 - front * beta_continued_fraction(beta, alpha, 1.0 - c) / beta;
}

double beta_quantile(double u, double alpha, double beta) {
    require_unit_interval(u, "beta quantile level");
    if (u == 0.0) {
        return 0.0;
    }
    if (u == 1.0) {
        return 1.0;
    }
    return solve_root([&](double x) { return reg_inc_beta(x, alpha, beta) - u; },
                      {.lower = 0.0, .upper = 1.0, .abs_tol = 1e-14, .max_iter = 300});
}

BinomialMass binom_pmf_cdf(int n, double p, int r) {
    if (n < 0 || r < 0 || r > n) {
        throw DomainError("binomial support violated: need 0 <= r <= n");
    }
    require_unit_interval(p, "binomial probability");
    double cdf = 0.0;
    for (int j = 0; j <= r; ++j) {
        cdf += binom_pmf(j, n, p);
    }
    return {binom_pmf(r, n, p), std::fmin(cdf, 1.0)};
}

std::vector<double> binom_pmf_all(int n, double p) {
    if (n < 0) {
        throw DomainError("binomial size must be nonnegative");
    }
    require_unit_interval(p, "binomial probability");
    std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
    for (int j = 0; j <= n; ++j) {
        pmf[static_cast<std::size_t>(j)] = binom_pmf(j, n, p);
    }
    return pmf;
}

namespace {

int exceed_count_needed(int r, int k) {
    require_set_size(k);
    if (r < 1 || r > k) {
        throw DomainError("order statistic rank must satisfy 1 <= r <= k");
    }
    return k - r + 1;
}

}  // namespace

double order_stat_exceed(int r, int k, double theta) {
    const int need = exceed_count_needed(r, k);
    require_unit_interval(theta, "theta");
    double total = 0.0;
    for (int j = need; j <= k; ++j) {
        total += binom_pmf(j, k, theta);
    }
    return std::fmin(total, 1.0);
}

double order_stat_exceed_slope(int r, int k, double theta) {
    const int need = exceed_count_needed(r, k);
    require_unit_interval(theta, "theta");
    return k * binom_pmf(need - 1, k - 1, theta);
}

double order_stat_exceed_curvature(int r, int k, double theta) {
    const int need = exceed_count_needed(r, k);
    require_unit_interval(theta, "theta");
    if (k < 2) {
        return 0.0;
    }
    return static_cast<double>(k) * (k - 1) *
           (binom_pmf(need - 2, k - 2, theta) - binom_pmf(need - 1, k - 2, theta));
}

double ztbin_mean(int nu, double rho) {
    if (nu < 1) {
        throw DomainError("ZTBin size must be >= 1");
    }
    if (!(rho > 0.0 && rho <= 1.0)) {
        throw DomainError("ZTBin probability must lie in (0, 1]");
    }
    const double nonzero = -std::expm1(nu * std::log1p(-rho));
    double mean = 0.0;
    for (int l = 1; l <= nu; ++l) {
        mean += l * binom_pmf(l, nu, rho);
    }
    return mean / nonzero;
}

double solve_root(const std::function<double(double)>& f, const RootSolveSpec& spec) {
    if (!(spec.lower < spec.upper) || !std::isfinite(spec.lower) || !std::isfinite(spec.upper)) {
        throw ArgumentError("root bracket must satisfy lower < upper with finite ends");
    }
    if (!(spec.abs_tol > 0.0) || spec.max_iter < 1) {
        throw ArgumentError("root solver needs abs_tol > 0 and max_iter >= 1");
    }
    double a = spec.lower;
    double b = spec.upper;
    double fa = f(a);
    double fb = f(b);
    if (fa == 0.0) {
        return a;
    }
    if (fb == 0.0) {
        return b;
    }
    if (std::signbit(fa) == std::signbit(fb)) {
        throw BracketError("no sign change over [" + std::to_string(a) + ", " + std::to_string(b) +
                           "]");
    }

    bool force_bisect = false;
    for (int iter = 0; iter < spec.max_iter; ++iter) {
        const double width = b - a;
        if (width <= spec.abs_tol) {
            return std::fabs(fa) <= std::fabs(fb) ? a : b;
        }
        double x = a + 0.5 * width;
        if (!force_bisect) {
            const double secant = a - fa * width / (fb - fa);
            if (secant > a && secant < b) {
                x = secant;
            }
        }
        const double fx = f(x);
        if (fx == 0.0) {
            return x;
        }
        if (std::signbit(fx) == std::signbit(fa)) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        // A step that fails to halve the bracket is followed by a bisection.
        force_bisect = (b - a) > 0.5 * width;
    }
    throw ConvergenceError("root solver exceeded " + std::to_string(spec.max_iter) +
                           " iterations");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("normal quantile level must lie in (0, 1)");
    }
    if (p > 0.5) {
        return -normal_quantile(1.0 - p);
    }
    return solve_root([p](double x) { return normal_cdf(x) - p; },
                      {.lower = -40.0, .upper = 0.0, .abs_tol = 1e-14, .max_iter = 400});
}

double z_critical(double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw DomainError("confidence level must lie in (0, 1)");
    }
    return -normal_quantile(0.5 * (1.0 - level));
}

}  // namespace dustmns::math
