#include "dustmns/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "dustmns/errors.hpp"
#include "dustmns/frame.hpp"
#include "dustmns/mathkit.hpp"

namespace dustmns {

namespace {

constexpr double kStochasticTol = 1e-10;
constexpr int kMonotoneGrid = 2001;
constexpr std::uint64_t kBootstrapStream = 0x626f6f7473747270ULL;

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

void require_counts(int r_n, int n, int k) {
    if (n < 1) {
        throw ArgumentError("n must be >= 1");
    }
    if (k < 1) {
        throw ArgumentError("k must be >= 1");
    }
    if (r_n < 0 || r_n > n) {
        throw ArgumentError("r_n must satisfy 0 <= r_n <= n (r_n = " + std::to_string(r_n) +
                            ", n = " + std::to_string(n) + ")");
    }
}

void require_theta(double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw DomainError("theta must lie in [0, 1], got " + std::to_string(theta));
    }
}

void set_clamped_bc(EstimateReport& report, double raw) {
    report.theta_bc = clamp01(raw);
    if (report.theta_bc != raw) {
        report.theta_bc_unclamped = raw;
        report.flags.emplace_back("clamped");
    }
}

void attach_default_interval(EstimateReport& report, CiStyle style) {
    if (!report.var_hat) {
        return;
    }
    const auto ci = confidence_interval(report, 0.95, style);
    report.ci_low = ci.low;
    report.ci_high = ci.high;
    report.ci_method = to_string(style);
}

const MatrixModel* as_matrix(const MisrankingModel& model) {
    return std::get_if<MatrixModel>(&model);
}

// Inverse of h on [0, 1]. x at the ends maps to the ends.
double invert_h(double x, const MisrankingModel& model, int k) {
    if (x <= 0.0) {
        return 0.0;
    }
    if (x >= 1.0) {
        return 1.0;
    }
    if (const auto* tau = std::get_if<TauModel>(&model); tau && tau->tau == 0.0) {
        return x;  // h is the identity
    }
    return math::solve_root([&](double t) { return h_map(t, model, k) - x; },
                            {.lower = 0.0, .upper = 1.0, .abs_tol = 1e-14, .max_iter = 400});
}

void require_increasing(const MisrankingModel& model, int k) {
    double prev = h_map(0.0, model, k);
    for (int i = 1; i < kMonotoneGrid; ++i) {
        const double t = static_cast<double>(i) / (kMonotoneGrid - 1);
        const double h = h_map(t, model, k);
        if (h < prev) {
            throw ModelError("nominee exceedance map decreases near theta = " + std::to_string(t));
        }
        if (i + 1 < kMonotoneGrid && !(h_map_slope(t, model, k) > 0.0)) {
            throw ModelError("nominee exceedance map is flat near theta = " + std::to_string(t));
        }
        prev = h;
    }
}

}  // namespace

void validate_model(const MisrankingModel& model, int k) {
    if (k < 1) {
        throw ModelError("set size k must be >= 1");
    }
    if (const auto* tau = std::get_if<TauModel>(&model)) {
        if (!(tau->tau >= 0.0 && tau->tau <= 1.0)) {
            throw ModelError("tau must lie in [0, 1], got " + std::to_string(tau->tau));
        }
        return;
    }
    const auto& nu = std::get<MatrixModel>(model).nu;
    const auto kk = static_cast<std::size_t>(k);
    if (nu.size() != kk) {
        throw ModelError("misranking matrix must be " + std::to_string(k) + " x " +
                         std::to_string(k));
    }
    std::vector<double> col(kk, 0.0);
    for (std::size_t r = 0; r < kk; ++r) {
        if (nu[r].size() != kk) {
            throw ModelError("misranking matrix must be square with side k");
        }
        double row = 0.0;
        for (std::size_t s = 0; s < kk; ++s) {
            const double v = nu[r][s];
            if (!std::isfinite(v) || v < 0.0) {
                throw ModelError("misranking matrix entries must be finite and nonnegative");
            }
            row += v;
            col[s] += v;
        }
        if (std::fabs(row - 1.0) > kStochasticTol) {
            throw ModelError("misranking matrix row " + std::to_string(r + 1) +
                             " does not sum to 1");
        }
    }
    for (std::size_t s = 0; s < kk; ++s) {
        if (std::fabs(col[s] - 1.0) > kStochasticTol) {
            throw ModelError("misranking matrix column " + std::to_string(s + 1) +
                             " does not sum to 1");
        }
    }
}

double var_srs_spatial(double theta, int n, double lag_sum, std::optional<double> fpc_fraction) {
    require_theta(theta);
    if (n < 1) {
        throw ArgumentError("n must be >= 1");
    }
    if (!(lag_sum >= 0.0)) {
        throw ArgumentError("lag_sum must be nonnegative");
    }
    const double nn = n;
    const double s2 = theta * (1.0 - theta);
    double v = s2 / nn + s2 * lag_sum / (nn * nn);
    if (fpc_fraction) {
        if (!(*fpc_fraction >= 0.0 && *fpc_fraction <= 1.0)) {
            throw ArgumentError("sampling fraction must lie in [0, 1]");
        }
        v *= 1.0 - *fpc_fraction;
    }
    return v;
}

double realized_lag_sum(const ArealFrame& frame, std::span<const std::size_t> sample,
                        double eta0) {
    if (!(eta0 >= 0.0 && eta0 < 1.0)) {
        throw ArgumentError("eta0 must lie in [0, 1)");
    }
    if (eta0 == 0.0) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto i : sample) {
        const auto lags = bfs_lags(frame, i);
        for (const auto j : sample) {
            if (j != i && lags[j] != kUnreachable) {
                total += std::pow(eta0, static_cast<double>(lags[j]));
            }
        }
    }
    return total;
}

EstimateReport estimate_srs(std::span<const std::uint8_t> indicators, std::optional<double> lag_sum,
                            std::optional<double> fpc_fraction, std::string method) {
    if (indicators.empty()) {
        throw ArgumentError("indicator vector is empty");
    }
    EstimateReport report;
    report.method = std::move(method);
    report.n = static_cast<int>(indicators.size());
    report.r_n = static_cast<int>(std::count_if(indicators.begin(), indicators.end(),
                                                [](std::uint8_t v) { return v != 0; }));
    report.theta_hat = static_cast<double>(report.r_n) / report.n;
    report.theta_bc = report.theta_hat;
    report.bias_hat = 0.0;
    report.var_hat = var_srs_spatial(report.theta_hat, report.n, lag_sum.value_or(0.0), fpc_fraction);
    report.fpc_applied = fpc_fraction.has_value();
    if (*report.var_hat == 0.0) {
        report.flags.emplace_back("zero_variance");
    }
    attach_default_interval(report, CiStyle::delta);
    return report;
}

double leading_bias(int n, int k, double theta) {
    require_theta(theta);
    if (n < 1 || k < 1) {
        throw ArgumentError("leading_bias needs n >= 1 and k >= 1");
    }
    if (k == 1) {
        return 0.0;
    }
    if (theta == 1.0) {
        throw SingularityError("leading bias is singular at theta = 1");
    }
    // (1-q)^(1/k-2) q (1-q) = q (1-theta)^(1-k)
    const double q = math::max_exceed_prob(theta, k);
    return (k - 1.0) / (2.0 * k * k * n) * q * std::pow(1.0 - theta, 1.0 - k);
}

VarianceValue var_dust_mns(double theta, int n, int k) {
    require_theta(theta);
    if (n < 1 || k < 1) {
        throw ArgumentError("var_dust_mns needs n >= 1 and k >= 1");
    }
    if (theta == 0.0 || theta == 1.0) {
        return {0.0, true};
    }
    const double q = math::max_exceed_prob(theta, k);
    return {q * std::pow(1.0 - theta, 2.0 - k) / (static_cast<double>(k) * k * n), false};
}

EstimateReport estimate_dust_mns(int r_n, int n, int k) {
    require_counts(r_n, n, k);
    EstimateReport report;
    report.method = "dust_mns";
    report.n = n;
    report.k = k;
    report.r_n = r_n;
    report.theta_hat = math::calibration_map(static_cast<double>(r_n) / n, k);
    if (r_n == 0 || r_n == n) {
        report.boundary = true;
        report.theta_bc = report.theta_hat;
        report.flags.emplace_back("boundary");
        return report;
    }
    report.bias_hat = leading_bias(n, k, report.theta_hat);
    report.var_hat = var_dust_mns(report.theta_hat, n, k).value;
    set_clamped_bc(report, report.theta_hat - *report.bias_hat);
    attach_default_interval(report, CiStyle::delta_bias_corrected);
    return report;
}

double bias_corrected_estimate(int r_n, int n, int k) {
    require_counts(r_n, n, k);
    const double theta = math::calibration_map(static_cast<double>(r_n) / n, k);
    if (r_n == 0 || r_n == n) {
        return theta;
    }
    return clamp01(theta - leading_bias(n, k, theta));
}

double exact_bias(int n, int k, double theta) {
    require_theta(theta);
    if (n < 1 || k < 1) {
        throw ArgumentError("exact_bias needs n >= 1 and k >= 1");
    }
    if (k == 1) {
        return 0.0;
    }
    const auto pmf = math::binom_pmf_all(n, math::max_exceed_prob(theta, k));
    double mean = 0.0;
    for (int r = 0; r <= n; ++r) {
        mean += pmf[static_cast<std::size_t>(r)] * math::calibration_map(static_cast<double>(r) / n, k);
    }
    return mean - theta;
}

double exact_bias_corrected(int n, int k, double theta) {
    require_theta(theta);
    if (n < 1 || k < 1) {
        throw ArgumentError("exact_bias_corrected needs n >= 1 and k >= 1");
    }
    const auto pmf = math::binom_pmf_all(n, math::max_exceed_prob(theta, k));
    double mean = 0.0;
    for (int r = 0; r <= n; ++r) {
        mean += pmf[static_cast<std::size_t>(r)] * bias_corrected_estimate(r, n, k);
    }
    return mean - theta;
}

Interval bootstrap_ci(std::span<const std::uint8_t> indicators, int k, double level,
                      const BootstrapOptions& options, Rng& rng,
                      const std::optional<MisrankingModel>& model) {
    if (indicators.empty()) {
        throw ArgumentError("bootstrap needs at least one indicator");
    }
    if (options.resamples < 100) {
        throw ArgumentError("bootstrap needs at least 100 resamples");
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw ArgumentError("confidence level must lie in (0, 1)");
    }
    if (k < 1) {
        throw ArgumentError("k must be >= 1");
    }
    if (model) {
        validate_model(*model, k);
    }
    const auto n = indicators.size();
    // The estimate depends on a resample only through its count of ones.
    std::vector<double> by_count(n + 1, std::numeric_limits<double>::quiet_NaN());
    const auto estimate = [&](std::size_t ones) {
        double& slot = by_count[ones];
        if (std::isnan(slot)) {
            const double x = static_cast<double>(ones) / static_cast<double>(n);
            slot = model ? invert_h(x, *model, k) : math::calibration_map(x, k);
        }
        return slot;
    };

    const std::uint64_t base = rng();
    std::vector<double> stats(options.resamples);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t b = 0; b < options.resamples; ++b) {
        auto gen = make_rng(derive_seed(base, kBootstrapStream, b));
        std::size_t ones = 0;
        for (std::size_t i = 0; i < n; ++i) {
            ones += indicators[pick(gen)] != 0 ? 1 : 0;
        }
        stats[b] = estimate(ones);
    }
    std::sort(stats.begin(), stats.end());
    const double alpha = 1.0 - level;
    Interval ci;
    ci.low = clamp01(empirical_quantile(stats, alpha / 2.0));
    ci.high = clamp01(empirical_quantile(stats, 1.0 - alpha / 2.0));
    ci.degenerate = ci.low == ci.high;
    return ci;
}

Interval confidence_interval(const EstimateReport& report, double level, CiStyle style, Rng* rng,
                             const BootstrapOptions& options) {
    if (!(level > 0.0 && level < 1.0)) {
        throw ArgumentError("confidence level must lie in (0, 1)");
    }
    if (style == CiStyle::bootstrap) {
        if (rng == nullptr) {
            throw ArgumentError("bootstrap interval needs a random generator");
        }
        std::vector<std::uint8_t> indicators(static_cast<std::size_t>(report.n), 0);
        std::fill_n(indicators.begin(), report.r_n, std::uint8_t{1});
        return bootstrap_ci(indicators, report.k, level, options, *rng, report.model);
    }
    if (report.boundary || !report.var_hat) {
        throw BoundaryError("delta-method interval is unavailable at r_n = " +
                            std::to_string(report.r_n) + " of n = " + std::to_string(report.n) +
                            "; use the bootstrap style");
    }
    const double centre = style == CiStyle::delta ? report.theta_hat : report.theta_bc;
    const double half = math::z_critical(level) * std::sqrt(*report.var_hat);
    return {clamp01(centre - half), clamp01(centre + half), half == 0.0};
}

double h_map(double theta, const MisrankingModel& model, int k) {
    require_theta(theta);
    if (const auto* tau = std::get_if<TauModel>(&model)) {
        const double t2 = tau->tau * tau->tau;
        return t2 * math::max_exceed_prob(theta, k) + (1.0 - t2) * theta;
    }
    const auto& nu = as_matrix(model)->nu;
    double total = 0.0;
    for (int r = 1; r <= k; ++r) {
        const double w = nu[static_cast<std::size_t>(r - 1)][static_cast<std::size_t>(k - 1)];
        if (w != 0.0) {
            total += w * math::order_stat_exceed(r, k, theta);
        }
    }
    return total;
}

double h_map_slope(double theta, const MisrankingModel& model, int k) {
    require_theta(theta);
    if (const auto* tau = std::get_if<TauModel>(&model)) {
        const double t2 = tau->tau * tau->tau;
        return t2 * k * std::pow(1.0 - theta, k - 1.0) + (1.0 - t2);
    }
    const auto& nu = as_matrix(model)->nu;
    double total = 0.0;
    for (int r = 1; r <= k; ++r) {
        const double w = nu[static_cast<std::size_t>(r - 1)][static_cast<std::size_t>(k - 1)];
        if (w != 0.0) {
            total += w * math::order_stat_exceed_slope(r, k, theta);
        }
    }
    return total;
}

double h_map_curvature(double theta, const MisrankingModel& model, int k) {
    require_theta(theta);
    if (const auto* tau = std::get_if<TauModel>(&model)) {
        if (k < 2) {
            return 0.0;
        }
        const double t2 = tau->tau * tau->tau;
        return -t2 * k * (k - 1.0) * std::pow(1.0 - theta, k - 2.0);
    }
    const auto& nu = as_matrix(model)->nu;
    double total = 0.0;
    for (int r = 1; r <= k; ++r) {
        const double w = nu[static_cast<std::size_t>(r - 1)][static_cast<std::size_t>(k - 1)];
        if (w != 0.0) {
            total += w * math::order_stat_exceed_curvature(r, k, theta);
        }
    }
    return total;
}

EstimateReport estimate_imperfect(int r_n, int n, int k, const MisrankingModel& model) {
    require_counts(r_n, n, k);
    validate_model(model, k);
    require_increasing(model, k);

    EstimateReport report;
    report.n = n;
    report.k = k;
    report.r_n = r_n;
    report.model = model;
    if (const auto* tau = std::get_if<TauModel>(&model)) {
        report.method = "dust_mns_tau";
        report.tau = tau->tau;
    } else {
        report.method = "dust_mns_matrix";
    }
    const double x = static_cast<double>(r_n) / n;
    const double lo = h_map(0.0, model, k);
    const double hi = h_map(1.0, model, k);
    if (x < lo || x > hi) {
        throw CalibrationError("r_n/n = " + std::to_string(x) + " lies outside the range [" +
                               std::to_string(lo) + ", " + std::to_string(hi) + "] of the model");
    }
    report.theta_hat = invert_h(x, model, k);
    if (r_n == 0 || r_n == n) {
        report.boundary = true;
        report.theta_bc = report.theta_hat;
        report.flags.emplace_back("boundary");
        return report;
    }
    const double slope = h_map_slope(report.theta_hat, model, k);
    if (!(slope > 0.0)) {
        throw SingularityError("nominee exceedance map has zero slope at the estimate");
    }
    const double q_var = x * (1.0 - x) / n;
    report.var_hat = q_var / (slope * slope);
    report.bias_hat =
        -h_map_curvature(report.theta_hat, model, k) / (2.0 * slope * slope * slope) * q_var;
    set_clamped_bc(report, report.theta_hat - *report.bias_hat);
    attach_default_interval(report, CiStyle::delta_bias_corrected);
    return report;
}

std::string to_string(CiStyle style) {
    switch (style) {
        case CiStyle::delta:
            return "delta";
        case CiStyle::delta_bias_corrected:
            return "delta_bias_corrected";
        case CiStyle::bootstrap:
            return "bootstrap";
    }
    return "unknown";
}

CiStyle parse_ci_style(const std::string& text) {
    if (text == "delta") {
        return CiStyle::delta;
    }
    if (text == "delta_bias_corrected") {
        return CiStyle::delta_bias_corrected;
    }
    if (text == "bootstrap") {
        return CiStyle::bootstrap;
    }
    throw ArgumentError("unknown interval style '" + text +
                        "' (expected delta, delta_bias_corrected or bootstrap)");
}

}  // namespace dustmns
