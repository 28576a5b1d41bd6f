#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dustmns/sampler.hpp"

namespace dustmns {

/// Kendall's tau working model: q^e = tau^2 q_k + (1 - tau^2) theta.
struct TauModel {
    double tau = 1.0;
};

/// Misranking matrix: nu[r][s] = Pr(judged rank s+1 is truly rank r+1). Must be doubly
/// stochastic. Only the last column (the judged maximum) enters the estimator.
struct MatrixModel {
    std::vector<std::vector<double>> nu;
};

using MisrankingModel = std::variant<TauModel, MatrixModel>;

/// @throws ModelError if the model is malformed for set size k.
void validate_model(const MisrankingModel& model, int k);

struct EstimateReport {
    std::string method;
    double theta_hat = 0.0;
    double theta_bc = 0.0;                      ///< clamped to [0, 1]
    std::optional<double> theta_bc_unclamped;   ///< set only when clamping changed the value
    std::optional<double> bias_hat;             ///< unavailable at the boundary
    std::optional<double> var_hat;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    std::string ci_method;
    bool fpc_applied = false;
    bool boundary = false;  ///< r_n in {0, n}: delta-method quantities are singular
    int n = 0;
    int k = 1;
    int r_n = 0;
    std::optional<double> tau;
    std::optional<MisrankingModel> model;
    std::vector<std::string> flags;
};

/// Sample mean of the indicators. Variance is the iid term unless lag_sum is given.
/// fpc_fraction is the sampling fraction f = n/N.
///
/// @throws ArgumentError on empty input.
[[nodiscard]] EstimateReport estimate_srs(std::span<const std::uint8_t> indicators,
                                          std::optional<double> lag_sum = std::nullopt,
                                          std::optional<double> fpc_fraction = std::nullopt,
                                          std::string method = "srs");

/// theta(1-theta)/n + theta(1-theta) lag_sum / n^2, times (1 - f) when fpc_fraction is set.
[[nodiscard]] double var_srs_spatial(double theta, int n, double lag_sum,
                                     std::optional<double> fpc_fraction = std::nullopt);

/// Sum over ordered pairs i != j of eta0^l_ij for the given sample (unreachable pairs add 0).
[[nodiscard]] double realized_lag_sum(const ArealFrame& frame,
                                      std::span<const std::size_t> sample, double eta0);

/// Calibrated estimator g_k(r_n/n) with plug-in bias, delta variance and a bias-corrected
/// interval at the 95% level.
[[nodiscard]] EstimateReport estimate_dust_mns(int r_n, int n, int k);

/// The bias-corrected value reported by estimate_dust_mns, clamped to [0, 1].
[[nodiscard]] double bias_corrected_estimate(int r_n, int n, int k);

/// E[g_k(R/n)] - theta with R ~ Binomial(n, q_k(theta)), by exact summation.
[[nodiscard]] double exact_bias(int n, int k, double theta);

/// E[bias_corrected_estimate(R, n, k)] - theta, by exact summation.
[[nodiscard]] double exact_bias_corrected(int n, int k, double theta);

/// O(1/n) bias term (k-1)/(2k^2 n) (1-q)^(1/k-2) q (1-q), q = q_k(theta).
///
/// @throws SingularityError at theta = 1 when k > 1.
[[nodiscard]] double leading_bias(int n, int k, double theta);

struct VarianceValue {
    double value = 0.0;
    bool boundary = false;
};

/// [1 - (1-theta)^k] (1-theta)^(2-k) / (k^2 n); 0 with the boundary flag at theta in {0, 1}.
[[nodiscard]] VarianceValue var_dust_mns(double theta, int n, int k);

enum class CiStyle { delta, delta_bias_corrected, bootstrap };

struct Interval {
    double low = 0.0;
    double high = 0.0;
    bool degenerate = false;
};

struct BootstrapOptions {
    std::size_t resamples = 2000;
};

/// Percentile bootstrap over the set-level indicators. Each resample b draws from its
/// own generator seeded from (one value taken from rng, b), so the result does not
/// depend on evaluation order. model, when given, replaces g_k by the calibrated inverse.
///
/// @throws ArgumentError if resamples < 100 or indicators is empty.
[[nodiscard]] Interval bootstrap_ci(std::span<const std::uint8_t> indicators, int k, double level,
                                    const BootstrapOptions& options, Rng& rng,
                                    const std::optional<MisrankingModel>& model = std::nullopt);

/// Delta styles use var_hat from the report: "delta" is centred on theta_hat,
/// "delta_bias_corrected" on theta_bc. The bootstrap style rebuilds the indicator vector
/// from (r_n, n) and needs rng.
///
/// @throws BoundaryError for a delta style when the report is at the boundary.
[[nodiscard]] Interval confidence_interval(const EstimateReport& report, double level,
                                           CiStyle style, Rng* rng = nullptr,
                                           const BootstrapOptions& options = {});

/// Expected nominee exceedance probability under the model.
[[nodiscard]] double h_map(double theta, const MisrankingModel& model, int k);
[[nodiscard]] double h_map_slope(double theta, const MisrankingModel& model, int k);
[[nodiscard]] double h_map_curvature(double theta, const MisrankingModel& model, int k);

/// Solves h(theta) = r_n/n. Variance by the delta method with the analytic slope; bias by
/// the second-order term -h''/(2 h'^3) q(1-q)/n, which reduces to leading_bias when the
/// ranking is perfect.
///
/// @throws ModelError if h is not increasing on [0, 1].
/// @throws CalibrationError if r_n/n lies outside the range of h.
[[nodiscard]] EstimateReport estimate_imperfect(int r_n, int n, int k,
                                                const MisrankingModel& model);

[[nodiscard]] std::string to_string(CiStyle style);
[[nodiscard]] CiStyle parse_ci_style(const std::string& text);

}  // namespace dustmns
