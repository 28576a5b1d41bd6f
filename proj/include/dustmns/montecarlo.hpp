#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dustmns/design.hpp"
#include "dustmns/frame.hpp"
#include "dustmns/sampler.hpp"

namespace dustmns {

enum class McDesign { srs, dust_srs, dust_mns_perfect, dust_mns_imperfect };

[[nodiscard]] std::string to_string(McDesign design);
[[nodiscard]] McDesign parse_mc_design(const std::string& text);

struct ThresholdRule {
    enum class Kind { quantile, fixed };
    Kind kind = Kind::quantile;
    double value = 0.9;  ///< quantile level or the threshold itself
};

struct McConfig {
    int n = 20;
    int k = 3;
    /// Within-unit measurement. With kind == fraction and target_mean_m set, f_m is
    /// replaced by target_mean_m / mean(N_i).
    MeasurementSpec measurement;
    std::optional<double> target_mean_m;
    double eta0 = 0.0;
    std::optional<Lag> max_lag = Lag{10};
    SizeField size_field = SizeField::size_measure;
    std::size_t replicates = 1000;
    ThresholdRule threshold;
    std::vector<McDesign> designs = {McDesign::srs, McDesign::dust_srs,
                                     McDesign::dust_mns_perfect, McDesign::dust_mns_imperfect};
    std::uint64_t master_seed = 1;
    /// When set, the imperfect design is estimated through the tau working model;
    /// otherwise it uses the perfect-ranking calibration g_k.
    std::optional<double> calibration_tau;
    unsigned workers = 1;
    bool keep_estimates = false;
};

struct ReplicateOutcome {
    double theta_hat = 0.0;
    int r_n = 0;
};

struct McDesignResult {
    McDesign design = McDesign::srs;
    std::size_t replicates = 0;
    double mse = 0.0;
    std::optional<double> mse_se;  ///< jackknife; needs at least two replicates
    double bias = 0.0;
    double var = 0.0;  ///< divisor B, so mse = bias^2 + var
    std::optional<double> re_vs_dust_srs;
    double mean_exceed_rate = 0.0;  ///< mean of r_n / n
    std::optional<double> exceed_rate_se;
    std::vector<double> estimates;  ///< filled when keep_estimates is set
};

struct McResult {
    McConfig config;
    double threshold_c = 0.0;
    double theta_n = 0.0;  ///< finite-population target from latent p
    double f_m = 1.0;      ///< measurement fraction actually used
    std::size_t n_units = 0;
    std::vector<McDesignResult> designs;
};

/// Precomputed state for repeated replicates on one frame.
class McStudy {
public:
    /// @throws ArgumentError or DataError if the configuration does not fit the frame.
    McStudy(const ArealFrame& frame, McConfig config);

    [[nodiscard]] const McConfig& config() const noexcept { return config_; }
    [[nodiscard]] double threshold_c() const noexcept { return threshold_c_; }
    [[nodiscard]] double theta_n() const noexcept { return theta_n_; }
    [[nodiscard]] double f_m() const noexcept { return f_m_; }

    /// One survey and its estimate. The generator is derived from
    /// (master_seed, design, replicate_index) only.
    [[nodiscard]] ReplicateOutcome replicate(McDesign design, std::uint64_t replicate_index) const;

    [[nodiscard]] McResult run() const;

private:
    [[nodiscard]] const SurveyDesign& survey(McDesign design) const;

    const ArealFrame* frame_;
    McConfig config_;
    double threshold_c_ = 0.0;
    double theta_n_ = 0.0;
    double f_m_ = 1.0;
    std::vector<std::optional<SurveyDesign>> surveys_;  // indexed by McDesign
};

[[nodiscard]] ReplicateOutcome run_replicate(const ArealFrame& frame, const McConfig& config,
                                             McDesign design, std::uint64_t replicate_index);

[[nodiscard]] McResult run_study(const ArealFrame& frame, const McConfig& config);

/// Threshold for a frame under a rule (quantile of latent p, or the fixed value).
[[nodiscard]] double resolve_threshold(const ArealFrame& frame, const ThresholdRule& rule);

/// Jackknife standard error of the mean of values; nullopt for fewer than two values.
[[nodiscard]] std::optional<double> jackknife_se_of_mean(const std::vector<double>& values);

struct SynthSpec {
    int rows = 50;
    int cols = 50;
    double beta_alpha = 2.0;
    double beta_beta = 18.0;
    double spatial_mix = 0.0;  ///< weight of the neighbor average, in [0, 1)
    double aux_tau = 0.75;     ///< target Kendall tau between aux and p
    double size_median = 20000.0;
    double size_sigma = 0.0;  ///< log-scale spread of the sizes; 0 gives equal sizes
    std::uint64_t seed = 1;
};

/// Rook lattice with Beta-marginal latent prevalences. A standard normal field is mixed
/// with its neighbor average, then mapped to Beta(alpha, beta) through its ranks; aux is a
/// Gaussian-copula copy of p with the requested Kendall tau.
///
/// @throws ArgumentError for grids smaller than 2 x 2 or out-of-range parameters.
[[nodiscard]] ArealFrame synth_frame(const SynthSpec& spec);

/// design,n,k,f_m,eta0,mse,mse_se,bias,var,re_vs_dust_srs
void write_study_csv(const McResult& result, std::ostream& out);

}  // namespace dustmns
