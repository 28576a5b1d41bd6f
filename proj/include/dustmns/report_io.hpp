#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "dustmns/efficiency.hpp"
#include "dustmns/estimators.hpp"
#include "dustmns/frame.hpp"
#include "dustmns/montecarlo.hpp"

namespace dustmns {

/// Flat document with exactly the keys theta_hat, theta_bc, bias_hat, var_hat, ci_low,
/// ci_high, method, n, k, r_n, tau. Unavailable values are null.
[[nodiscard]] nlohmann::json estimate_json(const EstimateReport& report);

/// ci_method, flags, boundary, fpc_applied, the pre-clamp theta_bc and the model.
[[nodiscard]] nlohmann::json estimate_details_json(const EstimateReport& report);

/// n_units, threshold_c, census_theta, morans_i, kendall_tau, mean_lag; an unavailable
/// diagnostic is null and its reason is stored under "<key>_reason".
[[nodiscard]] nlohmann::json diagnostics_json(const FrameDiagnostics& diag);

[[nodiscard]] nlohmann::json mc_config_json(const McConfig& config);
[[nodiscard]] nlohmann::json study_json(const McResult& result);
[[nodiscard]] nlohmann::json advice_json(const Advice& advice);

/// Writes text with LF line endings, creating parent directories.
///
/// @throws IoError when the file cannot be written.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dustmns
