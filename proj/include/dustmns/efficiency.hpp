#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dustmns {

/// phi_k(u) = sum_{j=0}^{k-1} u^(-j).
[[nodiscard]] double phi_k(double u, int k);

/// Critical exceedance level theta*(k) = 1 - u*, where phi_k(u*) = k^2.
///
/// @throws DomainError for k < 2.
[[nodiscard]] double theta_star(int k);

/// Variance-reduction fraction of DUST-MNS over DUST-SRS,
/// 1 - (1/k^2) sum_{j=0}^{k-1} (1-theta)^(-j). Limits are returned at theta in {0, 1}.
[[nodiscard]] double delta_theta(double theta, int k);

/// k^2 theta (1-theta)^(k-1) / (1 - (1-theta)^k); free of n.
[[nodiscard]] double re_mns_vs_dustsrs(double theta, int k);

/// 1 + (n - 1) eta0^mean_lag.
[[nodiscard]] double lambda_bound(double eta0, int n, double mean_lag);

/// 1 + (n - 1) E[eta0^L] for a discrete lag distribution.
[[nodiscard]] double lambda_exact(double eta0, int n, std::span<const double> lags,
                                  std::span<const double> probs);

/// RE when p_i ~ Beta(alpha, beta), i.e. theta = 1 - I_c(alpha, beta).
[[nodiscard]] double beta_model_re(double c, double alpha, double beta, int k);

struct EfficiencyPoint {
    double theta = 0.0;
    int k = 1;
    double re_mns_vs_dustsrs = 1.0;
    double delta = 0.0;
    bool dominated = false;  ///< theta > theta*(k)
};

[[nodiscard]] EfficiencyPoint efficiency_point(double theta, int k);

struct LambdaBoundPoint {
    double eta0 = 0.0;
    int n = 1;
    double mean_lag = 1.0;
    double bound = 1.0;
};

enum class TableKind { lambda, re, theta_star, exact_bias };

[[nodiscard]] TableKind parse_table_kind(const std::string& text);
[[nodiscard]] std::string to_string(TableKind kind);

/// Grid axes; each table reads the axes it needs.
struct TableGrid {
    std::vector<int> ks;
    std::vector<double> thetas;
    std::vector<int> ns;
    std::vector<double> eta0s;
    std::vector<std::pair<double, int>> lag_n_pairs;  ///< (mean_lag, n)
};

/// The grid of the corresponding published table.
[[nodiscard]] TableGrid default_grid(TableKind kind);

/// Formatted table; numbers are rounded half-to-even to the published precision.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// @throws ArgumentError if an axis the table needs is empty.
[[nodiscard]] Table make_table(TableKind kind, const TableGrid& grid);

/// Decimal places used when formatting the given table.
[[nodiscard]] int table_precision(TableKind kind);

/// value rounded half-to-even at the given number of decimals, fixed notation.
[[nodiscard]] std::string format_half_even(double value, int decimals);

void write_table_csv(const Table& table, std::ostream& out);

struct KAdvice {
    int k = 2;
    bool feasible = false;
    double theta_star = 0.0;
    double re = 1.0;
    double leading_bias = 0.0;
    std::optional<double> lambda_bound;
};

struct Advice {
    std::vector<KAdvice> candidates;  ///< feasible first, each group by RE descending
    std::size_t feasible_count = 0;
    std::string explanation;
};

/// Ranks set sizes for a prior guess of theta. The Lambda bound is attached when both
/// eta0 and mean_lag are given.
///
/// @throws ArgumentError for theta_prior outside (0, 1), k < 2 or n < 1.
[[nodiscard]] Advice advise_k(double theta_prior, std::span<const int> k_candidates, int n,
                              std::optional<double> eta0 = std::nullopt,
                              std::optional<double> mean_lag = std::nullopt);

}  // namespace dustmns
