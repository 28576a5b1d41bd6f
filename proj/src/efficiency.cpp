#include "dustmns/efficiency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "dustmns/errors.hpp"
#include "dustmns/estimators.hpp"
#include "dustmns/mathkit.hpp"

namespace dustmns {

namespace {

void require_open_theta(double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw DomainError("theta must lie in [0, 1], got " + std::to_string(theta));
    }
}

void require_k(int k, int min_k) {
    if (k < min_k) {
        throw DomainError("set size k must be >= " + std::to_string(min_k) + ", got " +
                          std::to_string(k));
    }
}

std::string grid_value(double v) { return fmt::format("{}", v); }

}  // namespace

double phi_k(double u, int k) {
    require_k(k, 1);
    if (!(u > 0.0)) {
        throw DomainError("phi_k needs u > 0");
    }
    double total = 0.0;
    double term = 1.0;
    for (int j = 0; j < k; ++j) {
        total += term;
        term /= u;
    }
    return total;
}

double theta_star(int k) {
    require_k(k, 2);
    const double target = static_cast<double>(k) * k;
    const double u = math::solve_root([&](double v) { return phi_k(v, k) - target; },
                                      {.lower = 1e-12,
                                       .upper = 1.0 - 1e-12,
                                       .abs_tol = 1e-15,
                                       .max_iter = 500});
    return 1.0 - u;
}

double delta_theta(double theta, int k) {
    require_open_theta(theta);
    require_k(k, 1);
    if (k == 1) {
        return 0.0;
    }
    if (theta == 1.0) {
        return -std::numeric_limits<double>::infinity();
    }
    return 1.0 - phi_k(1.0 - theta, k) / (static_cast<double>(k) * k);
}

double re_mns_vs_dustsrs(double theta, int k) {
    require_open_theta(theta);
    require_k(k, 1);
    if (theta == 0.0) {
        return k;
    }
    if (theta == 1.0) {
        return k == 1 ? 1.0 : 0.0;
    }
    const double q = math::max_exceed_prob(theta, k);
    return static_cast<double>(k) * k * theta * std::pow(1.0 - theta, k - 1.0) / q;
}

double lambda_bound(double eta0, int n, double mean_lag) {
    if (!(eta0 >= 0.0 && eta0 < 1.0)) {
        throw DomainError("eta0 must lie in [0, 1)");
    }
    if (n < 1) {
        throw DomainError("n must be >= 1");
    }
    if (!(mean_lag > 0.0)) {
        throw DomainError("mean lag must be positive");
    }
    return 1.0 + (n - 1.0) * std::pow(eta0, mean_lag);
}

double lambda_exact(double eta0, int n, std::span<const double> lags,
                    std::span<const double> probs) {
    if (lags.empty() || lags.size() != probs.size()) {
        throw ArgumentError("lag distribution needs matching nonempty support and masses");
    }
    double mass = 0.0;
    double expect = 0.0;
    for (std::size_t i = 0; i < lags.size(); ++i) {
        if (!(probs[i] >= 0.0) || !(lags[i] > 0.0)) {
            throw ArgumentError("lag masses must be nonnegative and lags positive");
        }
        mass += probs[i];
        expect += probs[i] * std::pow(eta0, lags[i]);
    }
    if (std::fabs(mass - 1.0) > 1e-10) {
        throw ArgumentError("lag masses must sum to 1");
    }
    if (!(eta0 >= 0.0 && eta0 < 1.0) || n < 1) {
        throw DomainError("lambda_exact needs eta0 in [0, 1) and n >= 1");
    }
    return 1.0 + (n - 1.0) * expect;
}

double beta_model_re(double c, double alpha, double beta, int k) {
    if (!(c > 0.0 && c < 1.0)) {
        throw DomainError("threshold c must lie in (0, 1)");
    }
    require_k(k, 1);
    const double i_c = math::reg_inc_beta(c, alpha, beta);
    if (i_c == 1.0) {
        return k;
    }
    if (i_c == 0.0) {
        return k == 1 ? 1.0 : 0.0;
    }
    const double kk = static_cast<double>(k) * k;
    return kk * (1.0 - i_c) * std::pow(i_c, k - 1.0) / -std::expm1(k * std::log(i_c));
}

EfficiencyPoint efficiency_point(double theta, int k) {
    EfficiencyPoint p;
    p.theta = theta;
    p.k = k;
    p.re_mns_vs_dustsrs = re_mns_vs_dustsrs(theta, k);
    p.delta = delta_theta(theta, k);
    p.dominated = k >= 2 && theta > theta_star(k);
    return p;
}

TableKind parse_table_kind(const std::string& text) {
    if (text == "lambda") {
        return TableKind::lambda;
    }
    if (text == "re") {
        return TableKind::re;
    }
    if (text == "theta_star") {
        return TableKind::theta_star;
    }
    if (text == "bias" || text == "exact_bias") {
        return TableKind::exact_bias;
    }
    throw ArgumentError("unknown table '" + text + "' (expected lambda, re, theta_star or bias)");
}

std::string to_string(TableKind kind) {
    switch (kind) {
        case TableKind::lambda:
            return "lambda";
        case TableKind::re:
            return "re";
        case TableKind::theta_star:
            return "theta_star";
        case TableKind::exact_bias:
            return "bias";
    }
    return "unknown";
}

TableGrid default_grid(TableKind kind) {
    TableGrid g;
    switch (kind) {
        case TableKind::lambda:
            g.eta0s = {0.2, 0.5, 0.8};
            g.lag_n_pairs = {{1.6, 10}, {2.4, 20}};
            break;
        case TableKind::re:
            g.thetas = {0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.34, 0.35, 0.40, 0.42};
            g.ks = {2, 3, 4, 5, 6, 10};
            break;
        case TableKind::theta_star:
            g.ks = {2, 3, 4, 5, 6, 7, 8, 10};
            break;
        case TableKind::exact_bias:
            g.thetas = {0.10, 0.20, 0.30, 0.40};
            g.ns = {10, 20};
            g.ks = {2, 3, 4, 5};
            break;
    }
    return g;
}

int table_precision(TableKind kind) {
    return kind == TableKind::theta_star || kind == TableKind::exact_bias ? 4 : 3;
}

std::string format_half_even(double value, int decimals) {
    if (!std::isfinite(value)) {
        return fmt::format("{}", value);
    }
    const double scale = std::pow(10.0, decimals);
    // nearbyint honours the default round-to-nearest-even mode.
    const double rounded = std::nearbyint(value * scale) / scale;
    return fmt::format("{:.{}f}", rounded == 0.0 ? 0.0 : rounded, decimals);
}

Table make_table(TableKind kind, const TableGrid& grid) {
    const int digits = table_precision(kind);
    Table t;
    const auto need = [](bool empty, const char* axis) {
        if (empty) {
            throw ArgumentError(std::string("table grid needs a nonempty '") + axis + "' axis");
        }
    };
    switch (kind) {
        case TableKind::lambda:
            need(grid.eta0s.empty(), "eta0");
            need(grid.lag_n_pairs.empty(), "mean_lag/n");
            t.header = {"mean_lag", "n", "eta0", "bound"};
            for (const auto& [lbar, n] : grid.lag_n_pairs) {
                for (const double eta0 : grid.eta0s) {
                    t.rows.push_back({grid_value(lbar), std::to_string(n), grid_value(eta0),
                                      format_half_even(lambda_bound(eta0, n, lbar), digits)});
                }
            }
            break;
        case TableKind::re:
            need(grid.thetas.empty(), "theta");
            need(grid.ks.empty(), "k");
            t.header = {"theta", "k", "re", "flag"};
            for (const double theta : grid.thetas) {
                for (const int k : grid.ks) {
                    const auto p = efficiency_point(theta, k);
                    t.rows.push_back({grid_value(theta), std::to_string(k),
                                      format_half_even(p.re_mns_vs_dustsrs, digits),
                                      p.dominated ? "dagger" : ""});
                }
            }
            break;
        case TableKind::theta_star:
            need(grid.ks.empty(), "k");
            t.header = {"k", "theta_star"};
            for (const int k : grid.ks) {
                t.rows.push_back({std::to_string(k), format_half_even(theta_star(k), digits)});
            }
            break;
        case TableKind::exact_bias:
            need(grid.thetas.empty(), "theta");
            need(grid.ns.empty(), "n");
            need(grid.ks.empty(), "k");
            t.header = {"theta", "n", "k", "bias"};
            for (const double theta : grid.thetas) {
                for (const int n : grid.ns) {
                    for (const int k : grid.ks) {
                        t.rows.push_back({grid_value(theta), std::to_string(n), std::to_string(k),
                                          format_half_even(exact_bias(n, k, theta), digits)});
                    }
                }
            }
            break;
    }
    return t;
}

void write_table_csv(const Table& table, std::ostream& out) {
    const auto line = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            out << (i ? "," : "") << cells[i];
        }
        out << '\n';
    };
    line(table.header);
    for (const auto& row : table.rows) {
        line(row);
    }
}

Advice advise_k(double theta_prior, std::span<const int> k_candidates, int n,
                std::optional<double> eta0, std::optional<double> mean_lag) {
    if (!(theta_prior > 0.0 && theta_prior < 1.0)) {
        throw ArgumentError("prior theta must lie in (0, 1)");
    }
    if (n < 1) {
        throw ArgumentError("n must be >= 1");
    }
    if (k_candidates.empty()) {
        throw ArgumentError("advice needs at least one candidate k");
    }
    Advice advice;
    for (const int k : k_candidates) {
        if (k < 2) {
            throw ArgumentError("candidate set sizes must be >= 2");
        }
        KAdvice a;
        a.k = k;
        a.theta_star = theta_star(k);
        a.feasible = theta_prior < a.theta_star;
        a.re = re_mns_vs_dustsrs(theta_prior, k);
        a.leading_bias = leading_bias(n, k, theta_prior);
        if (eta0 && mean_lag) {
            a.lambda_bound = lambda_bound(*eta0, n, *mean_lag);
        }
        advice.feasible_count += a.feasible ? 1 : 0;
        advice.candidates.push_back(a);
    }
    std::stable_sort(advice.candidates.begin(), advice.candidates.end(),
                     [](const KAdvice& a, const KAdvice& b) {
                         if (a.feasible != b.feasible) {
                             return a.feasible;
                         }
                         return a.re > b.re;
                     });
    if (advice.feasible_count == 0) {
        const auto& best = *std::max_element(
            advice.candidates.begin(), advice.candidates.end(),
            [](const KAdvice& a, const KAdvice& b) { return a.theta_star < b.theta_star; });
        advice.explanation = fmt::format(
            "no candidate is feasible: theta = {} is at or above theta*(k) for every k "
            "(largest threshold {:.4f} at k = {}); DUST-SRS is at least as efficient",
            theta_prior, best.theta_star, best.k);
    } else {
        advice.explanation =
            fmt::format("{} of {} candidates have theta below theta*(k)", advice.feasible_count,
                        advice.candidates.size());
    }
    return advice;
}

}  // namespace dustmns
