#include "dustmns/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <numeric>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "dustmns/errors.hpp"
#include "dustmns/estimators.hpp"
#include "dustmns/mathkit.hpp"

namespace dustmns {

namespace {

constexpr std::size_t kDesignCount = 4;

std::size_t slot(McDesign d) { return static_cast<std::size_t>(d); }

std::uint64_t stream_of(McDesign d) { return 0x6d63000000000000ULL + slot(d) + 1; }

DesignConfig design_config(McDesign design, const McConfig& config, double c, double f_m) {
    DesignConfig dc;
    dc.n = static_cast<std::size_t>(config.n);
    dc.k = static_cast<std::size_t>(config.k);
    dc.dust = DustParams{config.eta0, config.size_field, config.max_lag};
    dc.measurement = config.measurement;
    if (dc.measurement.kind == MeasurementSpec::Kind::fraction) {
        dc.measurement.f_m = f_m;
    }
    dc.threshold_c = c;
    switch (design) {
        case McDesign::srs:
            dc.kind = DesignKind::srs;
            break;
        case McDesign::dust_srs:
            dc.kind = DesignKind::dust_srs;
            break;
        case McDesign::dust_mns_perfect:
            dc.kind = DesignKind::dust_mns;
            dc.ranking = RankingMode::perfect;
            break;
        case McDesign::dust_mns_imperfect:
            dc.kind = DesignKind::dust_mns;
            dc.ranking = RankingMode::auxiliary;
            break;
    }
    return dc;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string csv_number(double v) { return fmt::format("{}", v); }

std::string csv_optional(const std::optional<double>& v) {
    return v ? csv_number(*v) : std::string();
}

}  // namespace

std::string to_string(McDesign design) {
    switch (design) {
        case McDesign::srs:
            return "srs";
        case McDesign::dust_srs:
            return "dust_srs";
        case McDesign::dust_mns_perfect:
            return "dust_mns_perfect";
        case McDesign::dust_mns_imperfect:
            return "dust_mns_imperfect";
    }
    return "unknown";
}

McDesign parse_mc_design(const std::string& text) {
    for (std::size_t i = 0; i < kDesignCount; ++i) {
        const auto d = static_cast<McDesign>(i);
        if (text == to_string(d)) {
            return d;
        }
    }
    throw ArgumentError("unknown design '" + text +
                        "' (expected srs, dust_srs, dust_mns_perfect or dust_mns_imperfect)");
}

double resolve_threshold(const ArealFrame& frame, const ThresholdRule& rule) {
    if (rule.kind == ThresholdRule::Kind::fixed) {
        if (!(rule.value >= 0.0 && rule.value <= 1.0)) {
            throw ArgumentError("fixed threshold must lie in [0, 1]");
        }
        return rule.value;
    }
    if (!(rule.value > 0.0 && rule.value < 1.0)) {
        throw ArgumentError("threshold quantile must lie in (0, 1)");
    }
    const auto p = frame.p_values();
    return empirical_quantile(p, rule.value);
}

std::optional<double> jackknife_se_of_mean(const std::vector<double>& values) {
    const auto b = values.size();
    if (b < 2) {
        return std::nullopt;
    }
    const double total = std::accumulate(values.begin(), values.end(), 0.0);
    const double bd = static_cast<double>(b);
    const double full = total / bd;
    double ss = 0.0;
    for (const double v : values) {
        const double loo = (total - v) / (bd - 1.0);
        ss += (loo - full) * (loo - full);
    }
    return std::sqrt((bd - 1.0) / bd * ss);
}

McStudy::McStudy(const ArealFrame& frame, McConfig config)
    : frame_(&frame), config_(std::move(config)), surveys_(kDesignCount) {
    if (config_.n < 1 || config_.k < 1) {
        throw ArgumentError("study needs n >= 1 and k >= 1");
    }
    if (config_.replicates < 1) {
        throw ArgumentError("study needs at least one replicate");
    }
    if (config_.designs.empty()) {
        throw ArgumentError("study needs at least one design");
    }
    if (!frame.has_p()) {
        throw DataError("simulation needs p for every unit");
    }
    if (config_.calibration_tau &&
        !(*config_.calibration_tau >= 0.0 && *config_.calibration_tau <= 1.0)) {
        throw ArgumentError("calibration tau must lie in [0, 1]");
    }
    if (config_.workers < 1) {
        config_.workers = 1;
    }
    threshold_c_ = resolve_threshold(frame, config_.threshold);
    theta_n_ = census_exceedance(frame.p_values(), threshold_c_);

    f_m_ = config_.measurement.f_m;
    if (config_.measurement.kind == MeasurementSpec::Kind::fraction && config_.target_mean_m) {
        double total = 0.0;
        for (const auto& u : frame.units()) {
            total += static_cast<double>(u.n_individuals);
        }
        const double mean_n = total / static_cast<double>(frame.size());
        f_m_ = *config_.target_mean_m / mean_n;
        if (!(f_m_ > 0.0 && f_m_ <= 1.0)) {
            throw ArgumentError(fmt::format(
                "target mean m = {} needs f_m = {} outside (0, 1] (mean N_i = {})",
                *config_.target_mean_m, f_m_, mean_n));
        }
    }

    std::vector<char> seen(kDesignCount, 0);
    for (const auto d : config_.designs) {
        if (seen[slot(d)]) {
            throw ArgumentError("design '" + to_string(d) + "' listed twice");
        }
        seen[slot(d)] = 1;
        surveys_[slot(d)].emplace(frame, design_config(d, config_, threshold_c_, f_m_));
    }
}

const SurveyDesign& McStudy::survey(McDesign design) const {
    const auto& s = surveys_[slot(design)];
    if (!s) {
        throw ArgumentError("design '" + to_string(design) + "' is not part of this study");
    }
    return *s;
}

ReplicateOutcome McStudy::replicate(McDesign design, std::uint64_t replicate_index) const {
    auto rng = make_rng(derive_seed(config_.master_seed, stream_of(design), replicate_index));
    const auto data = survey(design).run(rng);
    const int r_n = static_cast<int>(data.r_n);
    ReplicateOutcome out;
    out.r_n = r_n;
    switch (design) {
        case McDesign::srs:
        case McDesign::dust_srs:
            out.theta_hat = static_cast<double>(r_n) / config_.n;
            break;
        case McDesign::dust_mns_perfect:
            out.theta_hat = math::calibration_map(static_cast<double>(r_n) / config_.n, config_.k);
            break;
        case McDesign::dust_mns_imperfect:
            if (config_.calibration_tau) {
                out.theta_hat =
                    estimate_imperfect(r_n, config_.n, config_.k, TauModel{*config_.calibration_tau})
                        .theta_hat;
            } else {
                out.theta_hat =
                    math::calibration_map(static_cast<double>(r_n) / config_.n, config_.k);
            }
            break;
    }
    return out;
}

McResult McStudy::run() const {
    McResult result;
    result.config = config_;
    result.threshold_c = threshold_c_;
    result.theta_n = theta_n_;
    result.f_m = f_m_;
    result.n_units = frame_->size();

    const auto b = config_.replicates;
    const auto workers = static_cast<std::size_t>(std::min<std::size_t>(config_.workers, b));
    std::vector<ReplicateOutcome> outcomes(b);
    for (const auto design : config_.designs) {
        // Each replicate owns its generator, so the split across workers cannot change results.
        if (workers <= 1) {
            for (std::size_t i = 0; i < b; ++i) {
                outcomes[i] = replicate(design, i);
            }
        } else {
            std::vector<std::exception_ptr> errors(workers);
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        for (std::size_t i = w; i < b; i += workers) {
                            outcomes[i] = replicate(design, i);
                        }
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
            for (auto& t : pool) {
                t.join();
            }
            for (const auto& e : errors) {
                if (e) {
                    std::rethrow_exception(e);
                }
            }
        }

        McDesignResult r;
        r.design = design;
        r.replicates = b;
        std::vector<double> est(b);
        std::vector<double> sq(b);
        std::vector<double> rate(b);
        for (std::size_t i = 0; i < b; ++i) {
            est[i] = outcomes[i].theta_hat;
            const double e = est[i] - theta_n_;
            sq[i] = e * e;
            rate[i] = static_cast<double>(outcomes[i].r_n) / config_.n;
        }
        const double mean_est = mean_of(est);
        r.mse = mean_of(sq);
        r.mse_se = jackknife_se_of_mean(sq);
        r.bias = mean_est - theta_n_;
        double v = 0.0;
        for (const double x : est) {
            v += (x - mean_est) * (x - mean_est);
        }
        r.var = v / static_cast<double>(b);
        r.mean_exceed_rate = mean_of(rate);
        r.exceed_rate_se = jackknife_se_of_mean(rate);
        if (config_.keep_estimates) {
            r.estimates = std::move(est);
        }
        result.designs.push_back(std::move(r));
    }

    const auto ref = std::find_if(result.designs.begin(), result.designs.end(),
                                  [](const McDesignResult& r) { return r.design == McDesign::dust_srs; });
    if (ref != result.designs.end()) {
        const double ref_mse = ref->mse;
        for (auto& r : result.designs) {
            if (r.mse > 0.0) {
                r.re_vs_dust_srs = ref_mse / r.mse;
            }
        }
    }
    return result;
}

ReplicateOutcome run_replicate(const ArealFrame& frame, const McConfig& config, McDesign design,
                               std::uint64_t replicate_index) {
    McConfig one = config;
    one.designs = {design};
    return McStudy(frame, std::move(one)).replicate(design, replicate_index);
}

McResult run_study(const ArealFrame& frame, const McConfig& config) {
    return McStudy(frame, config).run();
}

ArealFrame synth_frame(const SynthSpec& spec) {
    if (spec.rows < 2 || spec.cols < 2) {
        throw ArgumentError("synthetic lattice needs at least 2 x 2 cells");
    }
    if (!(spec.beta_alpha > 0.0 && spec.beta_beta > 0.0)) {
        throw ArgumentError("Beta shapes must be positive");
    }
    if (!(spec.spatial_mix >= 0.0 && spec.spatial_mix < 1.0)) {
        throw ArgumentError("spatial_mix must lie in [0, 1)");
    }
    if (!(spec.aux_tau >= -1.0 && spec.aux_tau <= 1.0)) {
        throw ArgumentError("aux_tau must lie in [-1, 1]");
    }
    if (!(spec.size_median > 0.0 && spec.size_sigma >= 0.0)) {
        throw ArgumentError("size median must be positive and size sigma nonnegative");
    }
    const auto rows = static_cast<std::size_t>(spec.rows);
    const auto cols = static_cast<std::size_t>(spec.cols);
    const auto n = rows * cols;

    std::vector<ArealFrame::Edge> edges;
    edges.reserve(2 * n);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const auto i = r * cols + c;
            if (c + 1 < cols) {
                edges.emplace_back(i, i + 1);
            }
            if (r + 1 < rows) {
                edges.emplace_back(i, i + cols);
            }
        }
    }
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (const auto& [a, b] : edges) {
        nbrs[a].push_back(b);
        nbrs[b].push_back(a);
    }

    auto rng = make_rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> z(n);
    std::vector<double> noise(n);
    std::vector<double> log_size(n);
    for (auto& v : z) {
        v = normal(rng);
    }
    for (auto& v : noise) {
        v = normal(rng);
    }
    for (auto& v : log_size) {
        v = normal(rng);
    }

    std::vector<double> field(n);
    for (std::size_t i = 0; i < n; ++i) {
        double avg = 0.0;
        for (const auto j : nbrs[i]) {
            avg += z[j];
        }
        avg /= static_cast<double>(nbrs[i].size());
        field[i] = (1.0 - spec.spatial_mix) * z[i] + spec.spatial_mix * avg;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return field[a] < field[b]; });

    const double rho = std::sin(std::numbers::pi * spec.aux_tau / 2.0);
    const double rho_c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    std::vector<ArealUnit> units(n);
    for (std::size_t rank = 0; rank < n; ++rank) {
        const auto i = order[rank];
        const double u = (static_cast<double>(rank) + 0.5) / static_cast<double>(n);
        auto& unit = units[i];
        unit.id = fmt::format("r{}c{}", i / cols, i % cols);
        unit.p_true = math::beta_quantile(u, spec.beta_alpha, spec.beta_beta);
        unit.aux = rho * math::normal_quantile(u) + rho_c * noise[i];
        unit.size_measure = spec.size_median * std::exp(spec.size_sigma * log_size[i]);
        unit.n_individuals = std::max<std::int64_t>(1, std::llround(unit.size_measure));
    }
    return ArealFrame(std::move(units), edges);
}

void write_study_csv(const McResult& result, std::ostream& out) {
    out << "design,n,k,f_m,eta0,mse,mse_se,bias,var,re_vs_dust_srs\n";
    const bool exact = result.config.measurement.kind == MeasurementSpec::Kind::exact;
    std::string f_m = exact ? std::string("exact") : csv_number(result.f_m);
    if (result.config.measurement.kind == MeasurementSpec::Kind::absolute) {
        f_m = fmt::format("m={}", result.config.measurement.m);
    }
    for (const auto& r : result.designs) {
        out << to_string(r.design) << ',' << result.config.n << ',' << result.config.k << ','
            << f_m << ',' << csv_number(result.config.eta0) << ',' << csv_number(r.mse) << ','
            << csv_optional(r.mse_se) << ',' << csv_number(r.bias) << ',' << csv_number(r.var)
            << ',' << csv_optional(r.re_vs_dust_srs) << '\n';
    }
}

}  // namespace dustmns
