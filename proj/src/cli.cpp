#include "dustmns/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "dustmns/design.hpp"
#include "dustmns/efficiency.hpp"
#include "dustmns/errors.hpp"
#include "dustmns/estimators.hpp"
#include "dustmns/frame.hpp"
#include "dustmns/frame_io.hpp"
#include "dustmns/montecarlo.hpp"
#include "dustmns/report_io.hpp"

namespace dustmns::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Stream ids for generators derived from --seed.
constexpr std::uint64_t kSurveyStream = 0x7375727665790001ULL;
constexpr std::uint64_t kBootstrapStream = 0x626f6f7473740001ULL;

std::string config_key(const std::string& flag) {
    std::string key = flag;
    std::replace(key.begin(), key.end(), '-', '_');
    return key;
}

/// Registers options whose values may also come from the JSON config. A flag given on
/// the command line wins over the config entry with the same key.
class Binder {
public:
    explicit Binder(CLI::App* app) : app_(app) {}

    template <class T>
    CLI::Option* option(const std::string& name, T& var, const std::string& help) {
        auto* opt = app_->add_option("--" + name, var, help);
        if constexpr (is_vector<T>::value) {
            opt->delimiter(',');
        }
        entries_.push_back({config_key(name), opt,
                            [&var](const json& j) { var = j.get<T>(); },
                            [&var] { return json(var); }});
        return opt;
    }

    CLI::Option* flag(const std::string& name, bool& var, const std::string& help) {
        auto* opt = app_->add_flag("--" + name, var, help);
        entries_.push_back({config_key(name), opt, [&var](const json& j) { var = j.get<bool>(); },
                            [&var] { return json(var); }});
        return opt;
    }

    /// Applies config entries not overridden on the command line; records consumed keys.
    void apply(const json& config, std::set<std::string>& consumed) {
        for (auto& e : entries_) {
            if (!config.contains(e.key)) {
                continue;
            }
            consumed.insert(e.key);
            // null stands for "not given", as written by resolved().
            if (e.opt->count() > 0 || config.at(e.key).is_null()) {
                continue;
            }
            try {
                e.set(config.at(e.key));
            } catch (const json::exception& ex) {
                throw ConfigError("config key '" + e.key + "': " + ex.what());
            }
            from_config_.insert(e.key);
        }
    }

    [[nodiscard]] bool provided(const std::string& name) const {
        const auto key = config_key(name);
        for (const auto& e : entries_) {
            if (e.key == key) {
                return e.opt->count() > 0 || from_config_.contains(key);
            }
        }
        return false;
    }

    /// Options whose mere presence selects behavior; resolved() reports them as null
    /// when they were not given.
    void presence_only(std::initializer_list<const char*> names) {
        for (const char* n : names) {
            presence_only_.insert(config_key(n));
        }
    }

    [[nodiscard]] json resolved() const {
        json doc = json::object();
        for (const auto& e : entries_) {
            const bool given = e.opt->count() > 0 || from_config_.contains(e.key);
            doc[e.key] = presence_only_.contains(e.key) && !given ? json(nullptr) : e.get();
        }
        return doc;
    }

private:
    template <class T>
    struct is_vector : std::false_type {};
    template <class T, class A>
    struct is_vector<std::vector<T, A>> : std::true_type {};

    struct Entry {
        std::string key;
        CLI::Option* opt;
        std::function<void(const json&)> set;
        std::function<json()> get;
    };

    CLI::App* app_;
    std::vector<Entry> entries_;
    std::set<std::string> from_config_;
    std::set<std::string> presence_only_;
};

struct Globals {
    std::uint64_t seed = 1;
    std::string out = "out";
    std::string format = "csv";
    std::string config;
};

struct Context {
    const Globals& g;
    const Binder& binder;
    std::ostream& out;
    std::ostream& err;
    std::vector<std::string> outputs;
    json extra = json::object();

    fs::path path(const std::string& name) const { return fs::path(g.out) / name; }

    void write(const std::string& name, const std::string& text) {
        write_text_file(path(name), text);
        outputs.push_back(name);
    }
};

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

std::string table_text(const Table& t, const std::string& format) {
    if (format == "json") {
        json rows = json::array();
        for (const auto& r : t.rows) {
            json row = json::object();
            for (std::size_t i = 0; i < t.header.size(); ++i) {
                row[t.header[i]] = r[i];
            }
            rows.push_back(row);
        }
        return dump(rows);
    }
    std::ostringstream os;
    write_table_csv(t, os);
    return os.str();
}

std::string flat_csv(const json& doc) {
    std::ostringstream os;
    os << "key,value\n";
    for (const auto& [k, v] : doc.items()) {
        os << k << ',' << (v.is_null() ? std::string() : v.is_string() ? v.get<std::string>() : v.dump())
           << '\n';
    }
    return os.str();
}

const char* ext(const std::string& format) { return format == "json" ? ".json" : ".csv"; }

// ---------------------------------------------------------------- validate

struct ValidateArgs {
    std::string population;
    std::string adjacency;
    double quantile = 0.9;
    bool drop_incomplete = false;
    unsigned threads = 1;
};

void cmd_validate(Context& ctx, const ValidateArgs& a) {
    if (!ctx.binder.provided("population") || !ctx.binder.provided("adjacency")) {
        throw ArgumentError("validate needs --population and --adjacency");
    }
    const auto loaded = load_frame(a.population, a.adjacency, LoadOptions{a.drop_incomplete});
    const auto diag = compute_diagnostics(loaded.frame, a.quantile, a.threads);
    auto doc = diagnostics_json(diag);
    ctx.write(std::string("diagnostics") + ext(ctx.g.format),
              ctx.g.format == "json" ? dump(doc) : flat_csv(doc));
    ctx.extra["dropped_units"] = loaded.dropped_units;
    ctx.extra["dropped_edges"] = loaded.dropped_edges;
    if (diag.morans_i.value) {
        // Convenience rule for a starting eta0; the user remains free to choose another.
        ctx.extra["eta0_suggested"] = std::clamp(*diag.morans_i.value, 0.0, 0.99);
    }
    ctx.out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------- tables

struct TablesArgs {
    std::vector<std::string> which = {"all"};
    std::vector<int> ks;
    std::vector<double> thetas;
    std::vector<int> ns;
    std::vector<double> eta0s;
    std::vector<double> mean_lags;
};

void cmd_tables(Context& ctx, const TablesArgs& a) {
    std::vector<TableKind> kinds;
    for (const auto& w : a.which) {
        if (w == "all") {
            kinds = {TableKind::lambda, TableKind::re, TableKind::theta_star,
                     TableKind::exact_bias};
            break;
        }
        kinds.push_back(parse_table_kind(w));
    }
    for (const auto kind : kinds) {
        auto grid = default_grid(kind);
        if (!a.ks.empty() && kind != TableKind::lambda) {
            grid.ks = a.ks;
        }
        if (!a.thetas.empty()) {
            grid.thetas = a.thetas;
        }
        if (!a.eta0s.empty()) {
            grid.eta0s = a.eta0s;
        }
        if (kind == TableKind::lambda && (!a.mean_lags.empty() || !a.ns.empty())) {
            if (a.mean_lags.size() != a.ns.size()) {
                throw ArgumentError("--mean-lags and --ns must pair up for the lambda table");
            }
            grid.lag_n_pairs.clear();
            for (std::size_t i = 0; i < a.ns.size(); ++i) {
                grid.lag_n_pairs.emplace_back(a.mean_lags[i], a.ns[i]);
            }
        } else if (!a.ns.empty()) {
            grid.ns = a.ns;
        }
        const auto table = make_table(kind, grid);
        const auto text = table_text(table, ctx.g.format);
        ctx.write("table_" + to_string(kind) + ext(ctx.g.format), text);
        ctx.out << "# " << to_string(kind) << '\n' << text;
    }
}

// ---------------------------------------------------------------- shared design options

struct DesignArgs {
    std::string population;
    std::string adjacency;
    bool drop_incomplete = false;
    std::string design = "dust_mns";
    int n = 0;
    int k = 1;
    double eta0 = 0.0;
    int max_lag = 10;
    std::string size_field = "size";
    std::string ranking = "perfect";
    double f_m = 1.0;
    std::int64_t m = 0;
    bool exact = false;
    double quantile = 0.9;
    double threshold = 0.0;
};

SizeField parse_size_field(const std::string& s) {
    if (s == "size") {
        return SizeField::size_measure;
    }
    if (s == "n_individuals") {
        return SizeField::n_individuals;
    }
    if (s == "equal") {
        return SizeField::equal;
    }
    throw ArgumentError("unknown size field '" + s + "' (expected size, n_individuals or equal)");
}

RankingMode parse_ranking(const std::string& s) {
    if (s == "perfect") {
        return RankingMode::perfect;
    }
    if (s == "auxiliary" || s == "aux") {
        return RankingMode::auxiliary;
    }
    if (s == "random") {
        return RankingMode::random;
    }
    throw ArgumentError("unknown ranking '" + s + "' (expected perfect, auxiliary or random)");
}

DesignKind parse_design_kind(const std::string& s) {
    if (s == "srs") {
        return DesignKind::srs;
    }
    if (s == "dust_srs") {
        return DesignKind::dust_srs;
    }
    if (s == "dust_mns") {
        return DesignKind::dust_mns;
    }
    throw ArgumentError("unknown design '" + s + "' (expected srs, dust_srs or dust_mns)");
}

std::optional<Lag> parse_max_lag(int max_lag) {
    if (max_lag < 0) {
        return std::nullopt;  // uncapped
    }
    return static_cast<Lag>(max_lag);
}

MeasurementSpec measurement_from(const DesignArgs& a, const Binder& b) {
    MeasurementSpec m;
    if (a.exact) {
        m.kind = MeasurementSpec::Kind::exact;
    } else if (b.provided("m")) {
        m.kind = MeasurementSpec::Kind::absolute;
        m.m = a.m;
    } else {
        m.kind = MeasurementSpec::Kind::fraction;
        m.f_m = a.f_m;
    }
    return m;
}

ThresholdRule threshold_from(const DesignArgs& a, const Binder& b) {
    if (b.provided("threshold")) {
        return {ThresholdRule::Kind::fixed, a.threshold};
    }
    return {ThresholdRule::Kind::quantile, a.quantile};
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
    DesignArgs d;
    int rn = -1;
    double tau = 1.0;
    std::string nu_file;
    double level = 0.95;
    std::size_t bootstrap_b = 2000;
    std::string ci = "delta_bias_corrected";
    bool fpc = false;
    bool spatial_variance = false;
};

MatrixModel read_nu(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open misranking matrix file " + path);
    }
    try {
        const auto doc = json::parse(in);
        return MatrixModel{doc.get<std::vector<std::vector<double>>>()};
    } catch (const json::exception& e) {
        throw ConfigError(path + ": expected a JSON array of rows: " + e.what());
    }
}

json interval_json(const Interval& ci) {
    return {{"low", ci.low}, {"high", ci.high}, {"degenerate", ci.degenerate}};
}

int cmd_estimate(Context& ctx, const EstimateArgs& a, const Binder& b) {
    std::optional<MisrankingModel> model;
    if (b.provided("nu-file")) {
        if (b.provided("tau")) {
            throw ArgumentError("give either --tau or --nu-file, not both");
        }
        model = read_nu(a.nu_file);
    } else if (b.provided("tau")) {
        model = TauModel{a.tau};
    }
    const auto style = parse_ci_style(a.ci);

    EstimateReport report;
    std::vector<std::uint8_t> indicators;
    if (b.provided("population") || b.provided("adjacency")) {
        if (!b.provided("population") || !b.provided("adjacency")) {
            throw ArgumentError("frame mode needs both --population and --adjacency");
        }
        if (!b.provided("n")) {
            throw ArgumentError("frame mode needs --n");
        }
        const auto loaded =
            load_frame(a.d.population, a.d.adjacency, LoadOptions{a.d.drop_incomplete});
        const auto& frame = loaded.frame;
        DesignConfig dc;
        dc.kind = parse_design_kind(a.d.design);
        dc.n = static_cast<std::size_t>(std::max(a.d.n, 0));
        dc.k = static_cast<std::size_t>(std::max(a.d.k, 0));
        dc.dust = DustParams{a.d.eta0, parse_size_field(a.d.size_field), parse_max_lag(a.d.max_lag)};
        dc.ranking = parse_ranking(a.d.ranking);
        dc.measurement = measurement_from(a.d, b);
        dc.threshold_c = resolve_threshold(frame, threshold_from(a.d, b));
        auto rng = make_rng(derive_seed(ctx.g.seed, kSurveyStream, 0));
        const auto data = run_design(frame, dc, rng);
        indicators = data.indicators;
        ctx.extra["threshold_c"] = dc.threshold_c;
        json selected = json::array();
        for (const auto& mu : data.measured) {
            selected.push_back({{"unit_id", frame.unit(mu.index).id},
                                {"m", mu.measurement.m},
                                {"x", mu.measurement.x},
                                {"exceeds", mu.measurement.exceeds}});
        }
        ctx.extra["nominees"] = selected;
        if (dc.kind == DesignKind::dust_mns) {
            const int r_n = static_cast<int>(data.r_n);
            report = model ? estimate_imperfect(r_n, a.d.n, a.d.k, *model)
                           : estimate_dust_mns(r_n, a.d.n, a.d.k);
        } else {
            std::optional<double> lag_sum;
            if (a.spatial_variance) {
                lag_sum = realized_lag_sum(frame, data.draw.order, a.d.eta0);
            }
            std::optional<double> f;
            if (a.fpc) {
                f = static_cast<double>(a.d.n) / static_cast<double>(frame.size());
            }
            report = estimate_srs(indicators, lag_sum, f, to_string(dc.kind));
        }
    } else {
        if (!b.provided("rn") || !b.provided("n")) {
            throw ArgumentError("estimate needs --rn and --n (and --k), or a frame with a design");
        }
        report = model ? estimate_imperfect(a.rn, a.d.n, a.d.k, *model)
                       : estimate_dust_mns(a.rn, a.d.n, a.d.k);
        indicators.assign(static_cast<std::size_t>(report.n), 0);
        std::fill_n(indicators.begin(), report.r_n, std::uint8_t{1});
    }

    // All three intervals are reported; the requested style fills ci_low/ci_high.
    json intervals = json::object();
    intervals["level"] = a.level;
    std::optional<std::string> primary_error;
    for (const auto s : {CiStyle::delta, CiStyle::delta_bias_corrected, CiStyle::bootstrap}) {
        try {
            Interval ci;
            if (s == CiStyle::bootstrap) {
                auto rng = make_rng(derive_seed(ctx.g.seed, kBootstrapStream, 0));
                ci = bootstrap_ci(indicators, report.k, a.level, BootstrapOptions{a.bootstrap_b},
                                  rng, report.model);
            } else {
                ci = confidence_interval(report, a.level, s);
            }
            intervals[to_string(s)] = interval_json(ci);
            if (s == style) {
                report.ci_low = ci.low;
                report.ci_high = ci.high;
                report.ci_method = to_string(s);
            }
        } catch (const BoundaryError& e) {
            intervals[to_string(s)] = {{"error", e.what()}};
            if (s == style) {
                report.ci_low.reset();
                report.ci_high.reset();
                report.ci_method.clear();
                primary_error = e.what();
            }
        }
    }
    intervals["bootstrap"]["resamples"] = a.bootstrap_b;

    const auto doc = estimate_json(report);
    ctx.write(std::string("estimate") + ext(ctx.g.format),
              ctx.g.format == "json" ? dump(doc) : flat_csv(doc));
    ctx.write("intervals.json", dump(intervals));
    ctx.extra["estimate_details"] = estimate_details_json(report);
    ctx.out << doc.dump(2) << '\n';
    if (primary_error) {
        ctx.err << "error: " << *primary_error << '\n';
        return kNumericalError;
    }
    return kSuccess;
}

// ---------------------------------------------------------------- simulate

DesignArgs simulate_defaults() {
    DesignArgs d;
    d.n = 20;
    d.k = 3;
    return d;
}

struct SimulateArgs {
    DesignArgs d = simulate_defaults();
    int rows = 20;
    int cols = 20;
    double alpha = 2.0;
    double beta = 18.0;
    double spatial_mix = 0.0;
    double aux_tau = 0.75;
    double size_median = 20000.0;
    double size_sigma = 0.0;
    std::uint64_t synth_seed = 0;
    double target_mean_m = 0.0;
    std::size_t replicates = 1000;
    std::vector<std::string> designs = {"srs", "dust_srs", "dust_mns_perfect",
                                        "dust_mns_imperfect"};
    double calibration_tau = 1.0;
    unsigned workers = 1;
    bool write_frame = false;
};

void cmd_simulate(Context& ctx, const SimulateArgs& a, const Binder& b) {
    std::optional<ArealFrame> owned;
    if (b.provided("population") || b.provided("adjacency")) {
        if (!b.provided("population") || !b.provided("adjacency")) {
            throw ArgumentError("a frame needs both --population and --adjacency");
        }
        owned.emplace(
            load_frame(a.d.population, a.d.adjacency, LoadOptions{a.d.drop_incomplete}).frame);
    } else {
        SynthSpec spec;
        spec.rows = a.rows;
        spec.cols = a.cols;
        spec.beta_alpha = a.alpha;
        spec.beta_beta = a.beta;
        spec.spatial_mix = a.spatial_mix;
        spec.aux_tau = a.aux_tau;
        spec.size_median = a.size_median;
        spec.size_sigma = a.size_sigma;
        spec.seed = b.provided("synth-seed") ? a.synth_seed : ctx.g.seed;
        ctx.extra["synth_seed"] = spec.seed;
        owned.emplace(synth_frame(spec));
    }
    const auto& frame = *owned;
    if (a.write_frame) {
        std::ostringstream pop;
        std::ostringstream adj;
        write_population_csv(frame, pop);
        write_adjacency_csv(frame, adj);
        ctx.write("population.csv", pop.str());
        ctx.write("adjacency.csv", adj.str());
    }

    McConfig mc;
    mc.n = a.d.n;
    mc.k = a.d.k;
    mc.measurement = measurement_from(a.d, b);
    if (b.provided("target-mean-m")) {
        mc.target_mean_m = a.target_mean_m;
    }
    mc.eta0 = a.d.eta0;
    mc.max_lag = parse_max_lag(a.d.max_lag);
    mc.size_field = parse_size_field(a.d.size_field);
    mc.replicates = a.replicates;
    mc.threshold = threshold_from(a.d, b);
    mc.designs.clear();
    for (const auto& d : a.designs) {
        mc.designs.push_back(parse_mc_design(d));
    }
    mc.master_seed = ctx.g.seed;
    if (b.provided("calibration-tau")) {
        mc.calibration_tau = a.calibration_tau;
    }
    mc.workers = a.workers;
    const auto result = run_study(frame, mc);

    std::string text;
    if (ctx.g.format == "json") {
        text = dump(study_json(result));
    } else {
        std::ostringstream os;
        write_study_csv(result, os);
        text = os.str();
    }
    ctx.write(std::string("study") + ext(ctx.g.format), text);
    ctx.extra["study"] = study_json(result);
    ctx.out << text;
}

// ---------------------------------------------------------------- advise / thetastar

struct AdviseArgs {
    double theta = 0.1;
    std::vector<int> ks = {2, 3, 4, 5};
    int n = 20;
    double eta0 = 0.0;
    double mean_lag = 1.0;
};

void cmd_advise(Context& ctx, const AdviseArgs& a, const Binder& b) {
    if (!b.provided("theta")) {
        throw ArgumentError("advise needs --theta");
    }
    std::optional<double> eta0;
    std::optional<double> lbar;
    if (b.provided("eta0") != b.provided("mean-lag")) {
        throw ArgumentError("the Lambda bound needs both --eta0 and --mean-lag");
    }
    if (b.provided("eta0")) {
        eta0 = a.eta0;
        lbar = a.mean_lag;
    }
    const auto advice = advise_k(a.theta, a.ks, a.n, eta0, lbar);
    std::string text;
    if (ctx.g.format == "json") {
        text = dump(advice_json(advice));
    } else {
        std::ostringstream os;
        os << "k,feasible,theta_star,re,leading_bias,lambda_bound\n";
        for (const auto& c : advice.candidates) {
            os << c.k << ',' << (c.feasible ? "yes" : "no") << ','
               << format_half_even(c.theta_star, 4) << ',' << format_half_even(c.re, 3) << ','
               << format_half_even(c.leading_bias, 5) << ','
               << (c.lambda_bound ? format_half_even(*c.lambda_bound, 3) : std::string()) << '\n';
        }
        text = os.str();
    }
    ctx.write(std::string("advice") + ext(ctx.g.format), text);
    ctx.extra["explanation"] = advice.explanation;
    ctx.out << text << advice.explanation << '\n';
}

struct ThetaStarArgs {
    std::vector<int> ks = {2, 3, 4, 5, 6, 7, 8, 9, 10};
};

void cmd_thetastar(Context& ctx, const ThetaStarArgs& a) {
    std::ostringstream os;
    json rows = json::array();
    os << "k,theta_star,phi_residual\n";
    for (const int k : a.ks) {
        const double t = theta_star(k);
        const double residual = phi_k(1.0 - t, k) - static_cast<double>(k) * k;
        os << k << ',' << fmt::format("{:.10f}", t) << ',' << fmt::format("{:.3e}", residual)
           << '\n';
        rows.push_back({{"k", k}, {"theta_star", t}, {"phi_residual", residual}});
    }
    const auto text = ctx.g.format == "json" ? dump(rows) : os.str();
    ctx.write(std::string("thetastar") + ext(ctx.g.format), text);
    ctx.out << text;
}

void add_design_options(Binder& b, DesignArgs& d, bool with_design_kind) {
    b.option("population", d.population, "population CSV (unit_id,size,p,aux[,n_individuals])");
    b.option("adjacency", d.adjacency, "adjacency CSV (id_a,id_b)");
    b.flag("drop-incomplete", d.drop_incomplete, "drop units with missing fields");
    if (with_design_kind) {
        b.option("design", d.design, "srs, dust_srs or dust_mns");
        b.option("ranking", d.ranking, "perfect, auxiliary or random");
    }
    b.option("n", d.n, "number of sets (measured units)");
    b.option("k", d.k, "set size");
    b.option("eta0", d.eta0, "first-lag spatial autocorrelation for DUST, in [0, 1)");
    b.option("max-lag", d.max_lag, "lag cap for the DUST penalty; negative for none");
    b.option("size-field", d.size_field, "PPS size: size, n_individuals or equal");
    b.option("f-m", d.f_m, "measurement fraction f_m in (0, 1]");
    b.option("m", d.m, "absolute measurement size per unit (overrides --f-m)");
    b.flag("exact", d.exact, "exact measurement 1(p > c)");
    b.option("quantile", d.quantile, "threshold c as this quantile of p");
    b.option("threshold", d.threshold, "fixed threshold c (overrides --quantile)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spatially repulsive maxima-nominated sampling for exceedance proportions",
                 "dustmns"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    Binder global(&app);
    global.option("seed", g.seed, "master seed")->capture_default_str();
    global.option("out", g.out, "output directory")->capture_default_str();
    global.option("format", g.format, "tabular output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    app.add_option("--config", g.config, "JSON config; flags override its keys");

    auto* validate = app.add_subcommand("validate", "load a frame and report diagnostics");
    ValidateArgs va;
    Binder vb(validate);
    vb.option("population", va.population, "population CSV");
    vb.option("adjacency", va.adjacency, "adjacency CSV");
    vb.option("quantile", va.quantile, "threshold quantile of p");
    vb.flag("drop-incomplete", va.drop_incomplete, "drop units with missing fields");
    vb.option("threads", va.threads, "worker threads for the lag summary");
    vb.presence_only({"population", "adjacency"});

    auto* tables = app.add_subcommand("tables", "regenerate the analytic tables");
    TablesArgs ta;
    Binder tb(tables);
    tb.option("which", ta.which, "lambda, re, theta_star, bias or all");
    tb.option("ks", ta.ks, "set sizes");
    tb.option("thetas", ta.thetas, "exceedance proportions");
    tb.option("ns", ta.ns, "sample sizes");
    tb.option("eta0s", ta.eta0s, "eta0 values (lambda table)");
    tb.option("mean-lags", ta.mean_lags, "mean lags paired with --ns (lambda table)");

    auto* estimate = app.add_subcommand("estimate", "estimate theta from counts or one survey");
    EstimateArgs ea;
    Binder eb(estimate);
    add_design_options(eb, ea.d, true);
    eb.option("rn", ea.rn, "number of nominees exceeding c");
    eb.option("tau", ea.tau, "Kendall tau working model for imperfect ranking");
    eb.option("nu-file", ea.nu_file, "JSON k x k misranking matrix");
    eb.option("level", ea.level, "confidence level");
    eb.option("bootstrap-b", ea.bootstrap_b, "bootstrap resamples");
    eb.option("ci", ea.ci, "interval reported in the estimate: delta, delta_bias_corrected, bootstrap");
    eb.flag("fpc", ea.fpc, "finite-population correction (srs designs)");
    eb.flag("spatial-variance", ea.spatial_variance,
            "add the realized lag term to the srs variance");
    eb.presence_only({"population", "adjacency", "m", "threshold", "rn", "n", "tau", "nu-file"});

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo comparison of designs");
    SimulateArgs sa;
    Binder sb(simulate);
    add_design_options(sb, sa.d, false);
    sb.option("rows", sa.rows, "synthetic lattice rows");
    sb.option("cols", sa.cols, "synthetic lattice columns");
    sb.option("alpha", sa.alpha, "Beta shape alpha of p");
    sb.option("beta", sa.beta, "Beta shape beta of p");
    sb.option("spatial-mix", sa.spatial_mix, "neighbor-averaging weight in [0, 1)");
    sb.option("aux-tau", sa.aux_tau, "Kendall tau between aux and p");
    sb.option("size-median", sa.size_median, "median unit size");
    sb.option("size-sigma", sa.size_sigma, "log-scale spread of unit sizes");
    sb.option("synth-seed", sa.synth_seed, "seed of the synthetic frame (default: --seed)");
    sb.option("target-mean-m", sa.target_mean_m, "choose f_m so the mean m_i is this value");
    sb.option("replicates", sa.replicates, "Monte Carlo replicates per design");
    sb.option("designs", sa.designs, "srs, dust_srs, dust_mns_perfect, dust_mns_imperfect");
    sb.option("calibration-tau", sa.calibration_tau, "tau model for the imperfect estimator");
    sb.option("workers", sa.workers, "worker threads");
    sb.flag("write-frame", sa.write_frame, "also write the frame as CSV files");
    sb.presence_only({"population", "adjacency", "m", "threshold", "synth-seed", "target-mean-m",
                      "calibration-tau"});

    auto* advise = app.add_subcommand("advise", "rank set sizes for a prior theta");
    AdviseArgs aa;
    Binder ab(advise);
    ab.option("theta", aa.theta, "prior exceedance proportion");
    ab.option("ks", aa.ks, "candidate set sizes");
    ab.option("n", aa.n, "number of sets");
    ab.option("eta0", aa.eta0, "eta0 for the Lambda bound");
    ab.option("mean-lag", aa.mean_lag, "mean lag for the Lambda bound");
    ab.presence_only({"theta", "eta0", "mean-lag"});

    auto* thetastar = app.add_subcommand("thetastar", "critical thresholds theta*(k)");
    ThetaStarArgs tsa;
    Binder tsb(thetastar);
    tsb.option("ks", tsa.ks, "set sizes (>= 2)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kValidationError;
    }
    // Mandatory inputs may come from the config file, so they are checked per command.

    CLI::App* active = app.get_subcommands().front();
    Binder* binder = active == validate   ? &vb
                     : active == tables   ? &tb
                     : active == estimate ? &eb
                     : active == simulate ? &sb
                     : active == advise   ? &ab
                                          : &tsb;
    std::optional<Context> ctx;
    int code = kSuccess;
    std::string error_text;
    try {
        if (!g.config.empty()) {
            std::ifstream in(g.config);
            if (!in) {
                throw IoError("cannot open config file " + g.config);
            }
            json cfg;
            try {
                cfg = json::parse(in);
            } catch (const json::exception& e) {
                throw ConfigError(g.config + ": " + e.what());
            }
            if (!cfg.is_object()) {
                throw ConfigError(g.config + ": top level must be an object");
            }
            std::set<std::string> consumed;
            global.apply(cfg, consumed);
            binder->apply(cfg, consumed);
            for (const auto& [key, value] : cfg.items()) {
                if (!consumed.contains(key)) {
                    throw ConfigError(g.config + ": unknown key '" + key + "' for command '" +
                                      active->get_name() + "'");
                }
            }
        }
        if (g.format != "csv" && g.format != "json") {
            throw ConfigError("format must be csv or json");
        }
        ctx.emplace(Context{g, *binder, out, err, {}, json::object()});
        if (active == validate) {
            cmd_validate(*ctx, va);
        } else if (active == tables) {
            cmd_tables(*ctx, ta);
        } else if (active == estimate) {
            code = cmd_estimate(*ctx, ea, eb);
        } else if (active == simulate) {
            cmd_simulate(*ctx, sa, sb);
        } else if (active == advise) {
            cmd_advise(*ctx, aa, ab);
        } else {
            cmd_thetastar(*ctx, tsa);
        }
    } catch (const ValidationError& e) {
        code = kValidationError;
        error_text = e.what();
    } catch (const NumericalError& e) {
        code = kNumericalError;
        error_text = e.what();
    } catch (const IoError& e) {
        code = kIoError;
        error_text = e.what();
    } catch (const std::exception& e) {
        code = kInternalError;
        error_text = e.what();
    }
    if (!error_text.empty()) {
        err << "error: " << error_text << '\n';
    }

    if (ctx && code != kIoError) {
        json manifest = json::object();
        manifest["tool"] = "dustmns";
        manifest["version"] = kVersion;
        manifest["command"] = active->get_name();
        manifest["seed"] = g.seed;
        manifest["global"] = global.resolved();
        manifest["config_file"] = g.config.empty() ? json(nullptr) : json(g.config);
        manifest["resolved"] = binder->resolved();
        manifest["outputs"] = ctx->outputs;
        manifest["exit_code"] = code;
        manifest["error"] = error_text.empty() ? json(nullptr) : json(error_text);
        for (const auto& [k, v] : ctx->extra.items()) {
            manifest[k] = v;
        }
        try {
            write_text_file(ctx->path("manifest.json"), dump(manifest));
        } catch (const IoError& e) {
            err << "error: " << e.what() << '\n';
            return kIoError;
        }
    }
    return code;
}

}  // namespace dustmns::cli
