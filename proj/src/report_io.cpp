#include "dustmns/report_io.hpp"

#include <fstream>

#include "dustmns/errors.hpp"

namespace dustmns {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void put_diagnostic(json& doc, const char* key, const Diagnostic& d) {
    doc[key] = opt(d.value);
    if (!d.value) {
        doc[std::string(key) + "_reason"] = d.reason;
    }
}

std::string measurement_kind(MeasurementSpec::Kind kind) {
    switch (kind) {
        case MeasurementSpec::Kind::fraction:
            return "fraction";
        case MeasurementSpec::Kind::absolute:
            return "absolute";
        case MeasurementSpec::Kind::exact:
            return "exact";
    }
    return "unknown";
}

std::string size_field_name(SizeField f) {
    switch (f) {
        case SizeField::size_measure:
            return "size";
        case SizeField::n_individuals:
            return "n_individuals";
        case SizeField::equal:
            return "equal";
    }
    return "unknown";
}

}  // namespace

json estimate_json(const EstimateReport& report) {
    json doc = json::object();
    doc["theta_hat"] = report.theta_hat;
    doc["theta_bc"] = report.theta_bc;
    doc["bias_hat"] = opt(report.bias_hat);
    doc["var_hat"] = opt(report.var_hat);
    doc["ci_low"] = opt(report.ci_low);
    doc["ci_high"] = opt(report.ci_high);
    doc["method"] = report.method;
    doc["n"] = report.n;
    doc["k"] = report.k;
    doc["r_n"] = report.r_n;
    doc["tau"] = opt(report.tau);
    return doc;
}

json estimate_details_json(const EstimateReport& report) {
    json doc = json::object();
    doc["ci_method"] = report.ci_method.empty() ? json(nullptr) : json(report.ci_method);
    doc["flags"] = report.flags;
    doc["boundary"] = report.boundary;
    doc["fpc_applied"] = report.fpc_applied;
    doc["theta_bc_unclamped"] = opt(report.theta_bc_unclamped);
    if (report.model) {
        if (const auto* tau = std::get_if<TauModel>(&*report.model)) {
            doc["model"] = {{"kind", "tau"}, {"tau", tau->tau}};
        } else {
            doc["model"] = {{"kind", "matrix"}, {"nu", std::get<MatrixModel>(*report.model).nu}};
        }
    } else {
        doc["model"] = nullptr;
    }
    return doc;
}

json diagnostics_json(const FrameDiagnostics& diag) {
    json doc = json::object();
    doc["n_units"] = diag.n_units;
    doc["threshold_c"] = diag.threshold_c;
    doc["census_theta"] = diag.census_theta;
    put_diagnostic(doc, "morans_i", diag.morans_i);
    put_diagnostic(doc, "kendall_tau", diag.kendall_tau);
    put_diagnostic(doc, "mean_lag", diag.mean_lag);
    return doc;
}

json mc_config_json(const McConfig& c) {
    json doc = json::object();
    doc["n"] = c.n;
    doc["k"] = c.k;
    doc["measurement"] = {{"kind", measurement_kind(c.measurement.kind)},
                          {"f_m", c.measurement.f_m},
                          {"m", c.measurement.m}};
    doc["target_mean_m"] = opt(c.target_mean_m);
    doc["eta0"] = c.eta0;
    doc["max_lag"] = c.max_lag ? json(*c.max_lag) : json(nullptr);
    doc["size_field"] = size_field_name(c.size_field);
    doc["replicates"] = c.replicates;
    doc["threshold"] = {
        {"kind", c.threshold.kind == ThresholdRule::Kind::quantile ? "quantile" : "fixed"},
        {"value", c.threshold.value}};
    json designs = json::array();
    for (const auto d : c.designs) {
        designs.push_back(to_string(d));
    }
    doc["designs"] = designs;
    doc["master_seed"] = c.master_seed;
    doc["calibration_tau"] = opt(c.calibration_tau);
    doc["workers"] = c.workers;
    return doc;
}

json study_json(const McResult& result) {
    json doc = json::object();
    doc["config"] = mc_config_json(result.config);
    doc["threshold_c"] = result.threshold_c;
    doc["theta_n"] = result.theta_n;
    doc["f_m"] = result.f_m;
    doc["n_units"] = result.n_units;
    json rows = json::array();
    for (const auto& r : result.designs) {
        rows.push_back({{"design", to_string(r.design)},
                        {"replicates", r.replicates},
                        {"mse", r.mse},
                        {"mse_se", opt(r.mse_se)},
                        {"bias", r.bias},
                        {"var", r.var},
                        {"re_vs_dust_srs", opt(r.re_vs_dust_srs)},
                        {"mean_exceed_rate", r.mean_exceed_rate},
                        {"exceed_rate_se", opt(r.exceed_rate_se)}});
    }
    doc["designs"] = rows;
    return doc;
}

json advice_json(const Advice& advice) {
    json doc = json::object();
    json rows = json::array();
    for (const auto& a : advice.candidates) {
        rows.push_back({{"k", a.k},
                        {"feasible", a.feasible},
                        {"theta_star", a.theta_star},
                        {"re", a.re},
                        {"leading_bias", a.leading_bias},
                        {"lambda_bound", opt(a.lambda_bound)}});
    }
    doc["candidates"] = rows;
    doc["feasible_count"] = advice.feasible_count;
    doc["explanation"] = advice.explanation;
    return doc;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory " + path.parent_path().string() + ": " +
                          ec.message());
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << text;
    out.flush();
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

}  // namespace dustmns
