#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "dustmns/errors.hpp"
#include "dustmns/estimators.hpp"
#include "dustmns/mathkit.hpp"
#include "dustmns/montecarlo.hpp"
#include "prop.hpp"

using namespace dustmns;

namespace {

ArealFrame small_frame(std::uint64_t seed = 3, double mix = 0.0) {
    SynthSpec spec;
    spec.rows = 12;
    spec.cols = 12;
    spec.spatial_mix = mix;
    spec.size_sigma = 0.5;
    spec.seed = seed;
    return synth_frame(spec);
}

McConfig small_config() {
    McConfig cfg;
    cfg.n = 6;
    cfg.k = 3;
    cfg.measurement = {MeasurementSpec::Kind::fraction, 1.0, 1};
    cfg.target_mean_m = 25.0;
    cfg.eta0 = 0.3;
    cfg.replicates = 200;
    cfg.threshold = {ThresholdRule::Kind::quantile, 0.85};
    cfg.master_seed = 77;
    cfg.keep_estimates = true;
    return cfg;
}

}  // namespace

TEST(Jackknife, MatchesStandardErrorOfMean) {
    EXPECT_FALSE(jackknife_se_of_mean({1.0}));
    prop::for_all(50, 71, [](prop::Gen& g) {
        std::vector<double> v(static_cast<std::size_t>(g.integer(2, 50)));
        for (auto& x : v) x = g.uniform(-3, 3);
        double mean = 0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double n = static_cast<double>(v.size());
        EXPECT_NEAR(*jackknife_se_of_mean(v), std::sqrt(ss / (n - 1) / n), 1e-12);
    });
}

TEST(Study, SingleReplicateMseIsSquaredError) {
    const auto frame = small_frame();
    auto cfg = small_config();
    cfg.replicates = 1;
    const auto res = run_study(frame, cfg);
    for (const auto& d : res.designs) {
        ASSERT_EQ(d.estimates.size(), 1u);
        const double err = d.estimates[0] - res.theta_n;
        EXPECT_NEAR(d.mse, err * err, 1e-15);
        EXPECT_FALSE(d.mse_se);
    }
}

TEST(Study, MseDecomposes) {
    const auto frame = small_frame();
    const auto res = run_study(frame, small_config());
    for (const auto& d : res.designs) {
        EXPECT_NEAR(d.mse, d.bias * d.bias + d.var, 1e-12);
        EXPECT_EQ(d.replicates, 200u);
    }
    const auto& dsrs = *std::find_if(res.designs.begin(), res.designs.end(),
                                     [](const auto& d) { return d.design == McDesign::dust_srs; });
    EXPECT_NEAR(*dsrs.re_vs_dust_srs, 1.0, 1e-15);
}

TEST(Study, BitIdenticalAcrossWorkerCounts) {
    const auto frame = small_frame();
    auto cfg = small_config();
    std::string reference;
    for (unsigned workers : {1u, 2u, 3u, 5u}) {
        cfg.workers = workers;
        const auto res = run_study(frame, cfg);
        std::ostringstream out;
        write_study_csv(res, out);
        for (const auto& d : res.designs)
            for (double e : d.estimates) out << e << ';';
        if (reference.empty()) reference = out.str();
        EXPECT_EQ(out.str(), reference) << workers;
    }
}

TEST(Study, ReplicateDependsOnlyOnItsIndex) {
    const auto frame = small_frame();
    const auto cfg = small_config();
    const McStudy study(frame, cfg);
    const auto a = study.replicate(McDesign::dust_mns_perfect, 17);
    (void)study.replicate(McDesign::dust_mns_perfect, 3);
    const auto b = study.replicate(McDesign::dust_mns_perfect, 17);
    EXPECT_EQ(a.theta_hat, b.theta_hat);
    EXPECT_EQ(a.r_n, b.r_n);
    EXPECT_EQ(run_replicate(frame, cfg, McDesign::srs, 4).theta_hat,
              study.replicate(McDesign::srs, 4).theta_hat);
}

TEST(Study, SrsOnAllExceedingFrame) {
    auto frame = small_frame();
    McConfig cfg;
    cfg.n = 5;
    cfg.k = 1;
    cfg.measurement = {MeasurementSpec::Kind::fraction, 1.0, 1};
    cfg.threshold = {ThresholdRule::Kind::fixed, 0.0};
    cfg.designs = {McDesign::srs};
    cfg.replicates = 3;
    const auto res = run_study(frame, cfg);
    EXPECT_EQ(res.theta_n, 1.0);
    EXPECT_EQ(res.designs.size(), 1u);
    EXPECT_EQ(res.designs[0].mse, 0.0);
}

TEST(Study, RejectsBadConfigs) {
    const auto frame = small_frame();
    auto cfg = small_config();
    cfg.replicates = 0;
    EXPECT_THROW(McStudy(frame, cfg), ArgumentError);
    cfg = small_config();
    cfg.designs = {McDesign::srs, McDesign::srs};
    EXPECT_THROW(McStudy(frame, cfg), ArgumentError);
    cfg = small_config();
    cfg.calibration_tau = 2.0;
    EXPECT_THROW(McStudy(frame, cfg), ArgumentError);
    EXPECT_EQ(parse_mc_design(to_string(McDesign::dust_mns_imperfect)), McDesign::dust_mns_imperfect);
}

TEST(Study, DustSrsWithoutPenaltyMatchesSrs) {
    SynthSpec spec;
    spec.rows = 20;
    spec.cols = 20;
    spec.spatial_mix = 0.5;
    spec.seed = 11;
    const auto frame = synth_frame(spec);
    McConfig cfg;
    cfg.n = 15;
    cfg.k = 1;
    cfg.measurement = {MeasurementSpec::Kind::exact, 1.0, 1};
    cfg.eta0 = 0.0;
    cfg.size_field = SizeField::equal;
    cfg.replicates = 5000;
    cfg.designs = {McDesign::srs, McDesign::dust_srs};
    cfg.master_seed = 12;
    const auto res = run_study(frame, cfg);
    const double ratio = res.designs[0].mse / res.designs[1].mse;
    EXPECT_GE(ratio, 0.9);
    EXPECT_LE(ratio, 1.1);
}

TEST(Study, PerfectMnsBiasMatchesExactBias) {
    SynthSpec spec;
    spec.rows = 60;
    spec.cols = 60;
    spec.seed = 13;
    const auto frame = synth_frame(spec);
    McConfig cfg;
    cfg.n = 10;
    cfg.k = 3;
    cfg.measurement = {MeasurementSpec::Kind::exact, 1.0, 1};
    cfg.eta0 = 0.0;
    cfg.max_lag = Lag{1};
    cfg.size_field = SizeField::equal;
    cfg.replicates = 5000;
    cfg.threshold = {ThresholdRule::Kind::quantile, 0.8};
    cfg.designs = {McDesign::dust_mns_perfect};
    cfg.master_seed = 14;
    cfg.keep_estimates = true;
    const auto res = run_study(frame, cfg);
    const auto& d = res.designs[0];
    const double se = *jackknife_se_of_mean(d.estimates);
    EXPECT_NEAR(d.bias, exact_bias(10, 3, res.theta_n), 3 * se);
}

TEST(Study, RelativeEfficiencyIsStableInN) {
    SynthSpec spec;
    spec.rows = 30;
    spec.cols = 30;
    spec.spatial_mix = 0.4;
    spec.seed = 15;
    const auto frame = synth_frame(spec);
    McConfig cfg;
    cfg.k = 3;
    cfg.measurement = {MeasurementSpec::Kind::exact, 1.0, 1};
    cfg.eta0 = 0.2;
    cfg.replicates = 4000;
    cfg.threshold = {ThresholdRule::Kind::quantile, 0.9};
    cfg.designs = {McDesign::dust_srs, McDesign::dust_mns_perfect};
    cfg.master_seed = 16;
    std::vector<double> re;
    for (int n : {10, 20}) {
        cfg.n = n;
        re.push_back(*run_study(frame, cfg).designs[1].re_vs_dust_srs);
    }
    EXPECT_LT(std::abs(re[0] - re[1]) / re[1], 0.25) << re[0] << " vs " << re[1];
}

TEST(SynthFrame, IidFieldHasNullMoranAndBetaMarginal) {
    // Over seeds, Moran's I of an iid field centres on -1/(N - 1).
    std::vector<double> values;
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        SynthSpec spec;
        spec.rows = 20;
        spec.cols = 20;
        spec.seed = seed;
        const auto frame = synth_frame(spec);
        values.push_back(morans_i(frame, frame.p_values()));
    }
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    const double se = *jackknife_se_of_mean(values);
    EXPECT_NEAR(mean, -1.0 / 399.0, 3 * se);

    SynthSpec spec;
    spec.seed = 21;
    const auto frame = synth_frame(spec);
    auto p = frame.p_values();
    std::sort(p.begin(), p.end());
    const double n = static_cast<double>(p.size());
    double ks = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double f = math::reg_inc_beta(p[i], spec.beta_alpha, spec.beta_beta);
        ks = std::max({ks, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
    }
    EXPECT_LT(ks, 0.02);
}

TEST(SynthFrame, CorrelatedFieldAndConcordance) {
    SynthSpec spec;
    spec.spatial_mix = 0.6;
    spec.aux_tau = 0.75;
    spec.seed = 22;
    const auto frame = synth_frame(spec);
    EXPECT_EQ(frame.size(), 2500u);
    EXPECT_EQ(frame.edge_count(), 2u * 50u * 49u);
    EXPECT_GT(morans_i(frame, frame.p_values()), 0.3);
    EXPECT_NEAR(kendall_tau(frame.p_values(), frame.aux_values()), 0.75, 0.03);
    SynthSpec bad;
    bad.rows = 1;
    EXPECT_THROW((void)synth_frame(bad), ArgumentError);
}

TEST(StudyCsv, HeaderAndRows) {
    const auto frame = small_frame();
    auto cfg = small_config();
    cfg.designs = {McDesign::srs};
    const auto res = run_study(frame, cfg);
    std::ostringstream out;
    write_study_csv(res, out);
    const auto text = out.str();
    EXPECT_EQ(text.rfind("design,n,k,f_m,eta0,mse,mse_se,bias,var,re_vs_dust_srs\n", 0), 0u);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}
