#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dustmns/design.hpp"
#include "dustmns/errors.hpp"
#include "dustmns/mathkit.hpp"
#include "dustmns/montecarlo.hpp"
#include "prop.hpp"

using namespace dustmns;

namespace {

ArealFrame frame_of(const std::vector<double>& p, std::vector<double> aux = {},
                    std::int64_t individuals = 100) {
    std::vector<ArealUnit> us(p.size());
    std::vector<ArealFrame::Edge> edges;
    for (std::size_t i = 0; i < p.size(); ++i) {
        us[i].id = "u" + std::to_string(i);
        us[i].p_true = p[i];
        us[i].aux = aux.empty() ? static_cast<double>(i) : aux[i];
        us[i].n_individuals = individuals;
        us[i].size_measure = static_cast<double>(individuals);
        if (i + 1 < p.size()) edges.emplace_back(i, i + 1);
    }
    return ArealFrame(std::move(us), edges);
}

}  // namespace

TEST(Nominate, SingletonsAndArgmax) {
    const auto frame = frame_of({0.1, 0.9, 0.5}, {3.0, 1.0, 2.0});
    auto rng = make_rng(1);
    EXPECT_EQ(nominate({{2}}, frame, RankingMode::perfect, rng), (std::vector<std::size_t>{2}));
    EXPECT_EQ(nominate({{0, 1, 2}}, frame, RankingMode::perfect, rng),
              (std::vector<std::size_t>{1}));
    // aux exactly reversed from p: the nominee is the set minimum of p.
    EXPECT_EQ(nominate({{0, 1, 2}}, frame, RankingMode::auxiliary, rng),
              (std::vector<std::size_t>{0}));
}

TEST(Nominate, TiesBreakAmongMaximaOnly) {
    const auto frame = frame_of({0.7, 0.2, 0.7, 0.1});
    auto rng = make_rng(2);
    int first = 0;
    for (int b = 0; b < 4000; ++b) {
        const auto pick = nominate({{0, 1, 2, 3}}, frame, RankingMode::perfect, rng)[0];
        ASSERT_TRUE(pick == 0 || pick == 2);
        first += pick == 0 ? 1 : 0;
    }
    EXPECT_NEAR(first / 4000.0, 0.5, 0.05);
}

TEST(Nominate, PerfectNomineeIsArgmax) {
    prop::for_all(200, 41, [](prop::Gen& g) {
        const int n = g.integer(1, 12);
        std::vector<double> p(static_cast<std::size_t>(n));
        for (auto& v : p) v = std::round(g.uniform(0, 1) * 10) / 10;
        const auto frame = frame_of(p);
        std::vector<std::size_t> set(p.size());
        for (std::size_t i = 0; i < set.size(); ++i) set[i] = i;
        auto rng = make_rng(g.engine()());
        const auto pick = nominate({set}, frame, RankingMode::perfect, rng)[0];
        EXPECT_EQ(p[pick], *std::max_element(p.begin(), p.end()));
    });
}

TEST(Nominate, MissingFieldIsDataError) {
    std::vector<ArealUnit> us(2);
    us[0].id = "a";
    us[1].id = "b";
    us[0].p_true = 0.2;
    const ArealFrame frame(us, std::vector<ArealFrame::Edge>{});
    auto rng = make_rng(3);
    EXPECT_THROW((void)nominate({{0, 1}}, frame, RankingMode::perfect, rng), DataError);
    EXPECT_THROW((void)nominate({{0, 1}}, frame, RankingMode::auxiliary, rng), DataError);
}

TEST(MeasureUnit, Extremes) {
    auto rng = make_rng(4);
    ArealUnit u;
    u.id = "x";
    u.n_individuals = 50;
    u.p_true = 0.0;
    const MeasurementSpec full{MeasurementSpec::Kind::fraction, 1.0, 1};
    EXPECT_EQ(measure_unit(u, full, 0.1, rng).x, 0);
    EXPECT_FALSE(measure_unit(u, full, 0.1, rng).exceeds);
    u.p_true = 1.0;
    EXPECT_TRUE(measure_unit(u, full, 0.99, rng).exceeds);
    const MeasurementSpec exact{MeasurementSpec::Kind::exact, 1.0, 1};
    u.p_true = 0.3;
    EXPECT_FALSE(measure_unit(u, exact, 0.3, rng).exceeds);
    EXPECT_TRUE(measure_unit(u, exact, 0.29, rng).exceeds);
    const MeasurementSpec tiny{MeasurementSpec::Kind::fraction, 1e-9, 1};
    EXPECT_EQ(measure_unit(u, tiny, 0.3, rng).m, 1);
    const MeasurementSpec capped{MeasurementSpec::Kind::absolute, 1.0, 500};
    EXPECT_EQ(measure_unit(u, capped, 0.3, rng).m, 50);
}

TEST(MeasureUnit, FrequencyMatchesBinomialTail) {
    ArealUnit u;
    u.id = "x";
    u.n_individuals = 12;
    u.p_true = 0.3;
    const double c = 0.25;
    // X/12 > 0.25 iff X >= 4.
    const double want = 1.0 - math::binom_pmf_cdf(12, 0.3, 3).cdf;
    auto rng = make_rng(5);
    const MeasurementSpec full{MeasurementSpec::Kind::fraction, 1.0, 1};
    int hits = 0;
    constexpr int draws = 100000;
    for (int b = 0; b < draws; ++b) hits += measure_unit(u, full, c, rng).exceeds ? 1 : 0;
    EXPECT_NEAR(hits / double(draws), want, 4 * std::sqrt(want * (1 - want) / draws));
}

TEST(MeasureUnit, ThresholdOnlyThroughStrictComparison) {
    prop::for_all(100, 42, [](prop::Gen& g) {
        ArealUnit u;
        u.id = "x";
        u.n_individuals = g.integer(1, 40);
        u.p_true = g.uniform(0, 1);
        const MeasurementSpec full{MeasurementSpec::Kind::fraction, 1.0, 1};
        const auto m = static_cast<double>(u.n_individuals);
        const double c = std::floor(g.uniform(0, 1) * m) / m;
        const double eps = 0.5 / m;
        const auto seed = g.engine()();
        auto a = make_rng(seed);
        auto b = make_rng(seed);
        EXPECT_EQ(measure_unit(u, full, c, a).exceeds, measure_unit(u, full, c + eps * 0.99, b).exceeds);
    });
}

TEST(SurveyDesign, SrsAndCollapsedDesigns) {
    const auto frame = frame_of(std::vector<double>(30, 0.8));
    DesignConfig cfg;
    cfg.kind = DesignKind::srs;
    cfg.n = 10;
    cfg.k = 4;
    cfg.measurement = {MeasurementSpec::Kind::fraction, 1.0, 1};
    cfg.threshold_c = 0.5;
    auto rng = make_rng(6);
    const auto srs = run_design(frame, cfg, rng);
    EXPECT_EQ(srs.k, 1u);
    EXPECT_EQ(srs.n, 10u);
    EXPECT_EQ(srs.indicators.size(), 10u);

    cfg.kind = DesignKind::dust_mns;
    cfg.k = 3;
    cfg.measurement = {MeasurementSpec::Kind::exact, 1.0, 1};
    const auto all = run_design(frame, cfg, rng);
    EXPECT_EQ(all.r_n, 10u);
    EXPECT_EQ(all.draw.order.size(), 30u);
    EXPECT_EQ(all.draw.sets.size(), 10u);
}

TEST(SurveyDesign, NomineeDominatesRandomMember) {
    SynthSpec spec;
    spec.rows = 30;
    spec.cols = 30;
    spec.seed = 7;
    const auto frame = synth_frame(spec);
    const double c = resolve_threshold(frame, {ThresholdRule::Kind::quantile, 0.8});
    DesignConfig cfg;
    cfg.kind = DesignKind::dust_mns;
    cfg.n = 10;
    cfg.k = 3;
    cfg.dust = {0.3, SizeField::equal, Lag{3}};
    cfg.measurement = {MeasurementSpec::Kind::exact, 1.0, 1};
    cfg.threshold_c = c;
    const SurveyDesign perfect(frame, cfg);
    cfg.ranking = RankingMode::random;
    const SurveyDesign random(frame, cfg);
    double hit_max = 0, hit_rand = 0;
    constexpr int reps = 2000;
    for (int b = 0; b < reps; ++b) {
        auto r1 = make_rng(derive_seed(7, 0, b));
        auto r2 = make_rng(derive_seed(7, 1, b));
        hit_max += static_cast<double>(perfect.run(r1).r_n);
        hit_rand += static_cast<double>(random.run(r2).r_n);
    }
    const double total = reps * 10.0;
    const double pm = hit_max / total;
    const double pr = hit_rand / total;
    const double se = std::sqrt(pm * (1 - pm) / total + pr * (1 - pr) / total);
    EXPECT_GE(pm, pr - 3 * se);
    EXPECT_GT(pm, pr);
}

TEST(SurveyDesign, Deterministic) {
    SynthSpec spec;
    spec.rows = 10;
    spec.cols = 10;
    const auto frame = synth_frame(spec);
    DesignConfig cfg;
    cfg.n = 8;
    cfg.k = 3;
    cfg.dust = {0.5, SizeField::size_measure, Lag{4}};
    cfg.threshold_c = 0.1;
    cfg.measurement = {MeasurementSpec::Kind::fraction, 0.001, 1};
    const SurveyDesign design(frame, cfg);
    auto a = make_rng(8);
    auto b = make_rng(8);
    const auto x = design.run(a);
    const auto y = design.run(b);
    EXPECT_EQ(x.indicators, y.indicators);
    EXPECT_EQ(x.draw.order, y.draw.order);
}
