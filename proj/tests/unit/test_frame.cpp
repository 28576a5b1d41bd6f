#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dustmns/errors.hpp"
#include "dustmns/frame.hpp"
#include "dustmns/frame_io.hpp"
#include "oracles.hpp"
#include "prop.hpp"

using namespace dustmns;

namespace {

std::string fixture(const std::string& name) { return std::string(DUSTMNS_FIXTURE_DIR) + "/" + name; }

std::vector<ArealUnit> make_units(const std::vector<double>& p) {
    std::vector<ArealUnit> us(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        us[i].id = "u" + std::to_string(i);
        us[i].p_true = p[i];
        us[i].aux = static_cast<double>(i);
    }
    return us;
}

ArealFrame make_frame(const std::vector<double>& p, const std::vector<ArealFrame::Edge>& edges) {
    return ArealFrame(make_units(p), edges);
}

std::vector<ArealFrame::Edge> random_edges(prop::Gen& g, std::size_t n, double density) {
    std::vector<ArealFrame::Edge> edges;
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (g.uniform(0, 1) < density) edges.emplace_back(a, b);
    return edges;
}

}  // namespace

TEST(FrameIo, LoadsPathFixture) {
    const auto loaded = load_frame(fixture("path4_population.csv"), fixture("path4_adjacency.csv"));
    EXPECT_EQ(loaded.frame.size(), 4u);
    EXPECT_EQ(loaded.frame.edge_count(), 3u);
    EXPECT_EQ(loaded.frame.unit(1).id, "b");
    EXPECT_DOUBLE_EQ(*loaded.frame.unit(3).p_true, 0.30);
}

TEST(FrameIo, RejectsDuplicateIds) {
    EXPECT_THROW((void)load_frame(fixture("duplicate_id_population.csv"),
                                  fixture("path4_adjacency.csv")),
                 IntegrityError);
}

TEST(FrameIo, RejectsUnknownEdgeEndpoint) {
    EXPECT_THROW((void)load_frame(fixture("path4_population.csv"),
                                  fixture("unknown_edge_adjacency.csv")),
                 IntegrityError);
}

TEST(FrameIo, MalformedRowReportsLine) {
    try {
        (void)load_frame(fixture("malformed_population.csv"), fixture("path4_adjacency.csv"));
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(FrameIo, MissingFileIsIoError) {
    EXPECT_THROW((void)load_frame(fixture("nope.csv"), fixture("path4_adjacency.csv")), IoError);
}

TEST(FrameIo, DropIncompleteRemovesRowsAndTheirEdges) {
    EXPECT_NO_THROW((void)load_frame(fixture("missing_p_population.csv"),
                                     fixture("path4_adjacency.csv")));
    const auto loaded = load_frame(fixture("missing_p_population.csv"),
                                   fixture("path4_adjacency.csv"), {true});
    EXPECT_EQ(loaded.frame.size(), 3u);
    EXPECT_EQ(loaded.dropped_units, 1u);
    EXPECT_EQ(loaded.dropped_edges, 2u);
}

TEST(FrameIo, WriteReadRoundTrip) {
    const auto frame = load_frame(fixture("path4_population.csv"),
                                  fixture("path4_adjacency.csv")).frame;
    std::stringstream pop, adj;
    write_population_csv(frame, pop);
    write_adjacency_csv(frame, adj);
    const auto back = read_frame(pop, adj).frame;
    ASSERT_EQ(back.size(), frame.size());
    EXPECT_EQ(back.edge_count(), frame.edge_count());
    for (std::size_t i = 0; i < frame.size(); ++i) {
        EXPECT_EQ(back.unit(i).id, frame.unit(i).id);
        EXPECT_EQ(back.unit(i).p_true, frame.unit(i).p_true);
        EXPECT_EQ(back.unit(i).size_measure, frame.unit(i).size_measure);
    }
}

TEST(Frame, RejectsSelfLoopsAndBadFields) {
    std::vector<ArealFrame::Edge> loop{{1, 1}};
    EXPECT_THROW(make_frame({0.1, 0.2}, loop), IntegrityError);
    auto units = make_units({0.1, 0.2});
    units[0].p_true = 1.5;
    EXPECT_THROW(ArealFrame(units, {}), ValidationError);
}

TEST(Lags, PathAndComponents) {
    const auto path = make_frame({0.1, 0.2, 0.3}, {{0, 1}, {1, 2}});
    const auto lags = compute_lags(path);
    EXPECT_EQ(lags.at(0, 1), 1u);
    EXPECT_EQ(lags.at(0, 2), 2u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(lags.at(i, i), 0u);

    const auto split = make_frame({0.1, 0.2, 0.3, 0.4}, {{0, 1}, {2, 3}});
    EXPECT_EQ(compute_lags(split).at(0, 3), kUnreachable);
    EXPECT_EQ(bfs_lags(split, 0)[2], kUnreachable);
}

TEST(Lags, MatchFloydWarshallOnRandomGraphs) {
    prop::for_all(40, 21, [](prop::Gen& g) {
        const auto n = static_cast<std::size_t>(g.integer(2, 60));
        const auto edges = random_edges(g, n, g.uniform(0.01, 0.2));
        const auto frame = make_frame(std::vector<double>(n, 0.5), edges);
        const auto want = oracle::floyd_warshall(n, edges);
        const auto got = compute_lags(frame, std::nullopt, kDefaultLagCacheCeiling,
                                      static_cast<unsigned>(g.integer(1, 3)));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const Lag expect = want[i][j] == std::numeric_limits<unsigned>::max()
                                       ? kUnreachable
                                       : static_cast<Lag>(want[i][j]);
                ASSERT_EQ(got.at(i, j), expect) << i << "," << j;
            }
    });
}

TEST(Lags, CapAndNeighborhoods) {
    std::vector<ArealFrame::Edge> edges;
    for (std::size_t i = 0; i + 1 < 8; ++i) edges.emplace_back(i, i + 1);
    const auto frame = make_frame(std::vector<double>(8, 0.5), edges);
    const auto capped = bfs_lags(frame, 0, Lag{2});
    EXPECT_EQ(capped[2], 2u);
    EXPECT_EQ(capped[3], kUnreachable);
    const auto hoods = build_neighborhoods(frame, 2);
    EXPECT_EQ(hoods.within[0].size(), 2u);
    EXPECT_EQ(hoods.within[4].size(), 4u);
}

TEST(Lags, CeilingIsEnforced) {
    const auto frame = make_frame(std::vector<double>(10, 0.5), {});
    EXPECT_THROW((void)compute_lags(frame, std::nullopt, 5), ArgumentError);
}

TEST(EmpiricalQuantile, Convention) {
    const std::vector<double> five{5, 3, 1, 2, 4};
    EXPECT_EQ(empirical_quantile(five, 0.5), 3.0);
    const std::vector<double> four{1, 2, 3, 4};
    EXPECT_EQ(empirical_quantile(four, 0.9), 4.0);
    const std::vector<double> flat(7, 0.25);
    EXPECT_EQ(empirical_quantile(flat, 0.13), 0.25);
}

TEST(EmpiricalQuantile, MonotoneAndAnElement) {
    prop::for_all(100, 22, [](prop::Gen& g) {
        std::vector<double> v(static_cast<std::size_t>(g.integer(1, 40)));
        for (auto& x : v) x = std::round(g.uniform(0, 10));
        double prev = -1;
        for (int i = 1; i < 100; ++i) {
            const double q = empirical_quantile(v, i / 100.0);
            EXPECT_NE(std::find(v.begin(), v.end(), q), v.end());
            EXPECT_GE(q, prev);
            prev = q;
        }
    });
}

TEST(MoransI, HandCases) {
    const auto pair = make_frame({0.0, 1.0}, {{0, 1}});
    EXPECT_NEAR(morans_i(pair, std::vector<double>{0.0, 1.0}), -1.0, 1e-15);
    // 3 x 3 checkerboard on the rook lattice.
    std::vector<ArealFrame::Edge> edges;
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) {
            if (c + 1 < 3) edges.emplace_back(r * 3 + c, r * 3 + c + 1);
            if (r + 1 < 3) edges.emplace_back(r * 3 + c, (r + 1) * 3 + c);
        }
    std::vector<double> board(9);
    for (std::size_t i = 0; i < 9; ++i) board[i] = static_cast<double>((i / 3 + i % 3) % 2);
    const auto grid = make_frame(board, edges);
    EXPECT_LT(morans_i(grid, board), 0.0);
    EXPECT_NEAR(morans_i(grid, board), oracle::morans_i(9, edges, board), 1e-12);
    EXPECT_THROW((void)morans_i(grid, std::vector<double>(9, 0.3)), DegenerateInputError);
}

TEST(MoransI, AffineInvarianceAndOracle) {
    prop::for_all(60, 23, [](prop::Gen& g) {
        const auto n = static_cast<std::size_t>(g.integer(3, 40));
        auto edges = random_edges(g, n, 0.2);
        edges.emplace_back(0, 1);
        std::vector<double> v(n);
        for (auto& x : v) x = g.uniform(0, 1);
        const auto frame = make_frame(v, edges);
        const double base = morans_i(frame, v);
        EXPECT_NEAR(base, oracle::morans_i(n, edges, v), 1e-10);
        const double a = g.coin() ? g.uniform(0.1, 10) : -g.uniform(0.1, 10);
        const double b = g.uniform(-5, 5);
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) w[i] = a * v[i] + b;
        EXPECT_NEAR(morans_i(frame, w), base, 1e-9);
    });
}

TEST(MeanLag, HandCases) {
    const auto path = make_frame({0.1, 0.2, 0.3}, {{0, 1}, {1, 2}});
    EXPECT_NEAR(mean_pairwise_lag(path).mean, 4.0 / 3.0, 1e-15);
    const auto k4 = make_frame({0.1, 0.2, 0.3, 0.4}, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
    EXPECT_DOUBLE_EQ(mean_pairwise_lag(k4).mean, 1.0);
    const auto isolated = make_frame({0.1, 0.2}, {});
    EXPECT_THROW((void)mean_pairwise_lag(isolated), DegenerateInputError);
    const auto split = make_frame({0.1, 0.2, 0.3, 0.4}, {{0, 1}, {2, 3}});
    const auto m = mean_pairwise_lag(split);
    EXPECT_EQ(m.finite_pairs, 2u);
    EXPECT_EQ(m.infinite_pairs, 4u);
    EXPECT_DOUBLE_EQ(m.mean, 1.0);
}

TEST(KendallTau, HandCasesAndOracle) {
    const std::vector<double> x{1, 2, 3, 4};
    const std::vector<double> rev{4, 3, 2, 1};
    EXPECT_DOUBLE_EQ(kendall_tau(x, x), 1.0);
    EXPECT_DOUBLE_EQ(kendall_tau(x, rev), -1.0);
    EXPECT_NEAR(kendall_tau(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}),
                1.0 / 3.0, 1e-15);
    prop::for_all(100, 24, [](prop::Gen& g) {
        const auto n = static_cast<std::size_t>(g.integer(2, 80));
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = std::round(g.uniform(0, 6));
            b[i] = std::round(g.uniform(0, 6));
        }
        a[0] = 0;
        a[1] = 6;
        b[0] = 0;
        b[1] = 6;
        EXPECT_NEAR(kendall_tau(a, b), oracle::kendall_tau_b(a, b), 1e-12);
    });
}

TEST(Census, StrictInequality) {
    const std::vector<double> p{0.1, 0.2, 0.2, 0.3};
    EXPECT_DOUBLE_EQ(census_exceedance(p, 0.2), 0.25);
}

TEST(Diagnostics, PathFixtureIsDeterministic) {
    const auto frame = load_frame(fixture("path4_population.csv"),
                                  fixture("path4_adjacency.csv")).frame;
    const auto d = compute_diagnostics(frame, 0.5);
    EXPECT_EQ(d.n_units, 4u);
    EXPECT_DOUBLE_EQ(d.threshold_c, 0.08);
    EXPECT_DOUBLE_EQ(d.census_theta, 0.5);
    ASSERT_TRUE(d.morans_i.value);
    EXPECT_NEAR(*d.morans_i.value,
                oracle::morans_i(4, {{0, 1}, {1, 2}, {2, 3}}, {0.02, 0.08, 0.15, 0.30}), 1e-12);
    EXPECT_NEAR(*d.kendall_tau.value, 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(*d.mean_lag.value, 10.0 / 6.0, 1e-12);
}

TEST(Diagnostics, ConstantPMakesMoranUnavailable) {
    const auto frame = load_frame(fixture("constant_p_population.csv"),
                                  fixture("path4_adjacency.csv")).frame;
    const auto d = compute_diagnostics(frame, 0.9);
    EXPECT_FALSE(d.morans_i.value);
    EXPECT_FALSE(d.morans_i.reason.empty());
}
