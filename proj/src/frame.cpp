#include "dustmns/frame.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <thread>

#include "dustmns/errors.hpp"

namespace dustmns {

namespace {

void validate_unit(const ArealUnit& u, std::size_t index) {
    const auto where = "unit " + std::to_string(index) + " ('" + u.id + "')";
    if (u.id.empty()) {
        throw ValidationError("unit " + std::to_string(index) + " has an empty id");
    }
    if (!(u.size_measure > 0.0) || !std::isfinite(u.size_measure)) {
        throw ValidationError(where + ": size measure must be positive and finite");
    }
    if (u.p_true && !(*u.p_true >= 0.0 && *u.p_true <= 1.0)) {
        throw ValidationError(where + ": p must lie in [0, 1]");
    }
    if (u.aux && !std::isfinite(*u.aux)) {
        throw ValidationError(where + ": aux must be finite");
    }
    if (u.n_individuals < 1) {
        throw ValidationError(where + ": number of individuals must be >= 1");
    }
}

// Runs fn(source) for every source, striding sources over `threads` workers.
template <typename Fn>
void for_each_source(std::size_t n, unsigned threads, Fn&& fn) {
    threads = std::max(1u, threads);
    if (threads == 1 || n < 2) {
        for (std::size_t s = 0; s < n; ++s) {
            fn(s);
        }
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        workers.emplace_back([&, w] {
            for (std::size_t s = w; s < n; s += threads) {
                fn(s);
            }
        });
    }
    for (auto& t : workers) {
        t.join();
    }
}

}  // namespace

ArealFrame::ArealFrame(std::vector<ArealUnit> units, std::span<const Edge> edges)
    : units_(std::move(units)), adjacency_(units_.size()) {
    index_.reserve(units_.size());
    for (std::size_t i = 0; i < units_.size(); ++i) {
        const auto& u = units_[i];
        validate_unit(u, i);
        if (!index_.emplace(u.id, i).second) {
            throw IntegrityError("duplicate unit id '" + u.id + "'");
        }
        has_p_ = has_p_ && u.p_true.has_value();
        has_aux_ = has_aux_ && u.aux.has_value();
    }
    for (const auto& [a, b] : edges) {
        if (a >= units_.size() || b >= units_.size()) {
            throw IntegrityError("edge references a unit index outside the frame");
        }
        if (a == b) {
            throw IntegrityError("self-loop on unit '" + units_[a].id + "'");
        }
        adjacency_[a].push_back(static_cast<std::uint32_t>(b));
        adjacency_[b].push_back(static_cast<std::uint32_t>(a));
    }
    for (auto& nbrs : adjacency_) {
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
        edge_count_ += nbrs.size();
    }
    edge_count_ /= 2;
    if (units_.empty()) {
        has_p_ = has_aux_ = false;
    }
}

ArealFrame ArealFrame::from_id_edges(std::vector<ArealUnit> units,
                                     std::span<const std::pair<std::string, std::string>> edges) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < units.size(); ++i) {
        index.emplace(units[i].id, i);
    }
    std::vector<Edge> resolved;
    resolved.reserve(edges.size());
    for (const auto& [a, b] : edges) {
        const auto ia = index.find(a);
        const auto ib = index.find(b);
        if (ia == index.end() || ib == index.end()) {
            throw IntegrityError("edge (" + a + ", " + b + ") references an unknown unit id");
        }
        resolved.emplace_back(ia->second, ib->second);
    }
    return ArealFrame(std::move(units), resolved);
}

std::optional<std::size_t> ArealFrame::index_of(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<double> ArealFrame::p_values() const {
    if (!has_p_) {
        throw DataError("frame has units without p");
    }
    std::vector<double> out;
    out.reserve(units_.size());
    for (const auto& u : units_) {
        out.push_back(*u.p_true);
    }
    return out;
}

std::vector<double> ArealFrame::aux_values() const {
    if (!has_aux_) {
        throw DataError("frame has units without aux");
    }
    std::vector<double> out;
    out.reserve(units_.size());
    for (const auto& u : units_) {
        out.push_back(*u.aux);
    }
    return out;
}

std::vector<Lag> bfs_lags(const ArealFrame& frame, std::size_t source, std::optional<Lag> max_lag) {
    if (source >= frame.size()) {
        throw ArgumentError("BFS source outside the frame");
    }
    std::vector<Lag> lag(frame.size(), kUnreachable);
    std::queue<std::size_t> frontier;
    lag[source] = 0;
    frontier.push(source);
    while (!frontier.empty()) {
        const auto u = frontier.front();
        frontier.pop();
        const Lag next = lag[u] + 1;
        if (max_lag && next > *max_lag) {
            continue;
        }
        for (const auto v : frame.neighbors(u)) {
            if (lag[v] == kUnreachable) {
                lag[v] = next;
                frontier.push(v);
            }
        }
    }
    return lag;
}

LagMatrix::LagMatrix(std::size_t n) : n_(n), data_(n * n, kStoredUnreachable) {}

void LagMatrix::set(std::size_t i, std::size_t j, Lag lag) {
    data_[i * n_ + j] = lag == kUnreachable ? kStoredUnreachable : static_cast<std::uint16_t>(lag);
}

LagMatrix compute_lags(const ArealFrame& frame, std::optional<Lag> max_lag, std::size_t ceiling,
                       unsigned threads) {
    const auto n = frame.size();
    if (n > ceiling || n >= std::numeric_limits<std::uint16_t>::max()) {
        throw ArgumentError("frame of " + std::to_string(n) +
                            " units exceeds the dense lag cache ceiling of " +
                            std::to_string(ceiling));
    }
    LagMatrix lags(n);
    // Each worker writes only the rows of its own sources.
    for_each_source(n, threads, [&](std::size_t s) {
        const auto row = bfs_lags(frame, s, max_lag);
        for (std::size_t j = 0; j < n; ++j) {
            lags.set(s, j, row[j]);
        }
    });
    return lags;
}

LagNeighborhoods build_neighborhoods(const ArealFrame& frame, Lag max_lag) {
    const auto n = frame.size();
    LagNeighborhoods hoods{max_lag, std::vector<std::vector<std::pair<std::uint32_t, Lag>>>(n)};
    std::vector<std::size_t> stamp(n, 0);
    std::vector<std::uint32_t> frontier;
    std::vector<std::uint32_t> next_frontier;
    for (std::size_t s = 0; s < n; ++s) {
        const auto mark = s + 1;
        stamp[s] = mark;
        frontier.assign(1, static_cast<std::uint32_t>(s));
        auto& out = hoods.within[s];
        for (Lag depth = 1; depth <= max_lag && !frontier.empty(); ++depth) {
            next_frontier.clear();
            for (const auto u : frontier) {
                for (const auto v : frame.neighbors(u)) {
                    if (stamp[v] != mark) {
                        stamp[v] = mark;
                        next_frontier.push_back(v);
                        out.emplace_back(v, depth);
                    }
                }
            }
            frontier.swap(next_frontier);
        }
    }
    return hoods;
}

double empirical_quantile(std::span<const double> values, double q) {
    if (values.empty()) {
        throw ArgumentError("empirical quantile of an empty sample");
    }
    if (!(q > 0.0 && q < 1.0)) {
        throw ArgumentError("quantile level must lie in (0, 1)");
    }
    const auto n = values.size();
    // Guard against q * n landing a hair above an integer.
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::vector<double> sorted(values.begin(), values.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                     sorted.end());
    return sorted[rank - 1];
}

double morans_i(const ArealFrame& frame, std::span<const double> values) {
    const auto n = frame.size();
    if (values.size() != n) {
        throw ArgumentError("Moran's I needs one value per unit");
    }
    if (frame.edge_count() == 0) {
        throw DegenerateInputError("Moran's I is undefined on an edgeless graph");
    }
    if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
        throw DegenerateInputError("Moran's I is undefined for a constant field");
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    double cross = 0.0;
    double squares = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double di = values[i] - mean;
        squares += di * di;
        double nbr_sum = 0.0;
        for (const auto j : frame.neighbors(i)) {
            nbr_sum += values[j] - mean;
        }
        cross += di * nbr_sum;
    }
    const double total_weight = 2.0 * static_cast<double>(frame.edge_count());
    return (static_cast<double>(n) / total_weight) * cross / squares;
}

MeanLag mean_pairwise_lag(const ArealFrame& frame, unsigned threads) {
    const auto n = frame.size();
    // Per-source integer partial sums keep the reduction exact and order-free.
    std::vector<std::uint64_t> lag_sum(n, 0);
    std::vector<std::uint64_t> finite(n, 0);
    for_each_source(n, threads, [&](std::size_t s) {
        const auto row = bfs_lags(frame, s);
        for (std::size_t j = s + 1; j < n; ++j) {
            if (row[j] != kUnreachable) {
                lag_sum[s] += row[j];
                ++finite[s];
            }
        }
    });
    const auto total_finite = std::accumulate(finite.begin(), finite.end(), std::uint64_t{0});
    const auto total_lag = std::accumulate(lag_sum.begin(), lag_sum.end(), std::uint64_t{0});
    if (total_finite == 0) {
        throw DegenerateInputError("no pair of units is connected; mean lag undefined");
    }
    const std::uint64_t pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    return {static_cast<double>(total_lag) / static_cast<double>(total_finite),
            static_cast<std::size_t>(total_finite), static_cast<std::size_t>(pairs - total_finite)};
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw ArgumentError("Kendall's tau needs equal-length inputs");
    }
    if (x.size() < 2) {
        throw ArgumentError("Kendall's tau needs at least two observations");
    }
    const auto n = x.size();
    long long concordant_minus_discordant = 0;
    long long ties_x = 0;
    long long ties_y = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j];
            const double dy = y[i] - y[j];
            if (dx == 0.0) {
                ++ties_x;
            }
            if (dy == 0.0) {
                ++ties_y;
            }
            if (dx != 0.0 && dy != 0.0) {
                concordant_minus_discordant += ((dx > 0.0) == (dy > 0.0)) ? 1 : -1;
            }
        }
    }
    const long long pairs = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
    const double denom = std::sqrt(static_cast<double>(pairs - ties_x)) *
                         std::sqrt(static_cast<double>(pairs - ties_y));
    if (denom == 0.0) {
        throw DegenerateInputError("Kendall's tau is undefined when one input is all ties");
    }
    return std::clamp(static_cast<double>(concordant_minus_discordant) / denom, -1.0, 1.0);
}

double census_exceedance(std::span<const double> p, double c) {
    if (p.empty()) {
        throw ArgumentError("census exceedance of an empty population");
    }
    const auto above = std::count_if(p.begin(), p.end(), [c](double v) { return v > c; });
    return static_cast<double>(above) / static_cast<double>(p.size());
}

FrameDiagnostics compute_diagnostics(const ArealFrame& frame, double quantile_q, unsigned threads) {
    const auto p = frame.p_values();
    FrameDiagnostics diag;
    diag.n_units = frame.size();
    diag.threshold_c = empirical_quantile(p, quantile_q);
    diag.census_theta = census_exceedance(p, diag.threshold_c);

    try {
        diag.morans_i.value = morans_i(frame, p);
    } catch (const DegenerateInputError& e) {
        diag.morans_i.reason = e.what();
    }
    if (frame.has_aux()) {
        try {
            diag.kendall_tau.value = kendall_tau(p, frame.aux_values());
        } catch (const DegenerateInputError& e) {
            diag.kendall_tau.reason = e.what();
        }
    } else {
        diag.kendall_tau.reason = "aux missing for some units";
    }
    try {
        diag.mean_lag.value = mean_pairwise_lag(frame, threads).mean;
    } catch (const DegenerateInputError& e) {
        diag.mean_lag.reason = e.what();
    }
    return diag;
}

}  // namespace dustmns
