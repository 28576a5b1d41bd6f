#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dustmns {

/// One areal unit of the finite population.
struct ArealUnit {
    std::string id;
    double size_measure = 1.0;     ///< M_i, strictly positive
    std::optional<double> p_true;  ///< latent prevalence in [0, 1]
    std::optional<double> aux;     ///< ranking concomitant
    std::int64_t n_individuals = 1;  ///< N_i
};

/// Graph distance in adjacency steps.
using Lag = std::uint32_t;
inline constexpr Lag kUnreachable = std::numeric_limits<Lag>::max();

/// Finite population of areal units plus their (undirected, simple) contiguity graph.
///
/// Immutable after construction; safe to share between concurrent readers.
class ArealFrame {
public:
    using Edge = std::pair<std::size_t, std::size_t>;

    /// Validates the units and edges. Duplicate edges are merged.
    ///
    /// @throws IntegrityError on duplicate ids, self-loops or out-of-range endpoints.
    /// @throws ValidationError when a unit violates its field invariants.
    ArealFrame(std::vector<ArealUnit> units, std::span<const Edge> edges);

    /// Same as above with edges given by unit id.
    static ArealFrame from_id_edges(std::vector<ArealUnit> units,
                                    std::span<const std::pair<std::string, std::string>> edges);

    [[nodiscard]] std::size_t size() const noexcept { return units_.size(); }
    [[nodiscard]] const ArealUnit& unit(std::size_t i) const { return units_.at(i); }
    [[nodiscard]] const std::vector<ArealUnit>& units() const noexcept { return units_; }
    [[nodiscard]] std::span<const std::uint32_t> neighbors(std::size_t i) const {
        return adjacency_.at(i);
    }
    [[nodiscard]] std::size_t edge_count() const noexcept { return edge_count_; }
    [[nodiscard]] std::optional<std::size_t> index_of(const std::string& id) const;

    /// True when every unit carries the field.
    [[nodiscard]] bool has_p() const noexcept { return has_p_; }
    [[nodiscard]] bool has_aux() const noexcept { return has_aux_; }

    /// @throws DataError if some unit lacks p_true (resp. aux).
    [[nodiscard]] std::vector<double> p_values() const;
    [[nodiscard]] std::vector<double> aux_values() const;

private:
    std::vector<ArealUnit> units_;
    std::vector<std::vector<std::uint32_t>> adjacency_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t edge_count_ = 0;
    bool has_p_ = true;
    bool has_aux_ = true;
};

/// Breadth-first lags from one source. Units farther than max_lag (or in another
/// component) get kUnreachable.
[[nodiscard]] std::vector<Lag> bfs_lags(const ArealFrame& frame, std::size_t source,
                                        std::optional<Lag> max_lag = std::nullopt);

/// Dense symmetric lag matrix (16-bit storage).
class LagMatrix {
public:
    LagMatrix() = default;
    explicit LagMatrix(std::size_t n);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] Lag at(std::size_t i, std::size_t j) const {
        const auto v = data_[i * n_ + j];
        return v == kStoredUnreachable ? kUnreachable : v;
    }
    void set(std::size_t i, std::size_t j, Lag lag);

private:
    static constexpr std::uint16_t kStoredUnreachable = std::numeric_limits<std::uint16_t>::max();
    std::size_t n_ = 0;
    std::vector<std::uint16_t> data_;
};

inline constexpr std::size_t kDefaultLagCacheCeiling = 5000;

/// All-pairs lags by one BFS per source. Sources are spread over `threads` workers;
/// the result does not depend on the thread count.
///
/// @throws ArgumentError when the frame exceeds `ceiling` units.
[[nodiscard]] LagMatrix compute_lags(const ArealFrame& frame,
                                     std::optional<Lag> max_lag = std::nullopt,
                                     std::size_t ceiling = kDefaultLagCacheCeiling,
                                     unsigned threads = 1);

/// Sparse truncated lags: for each unit, the other units within max_lag and their lags.
struct LagNeighborhoods {
    Lag max_lag = 0;
    std::vector<std::vector<std::pair<std::uint32_t, Lag>>> within;
};

[[nodiscard]] LagNeighborhoods build_neighborhoods(const ArealFrame& frame, Lag max_lag);

/// Lower empirical order statistic x_(ceil(q n)).
[[nodiscard]] double empirical_quantile(std::span<const double> values, double q);

/// Global Moran's I with binary, row-unstandardized contiguity weights.
[[nodiscard]] double morans_i(const ArealFrame& frame, std::span<const double> values);

struct MeanLag {
    double mean = 0.0;
    std::size_t finite_pairs = 0;
    std::size_t infinite_pairs = 0;
};

/// Average finite lag over unordered pairs; pairs in different components are counted
/// separately and excluded from the mean.
[[nodiscard]] MeanLag mean_pairwise_lag(const ArealFrame& frame, unsigned threads = 1);

/// Kendall's tau-b.
[[nodiscard]] double kendall_tau(std::span<const double> x, std::span<const double> y);

/// Diagnostic value that may be unavailable for a given frame.
struct Diagnostic {
    std::optional<double> value;
    std::string reason;  ///< why value is missing
};

struct FrameDiagnostics {
    std::size_t n_units = 0;
    double threshold_c = 0.0;
    double census_theta = 0.0;
    Diagnostic morans_i;
    Diagnostic kendall_tau;
    Diagnostic mean_lag;
};

/// Fraction of values strictly above c.
[[nodiscard]] double census_exceedance(std::span<const double> p, double c);

/// Threshold at the q-th empirical quantile of p, census theta, and spatial/ranking summaries.
///
/// @throws DataError if the frame has no p_true values.
[[nodiscard]] FrameDiagnostics compute_diagnostics(const ArealFrame& frame, double quantile_q,
                                                   unsigned threads = 1);

}  // namespace dustmns
