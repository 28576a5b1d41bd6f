#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "dustmns/frame.hpp"

namespace dustmns {

/// Generator used throughout; always passed explicitly.
using Rng = std::mt19937_64;

/// Stream seed for (master, stream, index) by chained SplitMix64 mixing.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                        std::uint64_t index) noexcept;

/// Generator seeded through std::seed_seq from a 64-bit seed.
[[nodiscard]] Rng make_rng(std::uint64_t seed);

/// Which unit field supplies the PPS size measure M_i.
enum class SizeField { size_measure, n_individuals, equal };

struct DustParams {
    double eta0 = 0.0;  ///< first-lag spatial autocorrelation, in [0, 1)
    SizeField size_field = SizeField::size_measure;
    /// Lags above this cap are treated as unreachable (penalty factor 1). nullopt: no cap.
    std::optional<Lag> max_lag = Lag{10};
};

/// Selected units (frame indices) in draw order, and their partition into sets.
struct SampleDraw {
    std::vector<std::size_t> order;
    std::vector<std::vector<std::size_t>> sets;
    std::optional<std::uint64_t> seed_trace;
};

/// Uniform sample of n units without replacement; sets are singletons in draw order.
///
/// @throws ArgumentError unless 1 <= n <= N.
[[nodiscard]] SampleDraw srs_draw(const ArealFrame& frame, std::size_t n, Rng& rng);

/// Sequential pps-DUST sampler.
///
/// Unit i starts with weight M_i; each selected unit r multiplies the weight of every
/// unselected unit i by (1 - eta0^l_ir), and the next unit is drawn with probability
/// proportional to the current weights. Only units within the lag cap are touched, so a
/// draw costs O(n_total * (sqrt(N) + neighborhood size)).
class DustSampler {
public:
    DustSampler(const ArealFrame& frame, DustParams params);

    [[nodiscard]] const DustParams& params() const noexcept { return params_; }
    [[nodiscard]] std::size_t frame_size() const noexcept { return sizes_.size(); }

    /// Weight of every unit given the already selected units; selected units get 0.
    [[nodiscard]] std::vector<double> weights(std::span<const std::size_t> selected) const;

    /// weights() normalized to sum to one.
    [[nodiscard]] std::vector<double> selection_probabilities(
        std::span<const std::size_t> selected) const;

    /// Draws n_total distinct units. Sets are singletons in draw order.
    ///
    /// @throws ArgumentError if n_total exceeds the frame size.
    /// @throws DegenerateInputError if all remaining weights vanish.
    [[nodiscard]] SampleDraw draw(std::size_t n_total, Rng& rng) const;

private:
    [[nodiscard]] double penalty(Lag lag) const;

    DustParams params_;
    std::vector<double> sizes_;
    std::vector<double> penalty_by_lag_;  // index = lag, 1 - eta0^lag
    LagNeighborhoods hoods_;
    const ArealFrame* uncapped_frame_ = nullptr;  // set when max_lag is nullopt
};

/// DUST weights w_i = M_i * prod_{r in selected} (1 - eta0^l_ir); selected units get 0.
[[nodiscard]] std::vector<double> dust_weights(const ArealFrame& frame,
                                               std::span<const std::size_t> selected,
                                               const DustParams& params);

[[nodiscard]] SampleDraw dust_draw(const ArealFrame& frame, std::size_t n_total,
                                   const DustParams& params, Rng& rng);

/// Uniformly random partition of draw_order into n blocks of size k.
///
/// @throws ArgumentError if draw_order.size() != n * k.
[[nodiscard]] std::vector<std::vector<std::size_t>> partition_sets(
    std::span<const std::size_t> draw_order, std::size_t n, std::size_t k, Rng& rng);

}  // namespace dustmns
