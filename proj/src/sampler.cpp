#include "dustmns/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dustmns/errors.hpp"

namespace dustmns {

namespace {

std::vector<std::vector<std::size_t>> singletons(std::span<const std::size_t> order) {
    std::vector<std::vector<std::size_t>> sets;
    sets.reserve(order.size());
    for (const auto i : order) {
        sets.push_back({i});
    }
    return sets;
}

double unit_size(const ArealUnit& u, SizeField field) {
    switch (field) {
        case SizeField::size_measure:
            return u.size_measure;
        case SizeField::n_individuals:
            return static_cast<double>(u.n_individuals);
        case SizeField::equal:
            return 1.0;
    }
    return 1.0;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index) noexcept {
    return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

Rng make_rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Rng(seq);
}

SampleDraw srs_draw(const ArealFrame& frame, std::size_t n, Rng& rng) {
    const auto total = frame.size();
    if (n < 1 || n > total) {
        throw ArgumentError("SRS needs 1 <= n <= N (n = " + std::to_string(n) +
                            ", N = " + std::to_string(total) + ")");
    }
    std::vector<std::size_t> pool(total);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, total - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(n);
    SampleDraw draw;
    draw.sets = singletons(pool);
    draw.order = std::move(pool);
    return draw;
}

DustSampler::DustSampler(const ArealFrame& frame, DustParams params)
    : params_(params), uncapped_frame_(nullptr) {
    if (!(params_.eta0 >= 0.0 && params_.eta0 < 1.0)) {
        throw ArgumentError("eta0 must lie in [0, 1), got " + std::to_string(params_.eta0));
    }
    sizes_.reserve(frame.size());
    for (const auto& u : frame.units()) {
        sizes_.push_back(unit_size(u, params_.size_field));
    }
    if (params_.eta0 == 0.0) {
        return;  // every penalty factor is 1
    }
    if (params_.max_lag) {
        hoods_ = build_neighborhoods(frame, *params_.max_lag);
        penalty_by_lag_.resize(static_cast<std::size_t>(*params_.max_lag) + 1, 1.0);
        for (Lag l = 1; l <= *params_.max_lag; ++l) {
            penalty_by_lag_[l] = 1.0 - std::pow(params_.eta0, static_cast<double>(l));
        }
    } else {
        uncapped_frame_ = &frame;
    }
}

double DustSampler::penalty(Lag lag) const {
    if (lag == kUnreachable || params_.eta0 == 0.0) {
        return 1.0;
    }
    if (lag < penalty_by_lag_.size()) {
        return penalty_by_lag_[lag];
    }
    return 1.0 - std::pow(params_.eta0, static_cast<double>(lag));
}

std::vector<double> DustSampler::weights(std::span<const std::size_t> selected) const {
    std::vector<double> w = sizes_;
    std::vector<char> taken(w.size(), 0);
    for (const auto r : selected) {
        if (r >= w.size() || taken[r]) {
            throw ArgumentError("selected units must be distinct frame indices");
        }
        taken[r] = 1;
        if (params_.eta0 == 0.0) {
            continue;
        }
        if (uncapped_frame_ != nullptr) {
            const auto lags = bfs_lags(*uncapped_frame_, r);
            for (std::size_t i = 0; i < w.size(); ++i) {
                if (i != r) {
                    w[i] *= penalty(lags[i]);
                }
            }
        } else {
            for (const auto& [i, lag] : hoods_.within[r]) {
                w[i] *= penalty(lag);
            }
        }
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (taken[i]) {
            w[i] = 0.0;
        }
    }
    return w;
}

std::vector<double> DustSampler::selection_probabilities(
    std::span<const std::size_t> selected) const {
    auto w = weights(selected);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(total > 0.0)) {
        throw DegenerateInputError("all remaining DUST weights are zero");
    }
    for (auto& v : w) {
        v /= total;
    }
    return w;
}

SampleDraw DustSampler::draw(std::size_t n_total, Rng& rng) const {
    const auto n = sizes_.size();
    if (n_total > n) {
        throw ArgumentError("cannot draw " + std::to_string(n_total) + " units from a frame of " +
                            std::to_string(n));
    }
    // Two-level cumulative-sum inversion: block sums, then units within the block.
    const auto block = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(double(n))));
    const auto n_blocks = (n + block - 1) / block;
    std::vector<double> w = sizes_;
    std::vector<double> block_sum(n_blocks, 0.0);
    std::vector<char> dirty(n_blocks, 0);
    std::vector<std::size_t> dirty_list;
    const auto resum = [&](std::size_t b) {
        const auto lo = b * block;
        const auto hi = std::min(n, lo + block);
        block_sum[b] = std::accumulate(w.begin() + static_cast<std::ptrdiff_t>(lo),
                                       w.begin() + static_cast<std::ptrdiff_t>(hi), 0.0);
    };
    const auto touch = [&](std::size_t i) {
        const auto b = i / block;
        if (!dirty[b]) {
            dirty[b] = 1;
            dirty_list.push_back(b);
        }
    };
    for (std::size_t b = 0; b < n_blocks; ++b) {
        resum(b);
    }

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    SampleDraw out;
    out.order.reserve(n_total);
    for (std::size_t step = 0; step < n_total; ++step) {
        const double total = std::accumulate(block_sum.begin(), block_sum.end(), 0.0);
        if (!(total > 0.0)) {
            throw DegenerateInputError("all remaining DUST weights are zero");
        }
        const double target = unif(rng) * total;
        double acc = 0.0;
        std::size_t b = 0;
        while (b + 1 < n_blocks && acc + block_sum[b] <= target) {
            acc += block_sum[b];
            ++b;
        }
        // Floating slack can leave the scan on an exhausted block; back up to a live one.
        while (block_sum[b] <= 0.0 && b > 0) {
            --b;
        }
        const auto lo = b * block;
        const auto hi = std::min(n, lo + block);
        std::size_t chosen = hi;
        std::size_t last_live = hi;
        for (std::size_t i = lo; i < hi; ++i) {
            if (w[i] <= 0.0) {
                continue;
            }
            last_live = i;
            acc += w[i];
            if (acc > target) {
                chosen = i;
                break;
            }
        }
        if (chosen == hi) {
            chosen = last_live;
        }
        if (chosen == hi) {
            throw DegenerateInputError("DUST block scan found no live unit");
        }

        out.order.push_back(chosen);
        w[chosen] = 0.0;
        touch(chosen);
        if (params_.eta0 > 0.0) {
            if (uncapped_frame_ != nullptr) {
                const auto lags = bfs_lags(*uncapped_frame_, chosen);
                for (std::size_t i = 0; i < n; ++i) {
                    if (w[i] > 0.0 && lags[i] != kUnreachable) {
                        w[i] *= penalty(lags[i]);
                        touch(i);
                    }
                }
            } else {
                for (const auto& [i, lag] : hoods_.within[chosen]) {
                    if (w[i] > 0.0) {
                        w[i] *= penalty(lag);
                        touch(i);
                    }
                }
            }
        }
        for (const auto d : dirty_list) {
            resum(d);
            dirty[d] = 0;
        }
        dirty_list.clear();
    }
    out.sets = singletons(out.order);
    return out;
}

std::vector<double> dust_weights(const ArealFrame& frame, std::span<const std::size_t> selected,
                                 const DustParams& params) {
    return DustSampler(frame, params).weights(selected);
}

SampleDraw dust_draw(const ArealFrame& frame, std::size_t n_total, const DustParams& params,
                     Rng& rng) {
    return DustSampler(frame, params).draw(n_total, rng);
}

std::vector<std::vector<std::size_t>> partition_sets(std::span<const std::size_t> draw_order,
                                                     std::size_t n, std::size_t k, Rng& rng) {
    if (n == 0 || k == 0 || draw_order.size() != n * k) {
        throw ArgumentError("partition needs exactly n * k units (got " +
                            std::to_string(draw_order.size()) + " for n = " + std::to_string(n) +
                            ", k = " + std::to_string(k) + ")");
    }
    std::vector<std::size_t> shuffled(draw_order.begin(), draw_order.end());
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::vector<std::vector<std::size_t>> sets(n);
    for (std::size_t s = 0; s < n; ++s) {
        sets[s].assign(shuffled.begin() + static_cast<std::ptrdiff_t>(s * k),
                       shuffled.begin() + static_cast<std::ptrdiff_t>((s + 1) * k));
    }
    return sets;
}

}  // namespace dustmns
