#include "dustmns/design.hpp"

#include <cmath>
#include <random>

#include "dustmns/errors.hpp"

namespace dustmns {

namespace {

double ranking_key(const ArealUnit& u, RankingMode mode) {
    if (mode == RankingMode::perfect) {
        if (!u.p_true) {
            throw DataError("perfect ranking needs p for unit '" + u.id + "'");
        }
        return *u.p_true;
    }
    if (!u.aux) {
        throw DataError("auxiliary ranking needs aux for unit '" + u.id + "'");
    }
    return *u.aux;
}

}  // namespace

std::vector<std::size_t> nominate(const std::vector<std::vector<std::size_t>>& sets,
                                  const ArealFrame& frame, RankingMode mode, Rng& rng) {
    std::vector<std::size_t> nominees;
    nominees.reserve(sets.size());
    std::vector<std::size_t> tied;
    for (const auto& set : sets) {
        if (set.empty()) {
            throw ArgumentError("cannot nominate from an empty set");
        }
        if (set.size() == 1) {
            nominees.push_back(set.front());
            continue;
        }
        if (mode == RankingMode::random) {
            std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
            nominees.push_back(set[pick(rng)]);
            continue;
        }
        double best = -std::numeric_limits<double>::infinity();
        tied.clear();
        for (const auto idx : set) {
            const double key = ranking_key(frame.unit(idx), mode);
            if (key > best) {
                best = key;
                tied.assign(1, idx);
            } else if (key == best) {
                tied.push_back(idx);
            }
        }
        if (tied.size() == 1) {
            nominees.push_back(tied.front());
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
            nominees.push_back(tied[pick(rng)]);
        }
    }
    return nominees;
}

Measurement measure_unit(const ArealUnit& unit, const MeasurementSpec& spec, double threshold_c,
                         Rng& rng) {
    if (!unit.p_true) {
        throw DataError("measurement needs p for unit '" + unit.id + "'");
    }
    const double p = *unit.p_true;
    if (spec.kind == MeasurementSpec::Kind::exact) {
        return {0, 0, p > threshold_c};
    }
    std::int64_t m = 1;
    if (spec.kind == MeasurementSpec::Kind::fraction) {
        if (!(spec.f_m > 0.0 && spec.f_m <= 1.0)) {
            throw ArgumentError("measurement fraction f_m must lie in (0, 1]");
        }
        m = std::max<std::int64_t>(
            1, static_cast<std::int64_t>(std::floor(spec.f_m * static_cast<double>(unit.n_individuals))));
    } else {
        if (spec.m < 1) {
            throw ArgumentError("absolute measurement size must be >= 1");
        }
        m = std::min(spec.m, unit.n_individuals);
    }
    std::binomial_distribution<std::int64_t> binom(m, p);
    const auto x = binom(rng);
    return {m, x, static_cast<double>(x) / static_cast<double>(m) > threshold_c};
}

SurveyDesign::SurveyDesign(const ArealFrame& frame, DesignConfig config)
    : frame_(&frame), config_(std::move(config)) {
    if (config_.n < 1) {
        throw ArgumentError("design needs n >= 1");
    }
    if (config_.kind == DesignKind::dust_mns) {
        if (config_.k < 1) {
            throw ArgumentError("design needs k >= 1");
        }
        if (config_.ranking == RankingMode::auxiliary && !frame.has_aux()) {
            throw DataError("auxiliary ranking needs aux for every unit");
        }
        if (config_.ranking == RankingMode::perfect && !frame.has_p()) {
            throw DataError("perfect ranking needs p for every unit");
        }
    } else {
        config_.k = 1;
    }
    if (config_.n * config_.k > frame.size()) {
        throw ArgumentError("design needs n * k <= N");
    }
    if (!frame.has_p()) {
        throw DataError("measurement needs p for every unit");
    }
    if (config_.kind != DesignKind::srs) {
        sampler_.emplace(frame, config_.dust);
    }
}

std::size_t SurveyDesign::set_size() const noexcept { return config_.k; }

ExceedanceData SurveyDesign::run(Rng& rng) const {
    ExceedanceData data;
    data.n = config_.n;
    data.k = config_.k;
    std::vector<std::size_t> nominees;
    switch (config_.kind) {
        case DesignKind::srs:
            data.draw = srs_draw(*frame_, config_.n, rng);
            nominees = data.draw.order;
            break;
        case DesignKind::dust_srs:
            data.draw = sampler_->draw(config_.n, rng);
            nominees = data.draw.order;
            break;
        case DesignKind::dust_mns:
            data.draw = sampler_->draw(config_.n * config_.k, rng);
            data.draw.sets = partition_sets(data.draw.order, config_.n, config_.k, rng);
            nominees = nominate(data.draw.sets, *frame_, config_.ranking, rng);
            break;
    }
    data.indicators.reserve(nominees.size());
    data.measured.reserve(nominees.size());
    for (const auto idx : nominees) {
        const auto meas = measure_unit(frame_->unit(idx), config_.measurement,
                                       config_.threshold_c, rng);
        data.indicators.push_back(meas.exceeds ? 1 : 0);
        data.r_n += meas.exceeds ? 1 : 0;
        data.measured.push_back({idx, meas});
    }
    return data;
}

ExceedanceData run_design(const ArealFrame& frame, const DesignConfig& config, Rng& rng) {
    return SurveyDesign(frame, config).run(rng);
}

std::string to_string(DesignKind kind) {
    switch (kind) {
        case DesignKind::srs:
            return "srs";
        case DesignKind::dust_srs:
            return "dust_srs";
        case DesignKind::dust_mns:
            return "dust_mns";
    }
    return "unknown";
}

std::string to_string(RankingMode mode) {
    switch (mode) {
        case RankingMode::perfect:
            return "perfect";
        case RankingMode::auxiliary:
            return "auxiliary";
        case RankingMode::random:
            return "random";
    }
    return "unknown";
}

}  // namespace dustmns
