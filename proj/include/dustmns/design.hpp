#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dustmns/frame.hpp"
#include "dustmns/sampler.hpp"

namespace dustmns {

/// How the judged maximum of a set is identified.
///   perfect   - by p_true
///   auxiliary - by the aux concomitant
///   random    - uniformly at random (no ranking information; tau = 0 reference)
enum class RankingMode { perfect, auxiliary, random };

enum class DesignKind { srs, dust_srs, dust_mns };

/// Within-unit measurement.
///   fraction - m_i = max(1, floor(f_m * N_i)), X_i ~ Binomial(m_i, p_i)
///   absolute - m_i = min(m, N_i)
///   exact    - indicator 1(p_i > c), no binomial noise
struct MeasurementSpec {
    enum class Kind { fraction, absolute, exact };
    Kind kind = Kind::fraction;
    double f_m = 1.0;
    std::int64_t m = 1;
};

struct DesignConfig {
    DesignKind kind = DesignKind::dust_mns;
    std::size_t n = 1;
    std::size_t k = 1;  ///< ignored (treated as 1) for srs and dust_srs
    DustParams dust;
    RankingMode ranking = RankingMode::perfect;
    MeasurementSpec measurement;
    double threshold_c = 0.5;
};

struct Measurement {
    std::int64_t m = 0;  ///< 0 in exact mode
    std::int64_t x = 0;
    bool exceeds = false;
};

struct MeasuredUnit {
    std::size_t index = 0;
    Measurement measurement;
};

/// Per-set exceedance indicators of one survey.
struct ExceedanceData {
    std::vector<std::uint8_t> indicators;
    std::size_t r_n = 0;
    std::size_t n = 0;
    std::size_t k = 1;
    std::vector<MeasuredUnit> measured;
    SampleDraw draw;
};

/// One nominee per set. Ties among maxima are broken uniformly at random.
///
/// @throws DataError when a set member lacks the field the ranking mode needs.
[[nodiscard]] std::vector<std::size_t> nominate(const std::vector<std::vector<std::size_t>>& sets,
                                                const ArealFrame& frame, RankingMode mode,
                                                Rng& rng);

/// Measures one unit and forms the strict exceedance indicator X/m > c.
///
/// @throws DataError if the unit has no p_true.
[[nodiscard]] Measurement measure_unit(const ArealUnit& unit, const MeasurementSpec& spec,
                                       double threshold_c, Rng& rng);

/// A reusable survey: precomputes the DUST neighborhoods once, then runs independent
/// surveys on demand. Holds a reference to the frame.
class SurveyDesign {
public:
    SurveyDesign(const ArealFrame& frame, DesignConfig config);

    [[nodiscard]] const DesignConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::size_t set_size() const noexcept;

    [[nodiscard]] ExceedanceData run(Rng& rng) const;

private:
    const ArealFrame* frame_;
    DesignConfig config_;
    std::optional<DustSampler> sampler_;
};

/// Selection, partition, nomination and measurement for one survey.
[[nodiscard]] ExceedanceData run_design(const ArealFrame& frame, const DesignConfig& config,
                                        Rng& rng);

[[nodiscard]] std::string to_string(DesignKind kind);
[[nodiscard]] std::string to_string(RankingMode mode);

}  // namespace dustmns
