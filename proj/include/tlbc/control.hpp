#pragma once

#include <array>
#include <optional>

#include "tlbc/subinterval.hpp"

namespace tlbc {

// =============================================================================
// PI controller, standard form  C(s) = kp (1 + ki / s)
// =============================================================================

/// Gains of the standard-form PI. The integral path gain is kp * ki.
struct PiGains {
    double kp = 0.0;  ///< duty per volt
    double ki = 0.0;  ///< 1/s

    /// Throws ConfigError unless both gains are positive and finite.
    void validate() const;

    bool operator==(const PiGains&) const = default;
};

struct PiState {
    double integrator = 0.0;   ///< integral of the error, V*s
    double last_update = 0.0;  ///< s
    /// Gains used on the previous update; see pi_step.
    std::optional<PiGains> applied;
};

struct DutyLimits {
    double lower = 0.0;
    double upper = 0.9;
};

enum class AntiWindup {
    conditional_integration,
    none,  ///< output clamping only; kept for comparison runs
};

struct PiStep {
    double duty = 0.0;         ///< clamped to the limits
    double unsaturated = 0.0;  ///< kp * error + kp * ki * integrator
    PiState state;
};

/// One controller update.
///
/// The integrator advances by error * dt unless conditional integration is
/// active and the unsaturated output lies beyond a limit with the error
/// pushing further past it; then it is held.
///
/// When the gains differ from `state.applied` the integrator is rescaled so
/// that kp * ki * integrator is unchanged, which keeps the duty continuous
/// under gain scheduling. With unchanged gains no rescaling happens.
[[nodiscard]] PiStep pi_step(double error, const PiState& state, const PiGains& gains,
                             DutyLimits limits, double dt,
                             AntiWindup anti_windup = AntiWindup::conditional_integration);

/// Integrator value for which the integral path alone outputs `duty`.
[[nodiscard]] double integrator_for_duty(double duty, const PiGains& gains) noexcept;

// =============================================================================
// Gain table and fuzzy partition
// =============================================================================

using GainTable = std::array<PiGains, 5>;

/// Local PI gains designed for S1..S5.
[[nodiscard]] GainTable table_iv() noexcept;

/// Five trapezoidal sets over the output-voltage universe [12, 57] V with
/// linear crossovers of +/- overlap_halfwidth around 18, 24, 31 and 40 V.
class FuzzyPartition {
public:
    /// Halfwidth must lie in (0, 3] so crossovers never touch.
    explicit FuzzyPartition(double overlap_halfwidth = 1.0);

    [[nodiscard]] double overlap_halfwidth() const noexcept { return halfwidth_; }
    [[nodiscard]] static constexpr double universe_min() noexcept { return kSubintervalEdges.front(); }
    [[nodiscard]] static constexpr double universe_max() noexcept { return kSubintervalEdges.back(); }

private:
    double halfwidth_;
};

using MembershipWeights = std::array<double, 5>;

/// Partition-of-unity weights; inputs outside the universe saturate to the
/// edge sets.
[[nodiscard]] MembershipWeights membership_weights(double v, const FuzzyPartition& partition) noexcept;

/// Zero-order Sugeno blend: kp = sum w_k kp_k, ki = sum w_k ki_k.
[[nodiscard]] PiGains blended_gains(double v, const FuzzyPartition& partition,
                                    const GainTable& table) noexcept;

// =============================================================================
// TSF-PI
// =============================================================================

enum class SchedulingVariable { reference, output };

struct TsfConfig {
    FuzzyPartition partition{};
    GainTable table = table_iv();
    SchedulingVariable scheduling = SchedulingVariable::reference;
};

struct TsfStep {
    PiStep pi;
    PiGains gains;  ///< gains active for this update
};

/// Blends gains at the scheduling variable and runs pi_step on v_ref - v_o.
[[nodiscard]] TsfStep tsf_pi_step(double v_ref, double v_o, const PiState& state,
                                  const TsfConfig& config, DutyLimits limits, double dt,
                                  AntiWindup anti_windup = AntiWindup::conditional_integration);

}  // namespace tlbc
