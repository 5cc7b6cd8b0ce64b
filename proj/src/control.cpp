#include "tlbc/control.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tlbc/errors.hpp"

namespace tlbc {

void PiGains::validate() const {
    if (!(kp > 0.0) || !(ki > 0.0) || !std::isfinite(kp) || !std::isfinite(ki)) {
        throw ConfigError(fmt::format("PI gains must be positive (kp = {}, ki = {})", kp, ki));
    }
}

PiStep pi_step(double error, const PiState& state, const PiGains& gains, DutyLimits limits,
               double dt, AntiWindup anti_windup) {
    const double integral_gain = gains.kp * gains.ki;
    double held = state.integrator;
    if (state.applied && !(*state.applied == gains)) {
        held *= (state.applied->kp * state.applied->ki) / integral_gain;
    }

    double integrator = held + error * dt;
    double u = gains.kp * error + integral_gain * integrator;
    if (anti_windup == AntiWindup::conditional_integration &&
        ((u > limits.upper && error > 0.0) || (u < limits.lower && error < 0.0))) {
        integrator = held;
        u = gains.kp * error + integral_gain * integrator;
    }

    PiStep out;
    out.unsaturated = u;
    out.duty = std::clamp(u, limits.lower, limits.upper);
    out.state.integrator = integrator;
    out.state.last_update = state.last_update + dt;
    out.state.applied = gains;
    return out;
}

double integrator_for_duty(double duty, const PiGains& gains) noexcept {
    return duty / (gains.kp * gains.ki);
}

GainTable table_iv() noexcept {
    return {{{5.24e-6, 1.42e6},
             {2.93e-6, 1.72e6},
             {1.64e-6, 1.21e6},
             {7.34e-7, 1.38e6},
             {2.60e-7, 1.18e6}}};
}

FuzzyPartition::FuzzyPartition(double overlap_halfwidth) : halfwidth_(overlap_halfwidth) {
    if (!(overlap_halfwidth > 0.0 && overlap_halfwidth <= 3.0)) {
        throw ConfigError(fmt::format("overlap halfwidth must lie in (0, 3] V (got {})", overlap_halfwidth));
    }
}

MembershipWeights membership_weights(double v, const FuzzyPartition& partition) noexcept {
    MembershipWeights w{};
    const double h = partition.overlap_halfwidth();
    // Internal boundaries sit at kSubintervalEdges[1..4].
    for (std::size_t k = 0; k < 4; ++k) {
        const double b = kSubintervalEdges[k + 1];
        if (v < b - h) {
            w[k] = 1.0;
            return w;
        }
        if (v <= b + h) {
            const double upper = (v - (b - h)) / (2.0 * h);
            w[k + 1] = upper;
            w[k] = 1.0 - upper;
            return w;
        }
    }
    w[4] = 1.0;
    return w;
}

PiGains blended_gains(double v, const FuzzyPartition& partition, const GainTable& table) noexcept {
    const auto w = membership_weights(v, partition);
    PiGains g;
    for (std::size_t k = 0; k < w.size(); ++k) {
        g.kp += w[k] * table[k].kp;
        g.ki += w[k] * table[k].ki;
    }
    return g;
}

TsfStep tsf_pi_step(double v_ref, double v_o, const PiState& state, const TsfConfig& config,
                    DutyLimits limits, double dt, AntiWindup anti_windup) {
    const double x = config.scheduling == SchedulingVariable::reference ? v_ref : v_o;
    const PiGains gains = blended_gains(x, config.partition, config.table);
    return {pi_step(v_ref - v_o, state, gains, limits, dt, anti_windup), gains};
}

}  // namespace tlbc
