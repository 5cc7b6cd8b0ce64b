#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tlbc/schedule.hpp"
#include "tlbc/time_series.hpp"

namespace tlbc {

// =============================================================================
// Converter description
// =============================================================================

/// Physical constants of the three-level boost converter plus integration
/// settings. Defaults are the 12 V / 500 uH / 2 x 100 uF / 24.7 ohm / 32 kHz
/// reference design.
struct ConverterParams {
    double v_i_nominal = 12.0;  ///< V
    double l = 500e-6;          ///< H
    double r = 8e-3;            ///< inductor ESR, ohm
    double c1 = 100e-6;         ///< F
    double c2 = 100e-6;         ///< F
    double r_load = 24.7;       ///< ohm
    double f_s = 32e3;          ///< switching frequency, Hz
    double dt = 1.0 / (32e3 * 256.0);  ///< integration step, s
    double d_max = 0.9;         ///< duty clamp

    /// Throws ConfigError when an invariant is violated.
    void validate() const;

    [[nodiscard]] double period() const noexcept { return 1.0 / f_s; }
};

struct ConverterState {
    double i_l = 0.0;   ///< inductor current, A
    double v_c1 = 0.0;  ///< V
    double v_c2 = 0.0;  ///< V

    [[nodiscard]] double v_o() const noexcept { return v_c1 + v_c2; }

    bool operator==(const ConverterState&) const = default;
};

struct SwitchState {
    bool m1_on = false;
    bool m2_on = false;

    bool operator==(const SwitchState&) const = default;
};

// =============================================================================
// Pure model functions
// =============================================================================

/// Trailing-edge sawtooth PWM, second carrier shifted by half a period.
/// The duty is clamped to [0, d_max].
[[nodiscard]] SwitchState pwm_gates(double t, double d, const ConverterParams& params) noexcept;

/// Mode equations of the four topologies (no diode blocking applied).
[[nodiscard]] ConverterState derivative(const ConverterState& s, SwitchState sw, double v_in,
                                        const ConverterParams& params) noexcept;

/// Cycle-averaged steady state of the ideal-diode converter with inductor ESR:
/// v_o = v_in (1 - d) / ((1 - d)^2 + r / R). Used as a starting guess.
[[nodiscard]] ConverterState averaged_steady_state(const ConverterParams& params, double d,
                                                   double v_in) noexcept;

/// Duty on the boosting branch that makes the averaged model output `v_o`.
/// Throws ConfigError if `v_o` is beyond the ESR-limited maximum.
[[nodiscard]] double averaged_duty_for(const ConverterParams& params, double v_o, double v_in);

// =============================================================================
// Fixed-step switched integrator
// =============================================================================

/// RK4 integrator over the switched circuit. Steps are split at every gate
/// edge so the applied duty is exact rather than quantized to dt. Running
/// integrals of each state are carried alongside so callers can form exact
/// cycle averages.
class SwitchedConverter {
public:
    SwitchedConverter(const ConverterParams& params, const ConverterState& initial,
                      double t0 = 0.0);

    /// Integrate to `t_target` with duty and input voltage held constant.
    /// Throws DivergenceError on a non-finite state.
    void advance(double t_target, double d, double v_in);

    [[nodiscard]] const ConverterState& state() const noexcept { return state_; }
    [[nodiscard]] double time() const noexcept { return t_; }

    /// Integral of (i_l, v_c1, v_c2) since construction.
    [[nodiscard]] const std::array<double, 3>& integrals() const noexcept { return integral_; }

    /// True once any requested duty fell outside [0, d_max].
    [[nodiscard]] bool duty_clamped() const noexcept { return clamped_; }

private:
    void rk4(double h, SwitchState sw, double v_in);
    [[nodiscard]] double next_gate_edge(double t, double d) const noexcept;

    ConverterParams params_;
    ConverterState state_;
    std::array<double, 3> integral_{};
    double t_;
    bool clamped_ = false;
};

// =============================================================================
// Simulation drivers
// =============================================================================

struct SimulationOptions {
    int samples_per_period = 1;
    bool cycle_average = true;  ///< average each column over the sample interval
    ConverterState initial_state{};
};

struct SimulationResult {
    TimeSeries series;
    bool duty_clamped = false;
};

/// Open-loop run with piecewise-constant input voltage and duty schedules.
/// Samples are stamped at the end of each sample interval.
[[nodiscard]] SimulationResult simulate(const ConverterParams& params, const Schedule& v_in,
                                        const Schedule& duty, double t_end,
                                        const SimulationOptions& options = {});

struct SettleOptions {
    double horizon = 0.5;        ///< simulated seconds before giving up
    double rel_tol = 1e-4;       ///< allowed change of the cycle average ...
    int window_periods = 10;     ///< ... across this many periods
    int hold_periods = 160;      ///< the criterion must hold this long (outlasts LC ringing)
    bool balance = true;         ///< remove residual capacitor imbalance once settled
    std::optional<ConverterState> initial;  ///< default: averaged_steady_state
};

struct SteadyState {
    ConverterState state;    ///< instantaneous state at a carrier period boundary
    ConverterState average;  ///< cycle average over the last period
    double v_o = 0.0;        ///< cycle-averaged output
    double elapsed = 0.0;    ///< simulated time needed
};

/// Runs the switched circuit at constant (d, v_in) until the cycle-averaged
/// output stops moving. The capacitor differential mode is practically
/// undamped, so with `balance` set the settled state is shifted to equal
/// average capacitor voltages and settled again. Throws NumericalError when
/// the horizon is exhausted.
[[nodiscard]] SteadyState settle(const ConverterParams& params, double d, double v_in,
                                 const SettleOptions& options = {});

[[nodiscard]] double steady_state_output(const ConverterParams& params, double d, double v_in,
                                         const SettleOptions& options = {});

struct CharacteristicPoint {
    double d = 0.0;
    double v_o = 0.0;
    bool ok = false;
    std::string error;
};

/// Steady output over a duty grid. Grid values above d_max are simulated
/// unclamped; each point carries its own status.
[[nodiscard]] std::vector<CharacteristicPoint> operating_characteristic(
    const ConverterParams& params, const std::vector<double>& d_grid, double v_in);

}  // namespace tlbc
