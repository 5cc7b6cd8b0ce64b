#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tlbc/circuit.hpp"
#include "tlbc/control.hpp"
#include "tlbc/schedule.hpp"
#include "tlbc/time_series.hpp"

namespace tlbc {

// =============================================================================
// Scenario description
// =============================================================================

struct OpenLoopController {
    Schedule duty = Schedule::constant(0.0);
};

struct FixedPiController {
    PiGains gains;
    std::optional<Subinterval> subinterval;  ///< set when taken from the gain table
};

struct TsfPiController {
    TsfConfig config;
};

using ControllerSpec = std::variant<OpenLoopController, FixedPiController, TsfPiController>;

[[nodiscard]] FixedPiController fixed_pi(Subinterval s);

struct Scenario {
    std::string name;
    double t_end = 0.5;
    Schedule v_in_schedule = Schedule::constant(12.0);
    Schedule v_ref_schedule = Schedule::constant(15.0);
    ControllerSpec controller = TsfPiController{};
    /// nullopt means "auto-steady": start settled at the first schedule values.
    std::optional<ConverterState> initial_state;
    AntiWindup anti_windup = AntiWindup::conditional_integration;
    /// Figure or table this scenario reproduces; empty for user scenarios.
    std::string reproduces;

    /// Throws ConfigError when t_end or the controller is invalid.
    void validate() const;

    /// Sorted change instants of either schedule (excluding t = 0); for open
    /// loop the duty schedule contributes too.
    [[nodiscard]] std::vector<double> events() const;
};

// =============================================================================
// Runner
// =============================================================================

struct RunOptions {
    int samples_per_period = 1;
    bool cycle_average = true;
};

struct RunResult {
    TimeSeries series;
    std::optional<double> divergence_time;
    std::string divergence_message;
    bool duty_clamped = false;
};

/// Runs the switched circuit with the controller in the loop. Closed-loop
/// controllers update once per switching period at the carrier zero using the
/// previous period's average output. Divergence is recorded, not thrown.
[[nodiscard]] RunResult run(const Scenario& scenario, const ConverterParams& params,
                            const RunOptions& options = {});

// =============================================================================
// Metrics
// =============================================================================

struct StepMetrics {
    double event_time = 0.0;
    double window_end = 0.0;
    double initial_value = 0.0;       ///< last sample before the event
    double final_value = 0.0;         ///< mean of the last 10% of the window
    double reference = 0.0;           ///< v_ref at the end of the window
    /// Relative to |final - initial|; 0 when the event does not move the
    /// final value out of the settling band (disturbance events).
    double overshoot_percent = 0.0;
    double settling_time_s = 0.0;     ///< +/- 2% band around final_value
    double steady_state_error_v = 0.0;
    double ripple_pp = 0.0;           ///< peak-to-peak over the last 10% of the window
    bool settled = false;
};

/// Metrics of v_o over (event_time, window_end]. Throws ConfigError when the
/// window holds fewer than 20 samples.
[[nodiscard]] StepMetrics step_metrics(const TimeSeries& ts, double event_time, double window_end);

/// step_metrics for every scenario event, each window ending at the next
/// event or the end of the record.
[[nodiscard]] std::vector<StepMetrics> event_metrics(const Scenario& scenario, const TimeSeries& ts);

// =============================================================================
// Built-in experiments
// =============================================================================

/// fig7_s1..fig7_s5, fig8a, fig8b, fig11, fig12.
[[nodiscard]] std::vector<Scenario> builtin_scenarios();

/// Throws ConfigError for an unknown name.
[[nodiscard]] Scenario builtin_scenario(std::string_view name);

}  // namespace tlbc
