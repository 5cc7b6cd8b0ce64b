#include "tlbc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "tlbc/errors.hpp"

namespace tlbc {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Duty that settles the switched circuit at `v_target`: averaged-model guess
// refined by secant iteration on the settled output.
double steady_duty(const ConverterParams& params, double v_target, double v_in) {
    double d0 = averaged_duty_for(params, v_target, v_in);
    double f0 = steady_state_output(params, d0, v_in) - v_target;
    double d1 = d0 + 1e-3;
    for (int it = 0; it < 6 && std::abs(f0) > 1e-7 * v_target; ++it) {
        const double f1 = steady_state_output(params, d1, v_in) - v_target;
        if (f1 == f0) {
            break;
        }
        const double next = d1 - f1 * (d1 - d0) / (f1 - f0);
        d0 = d1;
        f0 = f1;
        d1 = std::clamp(next, 0.0, params.d_max);
        if (d1 == d0) {
            break;
        }
    }
    return std::abs(f0) <= 1e-7 * v_target ? d0 : d1;
}

struct Controller {
    const Scenario& scenario;
    ConverterParams params;
    PiState state;

    struct Output {
        double duty;
        PiGains gains;
    };

    Output step(double t, double v_ref, double v_o, double dt) {
        const DutyLimits limits{0.0, params.d_max};
        return std::visit(
            overloaded{
                [&](const OpenLoopController& c) { return Output{c.duty.at(t), PiGains{}}; },
                [&](const FixedPiController& c) {
                    const auto s = pi_step(v_ref - v_o, state, c.gains, limits, dt, scenario.anti_windup);
                    state = s.state;
                    return Output{s.duty, c.gains};
                },
                [&](const TsfPiController& c) {
                    const auto s = tsf_pi_step(v_ref, v_o, state, c.config, limits, dt, scenario.anti_windup);
                    state = s.pi.state;
                    return Output{s.pi.duty, s.gains};
                }},
            scenario.controller);
    }

    [[nodiscard]] std::optional<PiGains> gains_at(double v_ref, double v_o) const {
        return std::visit(overloaded{[](const OpenLoopController&) -> std::optional<PiGains> { return std::nullopt; },
                                     [](const FixedPiController& c) -> std::optional<PiGains> { return c.gains; },
                                     [&](const TsfPiController& c) -> std::optional<PiGains> {
                                         const double x = c.config.scheduling == SchedulingVariable::reference ? v_ref : v_o;
                                         return blended_gains(x, c.config.partition, c.config.table);
                                     }},
                          scenario.controller);
    }
};

}  // namespace

FixedPiController fixed_pi(Subinterval s) {
    return {table_iv()[index(s)], s};
}

void Scenario::validate() const {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) {
        throw ConfigError(fmt::format("scenario '{}': t_end must be positive", name));
    }
    std::visit(overloaded{[](const OpenLoopController&) {},
                          [](const FixedPiController& c) { c.gains.validate(); },
                          [](const TsfPiController& c) {
                              for (const auto& g : c.config.table) {
                                  g.validate();
                              }
                          }},
               controller);
}

std::vector<double> Scenario::events() const {
    std::vector<double> out;
    auto collect = [&](const Schedule& s) {
        for (const auto& e : s.entries()) {
            if (e.t > 0.0 && e.t < t_end) {
                out.push_back(e.t);
            }
        }
    };
    collect(v_in_schedule);
    collect(v_ref_schedule);
    if (const auto* ol = std::get_if<OpenLoopController>(&controller)) {
        collect(ol->duty);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

RunResult run(const Scenario& scenario, const ConverterParams& params, const RunOptions& options) {
    scenario.validate();
    params.validate();
    if (options.samples_per_period < 1) {
        throw ConfigError("samples_per_period must be at least 1");
    }
    const double period = params.period();
    const double v_in0 = scenario.v_in_schedule.initial();
    const double v_ref0 = scenario.v_ref_schedule.initial();
    const auto* open_loop = std::get_if<OpenLoopController>(&scenario.controller);

    Controller ctl{scenario, params, {}};
    ConverterState x0;
    double v_avg = 0.0;
    if (scenario.initial_state) {
        x0 = *scenario.initial_state;
        v_avg = x0.v_o();
    } else {
        const double d0 = open_loop ? open_loop->duty.initial() : steady_duty(params, v_ref0, v_in0);
        const SteadyState st = settle(params, d0, v_in0);
        x0 = st.state;
        v_avg = st.v_o;
        if (auto g = ctl.gains_at(v_ref0, v_avg)) {
            ctl.state.integrator = integrator_for_duty(d0, *g);
            ctl.state.applied = *g;
        }
    }

    RunResult result;
    SwitchedConverter conv(params, x0);
    const auto n_periods = static_cast<std::size_t>(std::floor(scenario.t_end / period + 1e-9));
    const int sub = options.samples_per_period;
    result.series.reserve(n_periods * static_cast<std::size_t>(sub));

    try {
        for (std::size_t k = 0; k < n_periods; ++k) {
            const double t_k = static_cast<double>(k) * period;
            const double v_ref = scenario.v_ref_schedule.at(t_k);
            const auto out = ctl.step(t_k, v_ref, v_avg, period);
            const auto period_start = conv.integrals();

            for (int j = 1; j <= sub; ++j) {
                const double t_a = conv.time();
                const double t_b = j == sub ? static_cast<double>(k + 1) * period
                                            : t_k + period * static_cast<double>(j) / sub;
                const auto before = conv.integrals();
                double t = t_a;
                while (t < t_b) {
                    double next = t_b;
                    if (auto c = scenario.v_in_schedule.next_change_after(t); c && *c < next) {
                        next = *c;
                    }
                    double duty = out.duty;
                    if (open_loop) {
                        if (auto c = open_loop->duty.next_change_after(t); c && *c < next) {
                            next = *c;
                        }
                        duty = open_loop->duty.at(t);
                    }
                    conv.advance(next, duty, scenario.v_in_schedule.at(t));
                    t = next;
                }

                Sample s;
                s.t_s = t_b;
                s.v_in = scenario.v_in_schedule.at(t_a);
                s.v_ref = v_ref;
                s.duty = std::clamp(open_loop ? open_loop->duty.at(t_a) : out.duty, 0.0, params.d_max);
                s.kp_active = out.gains.kp;
                s.ki_active = out.gains.ki;
                if (options.cycle_average) {
                    const auto& after = conv.integrals();
                    const double span = t_b - t_a;
                    s.i_l = (after[0] - before[0]) / span;
                    s.v_c1 = (after[1] - before[1]) / span;
                    s.v_c2 = (after[2] - before[2]) / span;
                } else {
                    s.i_l = conv.state().i_l;
                    s.v_c1 = conv.state().v_c1;
                    s.v_c2 = conv.state().v_c2;
                }
                s.v_o = s.v_c1 + s.v_c2;
                result.series.push(s);
            }
            const auto& period_end = conv.integrals();
            v_avg = (period_end[1] - period_start[1] + period_end[2] - period_start[2]) / period;
        }
    } catch (const DivergenceError& e) {
        result.divergence_time = e.time();
        result.divergence_message = e.what();
    }
    result.duty_clamped = conv.duty_clamped();
    return result;
}

StepMetrics step_metrics(const TimeSeries& ts, double event_time, double window_end) {
    const auto first = std::upper_bound(ts.t_s.begin(), ts.t_s.end(), event_time) - ts.t_s.begin();
    const auto last = std::upper_bound(ts.t_s.begin(), ts.t_s.end(), window_end) - ts.t_s.begin();
    const auto n = last - first;
    if (n < 20) {
        throw ConfigError(fmt::format("metrics window ({} s, {} s] holds {} samples; need at least 20",
                                      event_time, window_end, n));
    }
    const auto& v = ts.v_o;
    StepMetrics m;
    m.event_time = event_time;
    m.window_end = window_end;
    m.initial_value = first > 0 ? v[static_cast<std::size_t>(first - 1)] : v[static_cast<std::size_t>(first)];
    m.reference = ts.v_ref[static_cast<std::size_t>(last - 1)];

    const auto tail = std::max<std::ptrdiff_t>(1, n / 10);
    const auto tail_begin = v.begin() + (last - tail);
    const auto tail_end = v.begin() + last;
    m.final_value = std::accumulate(tail_begin, tail_end, 0.0) / static_cast<double>(tail);
    const auto [lo, hi] = std::minmax_element(tail_begin, tail_end);
    m.ripple_pp = *hi - *lo;
    m.steady_state_error_v = m.final_value - m.reference;

    const double band = 0.02 * std::abs(m.final_value);
    const double step = m.final_value - m.initial_value;
    if (std::abs(step) > band) {
        const double dir = step > 0.0 ? 1.0 : -1.0;
        double peak = 0.0;
        for (auto k = first; k < last; ++k) {
            peak = std::max(peak, dir * (v[static_cast<std::size_t>(k)] - m.final_value));
        }
        m.overshoot_percent = 100.0 * peak / std::abs(step);
    }

    std::ptrdiff_t last_outside = -1;
    for (auto k = first; k < last; ++k) {
        if (std::abs(v[static_cast<std::size_t>(k)] - m.final_value) > band) {
            last_outside = k;
        }
    }
    if (last_outside < 0) {
        m.settling_time_s = 0.0;
        m.settled = true;
    } else if (last_outside + 1 >= last) {
        m.settling_time_s = window_end - event_time;
        m.settled = false;
    } else {
        m.settling_time_s = ts.t_s[static_cast<std::size_t>(last_outside + 1)] - event_time;
        // A band entered only inside the averaging tail says nothing.
        m.settled = last_outside < last - tail;
    }
    return m;
}

std::vector<StepMetrics> event_metrics(const Scenario& scenario, const TimeSeries& ts) {
    std::vector<StepMetrics> out;
    if (ts.empty()) {
        return out;
    }
    const auto events = scenario.events();
    const double record_end = ts.t_s.back();
    for (std::size_t k = 0; k < events.size(); ++k) {
        const double end = k + 1 < events.size() ? events[k + 1] : record_end;
        if (events[k] >= record_end) {
            break;
        }
        out.push_back(step_metrics(ts, events[k], std::min(end, record_end)));
    }
    return out;
}

// =============================================================================
// Built-ins
// =============================================================================

namespace {

const std::vector<ScheduleEntry> kReferenceSequence{
    {0.0, 15.0}, {0.2, 25.0}, {0.4, 42.0}, {0.6, 33.0}, {0.8, 50.0}};

Scenario fig7(Subinterval s) {
    const double mid = midpoint(s);
    Scenario sc;
    sc.name = fmt::format("fig7_s{}", index(s) + 1);
    sc.t_end = 0.5;
    sc.v_in_schedule = Schedule({{0.0, 11.0}, {0.12, 13.0}, {0.25, 11.0}});
    sc.v_ref_schedule = Schedule({{0.0, mid}, {0.36, mid + 2.0}});
    sc.controller = fixed_pi(s);
    sc.reproduces = fmt::format("Fig. 7 ({}): local PI in its own subinterval; reference step of +2 V is a reconstruction", name(s));
    return sc;
}

Scenario fig8(std::string name, Subinterval s, std::string reproduces) {
    Scenario sc;
    sc.name = std::move(name);
    sc.t_end = 1.0;
    sc.v_in_schedule = Schedule::constant(12.0);
    sc.v_ref_schedule = Schedule(kReferenceSequence);
    sc.controller = fixed_pi(s);
    sc.reproduces = std::move(reproduces);
    return sc;
}

}  // namespace

std::vector<Scenario> builtin_scenarios() {
    std::vector<Scenario> out;
    for (Subinterval s : kSubintervals) {
        out.push_back(fig7(s));
    }
    out.push_back(fig8("fig8a", Subinterval::S1, "Fig. 8(a): PI1 across the reference sequence"));
    out.push_back(fig8("fig8b", Subinterval::S4, "Fig. 8(b): PI4 across the reference sequence"));

    Scenario fig11;
    fig11.name = "fig11";
    fig11.t_end = 0.5;
    fig11.v_in_schedule = Schedule({{0.0, 11.0}, {0.1, 12.0}, {0.2, 13.0}, {0.3, 12.0}, {0.4, 11.0}});
    fig11.v_ref_schedule = Schedule::constant(17.0);
    fig11.controller = TsfPiController{};
    fig11.reproduces = "Fig. 11: TSF-PI, input steps 11-12-13-12-11 V at 17 V reference";
    out.push_back(fig11);

    Scenario fig12 = fig8("fig12", Subinterval::S1, "Fig. 12: TSF-PI across the reference sequence");
    fig12.controller = TsfPiController{};
    out.push_back(fig12);
    return out;
}

Scenario builtin_scenario(std::string_view name) {
    for (auto& sc : builtin_scenarios()) {
        if (sc.name == name) {
            return sc;
        }
    }
    throw ConfigError(fmt::format("unknown built-in scenario '{}'", name));
}

}  // namespace tlbc
