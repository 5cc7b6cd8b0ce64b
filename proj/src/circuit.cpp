#include "tlbc/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include <fmt/format.h>

#include "tlbc/errors.hpp"

namespace tlbc {

namespace {

using Augmented = std::array<double, 6>;  // i_l, v_c1, v_c2 and their running integrals

double frac(double x) noexcept {
    return x - std::floor(x);
}

double clamp_duty(double d, const ConverterParams& params) noexcept {
    return std::clamp(d, 0.0, params.d_max);
}

}  // namespace

void ConverterParams::validate() const {
    const std::array<std::pair<const char*, double>, 8> positive{{{"v_i_nominal", v_i_nominal},
                                                                  {"l", l},
                                                                  {"r", r},
                                                                  {"c1", c1},
                                                                  {"c2", c2},
                                                                  {"r_load", r_load},
                                                                  {"f_s", f_s},
                                                                  {"dt", dt}}};
    for (const auto& [key, value] : positive) {
        if (!(value > 0.0) || !std::isfinite(value)) {
            throw ConfigError(fmt::format("converter parameter '{}' must be positive and finite (got {})", key, value));
        }
    }
    // Small slack so dt = 1 / (f_s * 64) itself is accepted.
    if (dt > (1.0 + 1e-12) / (f_s * 64.0)) {
        throw ConfigError(fmt::format("dt = {} s gives fewer than 64 steps per switching period", dt));
    }
    if (!(d_max > 0.0 && d_max < 1.0)) {
        throw ConfigError(fmt::format("d_max must lie in (0, 1) (got {})", d_max));
    }
}

SwitchState pwm_gates(double t, double d, const ConverterParams& params) noexcept {
    d = clamp_duty(d, params);
    const double phase = t * params.f_s;
    return {frac(phase) < d, frac(phase + 0.5) < d};
}

ConverterState derivative(const ConverterState& s, SwitchState sw, double v_in,
                          const ConverterParams& p) noexcept {
    const double load = s.v_o() / p.r_load;
    // An open switch routes i_l through its diode into the matching capacitor.
    const double i_c1 = sw.m1_on ? 0.0 : s.i_l;
    const double i_c2 = sw.m2_on ? 0.0 : s.i_l;
    const double v_switch = (sw.m1_on ? 0.0 : s.v_c1) + (sw.m2_on ? 0.0 : s.v_c2);
    return {(v_in - p.r * s.i_l - v_switch) / p.l, (i_c1 - load) / p.c1, (i_c2 - load) / p.c2};
}

ConverterState averaged_steady_state(const ConverterParams& p, double d, double v_in) noexcept {
    const double x = 1.0 - d;
    const double v_o = v_in * x / (x * x + p.r / p.r_load);
    return {v_o / (p.r_load * x), 0.5 * v_o, 0.5 * v_o};
}

double averaged_duty_for(const ConverterParams& p, double v_o, double v_in) {
    const double disc = v_in * v_in - 4.0 * v_o * v_o * p.r / p.r_load;
    if (!(v_o > 0.0) || disc < 0.0) {
        throw ConfigError(fmt::format("output {} V is not reachable from {} V input", v_o, v_in));
    }
    const double x = (v_in + std::sqrt(disc)) / (2.0 * v_o);
    double d = 1.0 - x;
    if (d < 0.0 && d > -1e-12) {
        d = 0.0;  // the d = 0 output itself, lost to rounding
    }
    if (d < 0.0 || d >= 1.0) {
        throw ConfigError(fmt::format("output {} V is not reachable from {} V input", v_o, v_in));
    }
    return d;
}

// =============================================================================
// SwitchedConverter
// =============================================================================

SwitchedConverter::SwitchedConverter(const ConverterParams& params, const ConverterState& initial,
                                     double t0)
    : params_(params), state_(initial), t_(t0) {
    params_.validate();
}

double SwitchedConverter::next_gate_edge(double t, double d) const noexcept {
    const double phase = t * params_.f_s;
    const double base = std::floor(phase);
    const double eps = 1e-9;
    double best = std::numeric_limits<double>::infinity();
    for (double j = base - 1.0; j <= base + 1.0; j += 1.0) {
        for (double edge : {j, j + d, j + 0.5, j + 0.5 + d}) {
            if (edge > phase + eps && edge < best) {
                best = edge;
            }
        }
    }
    return best / params_.f_s;
}

void SwitchedConverter::rk4(double h, SwitchState sw, double v_in) {
    const bool diode_path = !(sw.m1_on && sw.m2_on);
    auto f = [&](const Augmented& x) {
        ConverterState s{x[0], x[1], x[2]};
        if (diode_path && s.i_l < 0.0) {
            s.i_l = 0.0;
        }
        ConverterState ds = derivative(s, sw, v_in, params_);
        if (diode_path && s.i_l <= 0.0 && ds.i_l < 0.0) {
            ds.i_l = 0.0;
        }
        return Augmented{ds.i_l, ds.v_c1, ds.v_c2, s.i_l, s.v_c1, s.v_c2};
    };
    auto axpy = [](const Augmented& x, double a, const Augmented& k) {
        Augmented out;
        for (std::size_t n = 0; n < out.size(); ++n) {
            out[n] = x[n] + a * k[n];
        }
        return out;
    };

    const Augmented x{state_.i_l, state_.v_c1, state_.v_c2, 0.0, 0.0, 0.0};
    const Augmented k1 = f(x);
    const Augmented k2 = f(axpy(x, 0.5 * h, k1));
    const Augmented k3 = f(axpy(x, 0.5 * h, k2));
    const Augmented k4 = f(axpy(x, h, k3));
    Augmented next;
    for (std::size_t n = 0; n < next.size(); ++n) {
        next[n] = x[n] + h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
    }
    state_ = {next[0], next[1], next[2]};
    if (diode_path && state_.i_l < 0.0) {
        state_.i_l = 0.0;
    }
    integral_[0] += next[3];
    integral_[1] += next[4];
    integral_[2] += next[5];
}

void SwitchedConverter::advance(double t_target, double d, double v_in) {
    const double applied = clamp_duty(d, params_);
    if (applied != d) {
        clamped_ = true;
    }
    const double dt = params_.dt;
    const double snap = 1e-6 * dt;
    while (t_ < t_target) {
        double t_next = std::min(t_ + dt, t_target);
        if (t_target - t_next < snap) {
            t_next = t_target;
        }
        double a = t_;
        while (a < t_next) {
            double b = std::min(next_gate_edge(a, applied), t_next);
            if (t_next - b < snap) {
                b = t_next;
            }
            rk4(b - a, pwm_gates(0.5 * (a + b), applied, params_), v_in);
            a = b;
        }
        t_ = t_next;
        if (!std::isfinite(state_.i_l) || !std::isfinite(state_.v_c1) ||
            !std::isfinite(state_.v_c2)) {
            throw DivergenceError(fmt::format("switched-circuit state became non-finite at t = {:.6f} s", t_), t_);
        }
    }
}

// =============================================================================
// Drivers
// =============================================================================

SimulationResult simulate(const ConverterParams& params, const Schedule& v_in, const Schedule& duty,
                          double t_end, const SimulationOptions& options) {
    params.validate();
    if (!(t_end > 0.0)) {
        throw ConfigError("t_end must be positive");
    }
    if (options.samples_per_period < 1) {
        throw ConfigError("samples_per_period must be at least 1");
    }
    const double interval = params.period() / options.samples_per_period;
    const auto n_samples = static_cast<std::size_t>(std::floor(t_end / interval + 1e-9));

    SwitchedConverter conv(params, options.initial_state);
    SimulationResult result;
    result.series.reserve(n_samples);
    for (std::size_t k = 1; k <= n_samples; ++k) {
        const double t_start = conv.time();
        const double t_k = static_cast<double>(k) * interval;
        const auto before = conv.integrals();
        double t = t_start;
        while (t < t_k) {
            double next = t_k;
            if (auto c = v_in.next_change_after(t); c && *c < next) {
                next = *c;
            }
            if (auto c = duty.next_change_after(t); c && *c < next) {
                next = *c;
            }
            conv.advance(next, duty.at(t), v_in.at(t));
            t = next;
        }

        Sample s;
        s.t_s = t_k;
        s.v_in = v_in.at(t_start);
        s.duty = std::clamp(duty.at(t_start), 0.0, params.d_max);
        if (options.cycle_average) {
            const auto& after = conv.integrals();
            const double span = t_k - t_start;
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
    result.duty_clamped = conv.duty_clamped();
    return result;
}

SteadyState settle(const ConverterParams& params, double d, double v_in,
                   const SettleOptions& options) {
    params.validate();
    ConverterState start = options.initial.value_or(averaged_steady_state(params, d, v_in));
    const double period = params.period();
    const auto max_periods = static_cast<long>(std::ceil(options.horizon / period));
    const auto window = static_cast<std::size_t>(std::max(1, options.window_periods));
    const long hold = std::max(1, options.hold_periods);

    SteadyState out;
    long used = 0;
    for (int pass = 0; pass < 4; ++pass) {
        SwitchedConverter conv(params, start);
        std::deque<double> history;
        long quiet = 0;
        bool converged = false;
        for (long k = 1; used < max_periods; ++k, ++used) {
            const auto before = conv.integrals();
            conv.advance(static_cast<double>(k) * period, d, v_in);
            const auto& after = conv.integrals();
            out.average = {(after[0] - before[0]) / period, (after[1] - before[1]) / period,
                           (after[2] - before[2]) / period};
            out.v_o = out.average.v_o();
            history.push_back(out.v_o);
            if (history.size() > window + 1) {
                history.pop_front();
            }
            if (history.size() == window + 1) {
                const auto [lo, hi] = std::minmax_element(history.begin(), history.end());
                quiet = *hi - *lo < options.rel_tol * std::abs(out.v_o) ? quiet + 1 : 0;
            }
            if (quiet >= hold) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            break;
        }
        out.state = conv.state();
        out.elapsed = static_cast<double>(used) * period;
        const double imbalance = out.average.v_c1 - out.average.v_c2;
        if (!options.balance || std::abs(imbalance) <= 1e-6 * std::abs(out.v_o)) {
            return out;
        }
        start = out.state;
        start.v_c1 -= 0.5 * imbalance;
        start.v_c2 += 0.5 * imbalance;
    }
    throw NumericalError(fmt::format(
        "no steady state at d = {:.4f} within {} s (last cycle average {:.6f} V)", d,
        options.horizon, out.v_o));
}

double steady_state_output(const ConverterParams& params, double d, double v_in,
                           const SettleOptions& options) {
    return settle(params, d, v_in, options).v_o;
}

std::vector<CharacteristicPoint> operating_characteristic(const ConverterParams& params,
                                                          const std::vector<double>& d_grid,
                                                          double v_in) {
    ConverterParams unclamped = params;
    for (double d : d_grid) {
        if (d >= 0.0 && d < 1.0) {
            unclamped.d_max = std::max(unclamped.d_max, d);
        }
    }
    std::vector<CharacteristicPoint> points;
    points.reserve(d_grid.size());
    for (double d : d_grid) {
        CharacteristicPoint p;
        p.d = d;
        if (!(d >= 0.0 && d < 1.0)) {
            p.error = fmt::format("duty {} outside [0, 1)", d);
            points.push_back(p);
            continue;
        }
        try {
            p.v_o = steady_state_output(unclamped, d, v_in);
            p.ok = true;
        } catch (const NumericalError& e) {
            p.error = e.what();
        }
        points.push_back(p);
    }
    return points;
}

}  // namespace tlbc
