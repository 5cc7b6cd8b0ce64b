#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tlbc/control.hpp"
#include "tlbc/polynomial.hpp"
#include "tlbc/schedule.hpp"
#include "tlbc/subinterval.hpp"

namespace tlbc {

enum class InputChannel { input_voltage, duty };

[[nodiscard]] std::string_view name(InputChannel c) noexcept;

/// Rational model num(s) / den(s) with a monic denominator. Duty-channel
/// models take fractional duty (0.01 = one percent) as input.
struct TransferFunction {
    Polynomial num;
    Polynomial den;
    InputChannel input = InputChannel::input_voltage;
    std::optional<Subinterval> subinterval;
    /// Set when a coefficient deviates from the published table; `note` says which.
    bool corrected_from_published = false;
    std::string note;

    [[nodiscard]] std::size_t order() const noexcept { return den.size() - 1; }
    [[nodiscard]] std::size_t zero_count() const noexcept { return num.size() - 1; }
    [[nodiscard]] bool strictly_proper() const noexcept { return num.size() < den.size(); }
};

/// Normalizes to a monic denominator and trims leading zeros. Throws
/// ConfigError if the model is improper or the denominator is empty.
[[nodiscard]] TransferFunction make_tf(Polynomial num, Polynomial den,
                                       InputChannel input = InputChannel::input_voltage,
                                       std::optional<Subinterval> subinterval = std::nullopt);

struct SubintervalModels {
    Subinterval id;
    TransferFunction input_tf;  ///< F_i: output deviation per volt of input deviation
    TransferFunction duty_tf;   ///< F_d: output deviation per unit duty deviation
};

/// The ten identified small-signal models, S1..S5. F_i2's printed denominator
/// constant 9.261e12 makes the model unstable with a DC gain of 0.166; the
/// registry stores 9.261e11 and flags the entry.
[[nodiscard]] std::array<SubintervalModels, 5> table_iii_registry();

/// num(0) / den(0). Throws NumericalError if den(0) == 0.
[[nodiscard]] double dc_gain(const TransferFunction& tf);

[[nodiscard]] std::vector<std::complex<double>> poles(const TransferFunction& tf);
[[nodiscard]] std::vector<std::complex<double>> zeros(const TransferFunction& tf);
[[nodiscard]] bool is_stable(const TransferFunction& tf);

// =============================================================================
// Time-domain responses
// =============================================================================

/// Coefficients span ~13 decades in seconds, so realizations run in time
/// normalized by this scale.
inline constexpr double kTimeScale = 1e-4;

/// Controllable canonical realization in normalized time tau = t / time_scale:
/// dx/dtau = a x + b u, y = c x + d u.
struct StateSpace {
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    Eigen::RowVectorXd c;
    double d = 0.0;
    double time_scale = kTimeScale;
};

[[nodiscard]] StateSpace realize(const TransferFunction& tf, double time_scale = kTimeScale);

/// Uniform grid t = 0, dt, 2 dt, ... up to t_end.
struct LinearResponse {
    std::vector<double> time;
    std::vector<double> value;
};

/// RK4 on the canonical realization from zero initial state. Requires a
/// strictly proper model and dt < 0.1 / max |pole|.
[[nodiscard]] LinearResponse step_response(const TransferFunction& tf, double amplitude,
                                           double t_end, double dt);

/// dv_o = F_i dv_in + F_d dd.
[[nodiscard]] LinearResponse small_signal_open_loop(const TransferFunction& input_tf,
                                                    const TransferFunction& duty_tf,
                                                    const Schedule& dv_in, const Schedule& dd,
                                                    double t_end, double dt);

/// Linear loop dv_o = F_d C_pi (dv_ref - dv_o) + F_i dv_in with the
/// standard-form PI and no saturation.
[[nodiscard]] LinearResponse closed_loop_linear(const TransferFunction& duty_tf,
                                                const TransferFunction& input_tf,
                                                const PiGains& gains, const Schedule& dv_ref,
                                                const Schedule& dv_in, double t_end, double dt);

/// s den_d(s) + kp (s + ki) num_d(s).
[[nodiscard]] Polynomial closed_loop_characteristic(const TransferFunction& duty_tf,
                                                    const PiGains& gains);

// =============================================================================
// Text form:  "num: a_m ... a_0 / den: 1 b_{n-1} ... b_0"
// =============================================================================

[[nodiscard]] std::string to_text(const TransferFunction& tf);

/// Throws ConfigError on malformed text.
[[nodiscard]] TransferFunction parse_transfer_function(
    std::string_view text, InputChannel input = InputChannel::input_voltage);

}  // namespace tlbc
