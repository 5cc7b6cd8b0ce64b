#include "tlbc/lti.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "tlbc/errors.hpp"

namespace tlbc {

namespace {

// Affine system dz/dtau = a z + b w, y = c z + d w with piecewise-constant
// inputs w given by one schedule per column of b.
struct AffineSystem {
    Eigen::MatrixXd a;
    Eigen::MatrixXd b;
    Eigen::RowVectorXd c;
    Eigen::RowVectorXd d;
    double time_scale = kTimeScale;
};

Eigen::VectorXd inputs_at(const std::vector<const Schedule*>& inputs, double t) {
    Eigen::VectorXd w(static_cast<Eigen::Index>(inputs.size()));
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        w[static_cast<Eigen::Index>(k)] = inputs[k]->at(t);
    }
    return w;
}

LinearResponse simulate_affine(const AffineSystem& sys, const std::vector<const Schedule*>& inputs,
                               double t_end, double dt) {
    if (!(dt > 0.0) || !(t_end > 0.0)) {
        throw ConfigError("t_end and dt must be positive");
    }
    const auto n = static_cast<std::size_t>(std::floor(t_end / dt + 1e-9));
    LinearResponse out;
    out.time.reserve(n + 1);
    out.value.reserve(n + 1);

    Eigen::VectorXd z = Eigen::VectorXd::Zero(sys.a.rows());
    auto rk4 = [&](double t0, double t1) {
        const Eigen::VectorXd w = inputs_at(inputs, t0);
        const Eigen::VectorXd bw = sys.b * w;
        const double h = (t1 - t0) / sys.time_scale;
        const Eigen::VectorXd k1 = sys.a * z + bw;
        const Eigen::VectorXd k2 = sys.a * (z + 0.5 * h * k1) + bw;
        const Eigen::VectorXd k3 = sys.a * (z + 0.5 * h * k2) + bw;
        const Eigen::VectorXd k4 = sys.a * (z + h * k3) + bw;
        z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    };

    for (std::size_t k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * dt;
        if (k > 0) {
            double a = static_cast<double>(k - 1) * dt;
            while (a < t) {
                double b = t;
                for (const Schedule* s : inputs) {
                    if (auto c = s->next_change_after(a); c && *c < b) {
                        b = *c;
                    }
                }
                rk4(a, b);
                a = b;
            }
        }
        out.time.push_back(t);
        out.value.push_back((sys.c * z)(0) + (sys.d * inputs_at(inputs, t))(0));
    }
    return out;
}

double max_pole_magnitude(const TransferFunction& tf) {
    double m = 0.0;
    for (const auto& p : poles(tf)) {
        m = std::max(m, std::abs(p));
    }
    return m;
}

void check_step(const TransferFunction& tf, double dt) {
    if (!tf.strictly_proper()) {
        throw ConfigError("time responses need a strictly proper model");
    }
    const double m = max_pole_magnitude(tf);
    if (m > 0.0 && !(dt < 0.1 / m)) {
        throw ConfigError(fmt::format("dt = {} s does not resolve the fastest pole ({:.4g} rad/s)", dt, m));
    }
}

std::string format_coefficients(const Polynomial& p) {
    std::string out;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (k > 0) {
            out += ' ';
        }
        out += fmt::format("{:.9e}", p[k]);
    }
    return out;
}

Polynomial parse_coefficients(std::string_view text, std::string_view label) {
    std::istringstream in{std::string(text)};
    Polynomial p;
    std::string token;
    while (in >> token) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size() || !std::isfinite(v)) {
            throw ConfigError(fmt::format("{}: '{}' is not a number", label, token));
        }
        p.push_back(v);
    }
    if (p.empty()) {
        throw ConfigError(fmt::format("{}: no coefficients", label));
    }
    return p;
}

}  // namespace

std::string_view name(InputChannel c) noexcept {
    return c == InputChannel::input_voltage ? "input_voltage" : "duty";
}

TransferFunction make_tf(Polynomial num, Polynomial den, InputChannel input,
                         std::optional<Subinterval> subinterval) {
    den = trim(den);
    num = trim(num);
    if (den.size() < 2 && den.front() == 0.0) {
        throw ConfigError("transfer function denominator is zero");
    }
    if (num.size() > den.size()) {
        throw ConfigError("transfer function is improper (more zeros than poles)");
    }
    const double lead = den.front();
    for (double& c : den) {
        c /= lead;
    }
    for (double& c : num) {
        c /= lead;
    }
    TransferFunction tf;
    tf.num = std::move(num);
    tf.den = std::move(den);
    tf.input = input;
    tf.subinterval = subinterval;
    return tf;
}

std::array<SubintervalModels, 5> table_iii_registry() {
    using enum Subinterval;
    constexpr auto vin = InputChannel::input_voltage;
    constexpr auto duty = InputChannel::duty;
    std::array<SubintervalModels, 5> reg{{
        {S1, make_tf({2.035e12}, {1.0, 6.442e4, 7.87e7, 1.629e12}, vin, S1),
             make_tf({-6.136e8, 3.94e13}, {1.0, 8.311e4, 5.087e7, 2.067e12}, duty, S1)},
        {S2, make_tf({1.541e12}, {1.0, 6.509e4, 6.849e7, 9.261e11}, vin, S2),
             make_tf({-8.927e8, 3.928e13}, {1.0, 8.302e4, 4.026e7, 1.151e12}, duty, S2)},
        {S3, make_tf({1.153e12}, {1.0, 6.494e4, 6.223e7, 5.205e11}, vin, S3),
             make_tf({-1.492e9, 3.826e13}, {1.0, 8.135e4, 3.376e7, 6.276e11}, duty, S3)},
        {S4, make_tf({7.729e11}, {1.0, 6.535e4, 5.819e7, 2.336e11}, vin, S4),
             make_tf({-3.313e8, 3.65e13}, {1.0, 8.024e4, 2.918e7, 2.694e11}, duty, S4)},
        {S5, make_tf({4.761e11}, {1.0, 6.714e4, 5.74e7, 8.761e10}, vin, S5),
             make_tf({-8.011e9, 3.383e13}, {1.0, 7.674e4, 2.588e7, 8.904e10}, duty, S5)},
    }};
    auto& fi2 = reg[1].input_tf;
    fi2.corrected_from_published = true;
    fi2.note =
        "F_i2 denominator constant printed as 9.261e12 (unstable: 6.509e4 * 6.849e7 < 9.261e12; "
        "DC gain 0.166); stored as 9.261e11 (stable, DC gain 1.66)";
    reg[4].duty_tf.note = "F_d5 zero coefficient -8.011e9 is ~10x its S1-S4 counterparts; kept as printed";
    return reg;
}

double dc_gain(const TransferFunction& tf) {
    const double den0 = tf.den.back();
    if (den0 == 0.0) {
        throw NumericalError("DC gain undefined: denominator has a root at s = 0");
    }
    return tf.num.back() / den0;
}

std::vector<std::complex<double>> poles(const TransferFunction& tf) {
    if (tf.order() < 1) {
        return {};
    }
    return roots(tf.den);
}

std::vector<std::complex<double>> zeros(const TransferFunction& tf) {
    if (tf.zero_count() < 1) {
        return {};
    }
    return roots(tf.num);
}

bool is_stable(const TransferFunction& tf) {
    return is_hurwitz(tf.den);
}

StateSpace realize(const TransferFunction& tf, double time_scale) {
    const std::size_t n = tf.order();
    if (n < 1) {
        throw ConfigError("cannot realize a static gain as a state-space model");
    }
    // s = sigma / time_scale; multiply through by time_scale^n to stay monic.
    std::vector<double> a(n + 1);
    std::vector<double> b(n + 1, 0.0);
    for (std::size_t k = 0; k <= n; ++k) {
        a[k] = tf.den[k] * std::pow(time_scale, static_cast<double>(k));
    }
    const std::size_t offset = n + 1 - tf.num.size();
    for (std::size_t k = 0; k < tf.num.size(); ++k) {
        b[offset + k] = tf.num[k] * std::pow(time_scale, static_cast<double>(offset + k));
    }

    StateSpace ss;
    ss.time_scale = time_scale;
    const auto ni = static_cast<Eigen::Index>(n);
    ss.a = Eigen::MatrixXd::Zero(ni, ni);
    ss.b = Eigen::VectorXd::Zero(ni);
    ss.c = Eigen::RowVectorXd::Zero(ni);
    // State x_j = j-th derivative of the partial state; a/b in descending powers.
    for (Eigen::Index j = 0; j + 1 < ni; ++j) {
        ss.a(j, j + 1) = 1.0;
    }
    for (Eigen::Index j = 0; j < ni; ++j) {
        ss.a(ni - 1, j) = -a[n - static_cast<std::size_t>(j)];
    }
    ss.b(ni - 1) = 1.0;
    ss.d = b[0];
    for (Eigen::Index j = 0; j < ni; ++j) {
        ss.c(j) = b[n - static_cast<std::size_t>(j)] - ss.d * a[n - static_cast<std::size_t>(j)];
    }
    return ss;
}

LinearResponse step_response(const TransferFunction& tf, double amplitude, double t_end, double dt) {
    check_step(tf, dt);
    const Schedule u = Schedule::constant(amplitude);
    const StateSpace ss = realize(tf);
    AffineSystem sys{ss.a, ss.b, ss.c, Eigen::RowVectorXd::Constant(1, ss.d), ss.time_scale};
    return simulate_affine(sys, {&u}, t_end, dt);
}

LinearResponse small_signal_open_loop(const TransferFunction& input_tf,
                                      const TransferFunction& duty_tf, const Schedule& dv_in,
                                      const Schedule& dd, double t_end, double dt) {
    check_step(input_tf, dt);
    check_step(duty_tf, dt);
    const StateSpace fi = realize(input_tf);
    const StateSpace fd = realize(duty_tf);
    const Eigen::Index ni = fi.a.rows();
    const Eigen::Index nd = fd.a.rows();

    AffineSystem sys;
    sys.a = Eigen::MatrixXd::Zero(ni + nd, ni + nd);
    sys.a.topLeftCorner(ni, ni) = fi.a;
    sys.a.bottomRightCorner(nd, nd) = fd.a;
    sys.b = Eigen::MatrixXd::Zero(ni + nd, 2);
    sys.b.col(0).head(ni) = fi.b;
    sys.b.col(1).tail(nd) = fd.b;
    sys.c = Eigen::RowVectorXd(ni + nd);
    sys.c << fi.c, fd.c;
    sys.d = Eigen::RowVectorXd::Zero(2);
    return simulate_affine(sys, {&dv_in, &dd}, t_end, dt);
}

LinearResponse closed_loop_linear(const TransferFunction& duty_tf, const TransferFunction& input_tf,
                                  const PiGains& gains, const Schedule& dv_ref,
                                  const Schedule& dv_in, double t_end, double dt) {
    gains.validate();
    check_step(duty_tf, dt);
    check_step(input_tf, dt);
    const StateSpace fd = realize(duty_tf);
    const StateSpace fi = realize(input_tf);
    const Eigen::Index nd = fd.a.rows();
    const Eigen::Index ni = fi.a.rows();
    const Eigen::Index n = nd + ni + 1;  // plus the PI integrator (V*s)
    const Eigen::Index integ = nd + ni;
    const double t0 = fd.time_scale;

    // Output y = cy z + dy w with w = (dv_ref, dv_in); strictly proper plants
    // make the loop algebraic-free.
    Eigen::RowVectorXd cy = Eigen::RowVectorXd::Zero(n);
    cy.head(nd) = fd.c;
    cy.segment(nd, ni) = fi.c;
    Eigen::RowVectorXd dy = Eigen::RowVectorXd::Zero(2);

    Eigen::RowVectorXd ce = -cy;  // error e = dv_ref - y
    Eigen::RowVectorXd de = -dy;
    de(0) += 1.0;

    Eigen::RowVectorXd cu = gains.kp * ce;  // u = kp (e + ki I)
    cu(integ) += gains.kp * gains.ki;
    const Eigen::RowVectorXd du = gains.kp * de;

    AffineSystem sys;
    sys.time_scale = t0;
    sys.a = Eigen::MatrixXd::Zero(n, n);
    sys.b = Eigen::MatrixXd::Zero(n, 2);
    sys.a.topLeftCorner(nd, nd) = fd.a;
    sys.a.topRows(nd) += fd.b * cu;
    sys.b.topRows(nd) += fd.b * du;
    sys.a.block(nd, nd, ni, ni) = fi.a;
    sys.b.block(nd, 1, ni, 1) = fi.b;
    sys.a.row(integ) = t0 * ce;
    sys.b.row(integ) = t0 * de;
    sys.c = cy;
    sys.d = dy;
    return simulate_affine(sys, {&dv_ref, &dv_in}, t_end, dt);
}

Polynomial closed_loop_characteristic(const TransferFunction& duty_tf, const PiGains& gains) {
    const Polynomial s_den = multiply(duty_tf.den, Polynomial{1.0, 0.0});
    const Polynomial pi_num = multiply(duty_tf.num, Polynomial{gains.kp, gains.kp * gains.ki});
    return add(s_den, pi_num);
}

std::string to_text(const TransferFunction& tf) {
    return fmt::format("num: {} / den: {}", format_coefficients(tf.num), format_coefficients(tf.den));
}

TransferFunction parse_transfer_function(std::string_view text, InputChannel input) {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) {
        throw ConfigError("transfer function text needs 'num: ... / den: ...'");
    }
    auto strip = [](std::string_view s, std::string_view key) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
            s.remove_prefix(1);
        }
        if (s.substr(0, key.size()) != key) {
            throw ConfigError(fmt::format("expected '{}' in transfer function text", key));
        }
        return s.substr(key.size());
    };
    const auto num = parse_coefficients(strip(text.substr(0, slash), "num:"), "numerator");
    const auto den = parse_coefficients(strip(text.substr(slash + 1), "den:"), "denominator");
    return make_tf(num, den, input);
}

}  // namespace tlbc
