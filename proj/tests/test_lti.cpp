#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "tlbc/errors.hpp"
#include "tlbc/lti.hpp"
#include "tlbc/polynomial.hpp"

using namespace tlbc;
using Catch::Approx;
using cd = std::complex<double>;

// =============================================================================
// Polynomials
// =============================================================================

TEST_CASE("polynomial arithmetic", "[polynomial]") {
    CHECK(multiply(Polynomial{1, 2}, Polynomial{1, 3}) == Polynomial{1, 5, 6});
    CHECK(add(Polynomial{1, 0, 0}, Polynomial{2, 1}) == Polynomial{1, 2, 1});
    CHECK(scale(Polynomial{1, -2}, 3.0) == Polynomial{3, -6});
    CHECK(trim(Polynomial{0, 0, 1, 2}) == Polynomial{1, 2});
    CHECK(evaluate(Polynomial{1, 5, 6}, cd{-2.0, 0.0}) == cd{0.0, 0.0});
    CHECK(from_roots(std::vector<cd>{{-1, 0}, {-2, 0}}) == Polynomial{1, 3, 2});
}

TEST_CASE("roots round trip through from_roots", "[polynomial][property]") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> re(-1e4, -1.0);
    std::uniform_real_distribution<double> im(0.0, 6e3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<cd> r{{re(rng), 0.0}};
        const cd pair{re(rng) / 10.0, im(rng)};
        r.push_back(pair);
        r.push_back(std::conj(pair));
        const auto back = roots(from_roots(r));
        REQUIRE(back.size() == 3);
        for (const auto& z : r) {
            double best = 1e300;
            for (const auto& b : back) {
                best = std::min(best, std::abs(b - z));
            }
            CHECK(best <= 1e-6 * std::max(1.0, std::abs(z)));
        }
    }
}

TEST_CASE("Hurwitz test agrees with the root locations", "[polynomial]") {
    CHECK(is_hurwitz(Polynomial{1, 1, 1}));
    CHECK_FALSE(is_hurwitz(Polynomial{1, -1, 1}));
    CHECK_FALSE(is_hurwitz(Polynomial{1, 1, 1, 2}));  // a2 a1 < a0
    CHECK(is_hurwitz(Polynomial{1, 2, 1, 1}));
    CHECK_FALSE(is_hurwitz(Polynomial{1, 0, 1}));     // marginal
    CHECK(is_hurwitz(Polynomial{-1, -3, -2}));        // sign of the whole polynomial is irrelevant

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 4.0);
    for (int trial = 0; trial < 500; ++trial) {
        const Polynomial p{1.0, u(rng), u(rng), u(rng), u(rng)};
        const auto r = roots(p);
        const bool by_roots = std::all_of(r.begin(), r.end(), [](cd z) { return z.real() < -1e-9; });
        const bool marginal = std::any_of(r.begin(), r.end(), [](cd z) { return std::abs(z.real()) <= 1e-9; });
        if (!marginal) {
            CHECK(is_hurwitz(p) == by_roots);
        }
    }
}

// =============================================================================
// Registry
// =============================================================================

TEST_CASE("registry holds ten stable models of the identified structure", "[lti][registry]") {
    const auto reg = table_iii_registry();
    for (const auto& m : reg) {
        CHECK(m.input_tf.order() == 3);
        CHECK(m.input_tf.zero_count() == 0);
        CHECK(m.duty_tf.order() == 3);
        CHECK(m.duty_tf.zero_count() == 1);
        CHECK(m.input_tf.input == InputChannel::input_voltage);
        CHECK(m.duty_tf.input == InputChannel::duty);
        CHECK(m.input_tf.subinterval == m.id);
        for (const auto* tf : {&m.input_tf, &m.duty_tf}) {
            CHECK(tf->den.front() == 1.0);
            CHECK(is_stable(*tf));
            for (const auto& p : poles(*tf)) {
                CHECK(p.real() < 0.0);
            }
        }
        // Boost converters are non-minimum-phase from the duty.
        const auto z = zeros(m.duty_tf);
        REQUIRE(z.size() == 1);
        CHECK(z[0].real() > 0.0);
    }
}

TEST_CASE("registry DC gains", "[lti][registry]") {
    const auto reg = table_iii_registry();
    CHECK(dc_gain(reg[0].input_tf) == Approx(2.035e12 / 1.629e12));
    CHECK(dc_gain(reg[0].input_tf) == Approx(1.249).epsilon(1e-3));
    CHECK(dc_gain(reg[0].duty_tf) == Approx(19.06).epsilon(1e-3));
    CHECK(dc_gain(reg[4].duty_tf) == Approx(3.383e13 / 8.904e10));
}

TEST_CASE("the unstable printed S2 input model is corrected and flagged", "[lti][registry]") {
    const auto reg = table_iii_registry();
    const auto& fi2 = reg[1].input_tf;
    CHECK(fi2.corrected_from_published);
    CHECK_FALSE(fi2.note.empty());
    CHECK(fi2.den.back() == 9.261e11);
    const auto printed = make_tf({1.541e12}, {1.0, 6.509e4, 6.849e7, 9.261e12});
    CHECK_FALSE(is_stable(printed));
    for (const auto& m : reg) {
        if (m.id != Subinterval::S2) {
            CHECK_FALSE(m.input_tf.corrected_from_published);
        }
        CHECK_FALSE(m.duty_tf.corrected_from_published);
    }
}

TEST_CASE("make_tf normalizes and rejects improper models", "[lti]") {
    const auto tf = make_tf({4.0, 8.0}, {2.0, 6.0, 4.0});
    CHECK(tf.den == Polynomial{1.0, 3.0, 2.0});
    CHECK(tf.num == Polynomial{2.0, 4.0});
    CHECK(tf.strictly_proper());
    CHECK_THROWS_AS(make_tf({1.0, 2.0, 3.0}, {1.0, 1.0}), ConfigError);
    CHECK_THROWS_AS(make_tf({1.0}, {0.0}), ConfigError);
    CHECK_NOTHROW(make_tf({1.0, 1.0}, {1.0, 2.0}));  // biproper is allowed
}

// =============================================================================
// Responses
// =============================================================================

TEST_CASE("first-order step response matches the closed form", "[lti][response]") {
    const double a = 2000.0;
    const auto tf = make_tf({a}, {1.0, a});
    const auto r = step_response(tf, 2.0, 5e-3, 1e-6);
    REQUIRE(r.time.size() == r.value.size());
    CHECK(r.time.front() == 0.0);
    CHECK(r.time.back() == Approx(5e-3));
    for (std::size_t k = 0; k < r.time.size(); k += 97) {
        CHECK(r.value[k] == Approx(2.0 * (1.0 - std::exp(-a * r.time[k]))).margin(1e-9));
    }
}

TEST_CASE("second-order step response matches the closed form", "[lti][response]") {
    const double wn = 5000.0;
    const double zeta = 0.1;
    const auto tf = make_tf({wn * wn}, {1.0, 2.0 * zeta * wn, wn * wn});
    const auto r = step_response(tf, 1.0, 4e-3, 1e-6);
    const double wd = wn * std::sqrt(1.0 - zeta * zeta);
    for (std::size_t k = 0; k < r.time.size(); k += 53) {
        const double t = r.time[k];
        const double exact =
            1.0 - std::exp(-zeta * wn * t) * (std::cos(wd * t) + zeta / std::sqrt(1.0 - zeta * zeta) * std::sin(wd * t));
        CHECK(r.value[k] == Approx(exact).margin(1e-8));
    }
}

TEST_CASE("registry step responses settle at the DC gain", "[lti][response]") {
    const auto reg = table_iii_registry();
    for (const auto& m : reg) {
        for (const auto* tf : {&m.input_tf, &m.duty_tf}) {
            const auto r = step_response(*tf, 1.0, 0.06, 1e-6);
            CHECK(r.value.back() == Approx(dc_gain(*tf)).epsilon(1e-3));
        }
    }
    // Inverse response of the non-minimum-phase duty channel.
    const auto r = step_response(reg[0].duty_tf, 0.01, 2e-4, 1e-7);
    CHECK(*std::min_element(r.value.begin(), r.value.end()) < 0.0);
}

TEST_CASE("step response preconditions", "[lti][response]") {
    const auto tf = make_tf({1.0}, {1.0, 1e6});
    CHECK_THROWS_AS(step_response(tf, 1.0, 1e-3, 1e-6), ConfigError);  // under-resolved pole
    CHECK_THROWS_AS(step_response(tf, 1.0, -1.0, 1e-9), ConfigError);
    CHECK_THROWS_AS(step_response(make_tf({1.0, 0.0}, {1.0, 1.0}), 1.0, 1.0, 1e-3), ConfigError);
}

TEST_CASE("open-loop superposition of both channels", "[lti][response]") {
    const auto reg = table_iii_registry();
    const auto r = small_signal_open_loop(reg[0].input_tf, reg[0].duty_tf, Schedule::step(0.0, 1.0, 0.01),
                                          Schedule::step(0.0, 0.01, 0.04), 0.08, 1e-6);
    const auto at = [&](double t) { return r.value[static_cast<std::size_t>(std::lround(t / 1e-6))]; };
    CHECK(at(0.005) == Approx(0.0).margin(1e-12));
    CHECK(at(0.039) == Approx(dc_gain(reg[0].input_tf)).epsilon(1e-3));
    CHECK(at(0.08) == Approx(dc_gain(reg[0].input_tf) + 0.01 * dc_gain(reg[0].duty_tf)).epsilon(1e-3));
}

TEST_CASE("linear PI loops are stable and track with zero error", "[lti][closed_loop]") {
    const auto reg = table_iii_registry();
    const auto gains = table_iv();
    for (std::size_t k = 0; k < 5; ++k) {
        const Polynomial chi = closed_loop_characteristic(reg[k].duty_tf, gains[k]);
        CHECK(chi.size() == 5);
        CHECK(is_hurwitz(chi));
        // Independent check on the characteristic polynomial: s den + kp (s + ki) num.
        const auto& d = reg[k].duty_tf.den;
        const auto& n = reg[k].duty_tf.num;
        const double kp = gains[k].kp;
        const double ki = gains[k].ki;
        CHECK(chi.back() == Approx(kp * ki * n.back()));
        CHECK(chi[1] == Approx(d[1] + 0.0));
        CHECK(chi[3] == Approx(d[3] + kp * n[1] + kp * ki * n[0]));

        const auto r = closed_loop_linear(reg[k].duty_tf, reg[k].input_tf, gains[k], Schedule::step(0.0, 1.0, 0.01),
                                          Schedule::step(0.0, 1.0, 0.2), 0.4, 1e-6);
        const std::size_t before_dist = static_cast<std::size_t>(std::lround(0.2 / 1e-6)) - 1;
        CHECK(r.value[before_dist] == Approx(1.0).epsilon(1e-3));
        CHECK(r.value.back() == Approx(1.0).epsilon(2e-3));
    }
}

TEST_CASE("transfer function text round trip", "[lti][text]") {
    const auto reg = table_iii_registry();
    const auto& tf = reg[2].duty_tf;
    const std::string text = to_text(tf);
    CHECK(text.rfind("num: ", 0) == 0);
    const auto back = parse_transfer_function(text, InputChannel::duty);
    REQUIRE(back.num.size() == tf.num.size());
    REQUIRE(back.den.size() == tf.den.size());
    for (std::size_t k = 0; k < tf.den.size(); ++k) {
        CHECK(back.den[k] == Approx(tf.den[k]).epsilon(1e-9));
    }
    CHECK(back.num[0] == Approx(tf.num[0]).epsilon(1e-9));
    CHECK_THROWS_AS(parse_transfer_function("num: 1 2"), ConfigError);
    CHECK_THROWS_AS(parse_transfer_function("num: 1 / den: 1 x"), ConfigError);
    CHECK_THROWS_AS(parse_transfer_function("num: / den: 1 1"), ConfigError);
}

TEST_CASE("canonical realization reproduces the transfer function", "[lti][state_space]") {
    const auto reg = table_iii_registry();
    const auto& tf = reg[0].duty_tf;
    const StateSpace ss = realize(tf);
    // G(s) = c (sigma I - a)^-1 b + d with sigma = s * time_scale.
    for (double w : {10.0, 1e3, 5e3, 1e5}) {
        const cd s{0.0, w};
        const cd sigma = s * ss.time_scale;
        const Eigen::Index n = ss.a.rows();
        Eigen::MatrixXcd m = sigma * Eigen::MatrixXcd::Identity(n, n) - ss.a.cast<cd>();
        const cd g = (ss.c.cast<cd>() * m.lu().solve(ss.b.cast<cd>()))(0) + ss.d;
        const cd expected = evaluate(tf.num, s) / evaluate(tf.den, s);
        CHECK(std::abs(g - expected) <= 1e-9 * std::abs(expected));
    }
}
