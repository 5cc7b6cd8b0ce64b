#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "tlbc/control.hpp"
#include "tlbc/errors.hpp"

using namespace tlbc;
using Catch::Approx;

namespace {
constexpr double kDt = 31.25e-6;
const DutyLimits kLimits{0.0, 0.9};
}  // namespace

TEST_CASE("gain table", "[control][table]") {
    const GainTable t = table_iv();
    CHECK(t[0] == PiGains{5.24e-6, 1.42e6});
    CHECK(t[1] == PiGains{2.93e-6, 1.72e6});
    CHECK(t[2] == PiGains{1.64e-6, 1.21e6});
    CHECK(t[3] == PiGains{7.34e-7, 1.38e6});
    CHECK(t[4] == PiGains{2.60e-7, 1.18e6});
    for (const auto& g : t) {
        CHECK_NOTHROW(g.validate());
    }
    CHECK_THROWS_AS((PiGains{0.0, 1.0}.validate()), ConfigError);
    CHECK_THROWS_AS((PiGains{1.0, -1.0}.validate()), ConfigError);
}

TEST_CASE("PI update law", "[control][pi]") {
    const PiGains pi1 = table_iv()[0];

    SECTION("one step from rest") {
        const PiStep s = pi_step(1.0, PiState{}, pi1, kLimits, kDt);
        CHECK(s.state.integrator == Approx(3.125e-5));
        CHECK(s.unsaturated == Approx(5.24e-6 + 5.24e-6 * 1.42e6 * 3.125e-5));
        CHECK(s.unsaturated == Approx(2.378e-4).epsilon(1e-3));
        CHECK(s.duty == s.unsaturated);
    }
    SECTION("zero error leaves only the integral path") {
        PiState st;
        st.integrator = 0.02;
        st.applied = pi1;
        const PiStep s = pi_step(0.0, st, pi1, kLimits, kDt);
        CHECK(s.duty == Approx(pi1.kp * pi1.ki * 0.02));
        CHECK(s.state.integrator == 0.02);
    }
    SECTION("integral gain is kp * ki") {
        PiState st;
        st.applied = pi1;
        const int n = 1000;
        for (int k = 0; k < n; ++k) {
            st = pi_step(0.5, st, pi1, kLimits, kDt).state;
        }
        const PiStep s = pi_step(0.0, st, pi1, kLimits, kDt);
        CHECK(s.duty == Approx(pi1.kp * pi1.ki * 0.5 * n * kDt));
    }
    SECTION("output is clamped") {
        PiState st;
        st.integrator = 1.0;
        st.applied = pi1;
        CHECK(pi_step(0.0, st, pi1, kLimits, kDt).duty == 0.9);
        st.integrator = -1.0;
        CHECK(pi_step(0.0, st, pi1, kLimits, kDt).duty == 0.0);
    }
}

TEST_CASE("conditional integration holds the integrator at the limit", "[control][antiwindup]") {
    const PiGains g = table_iv()[0];
    PiState st;
    st.applied = g;
    st.integrator = integrator_for_duty(0.9, g);
    const PiStep s = pi_step(1.0, st, g, kLimits, kDt);
    CHECK(s.duty == 0.9);
    CHECK(s.state.integrator == st.integrator);

    // Errors pulling back from the limit still integrate.
    const PiStep back = pi_step(-1.0, st, g, kLimits, kDt);
    CHECK(back.state.integrator < st.integrator);

    // Without anti-windup the same step winds up.
    const PiStep wound = pi_step(1.0, st, g, kLimits, kDt, AntiWindup::none);
    CHECK(wound.state.integrator > st.integrator);
    CHECK(wound.duty == 0.9);
}

TEST_CASE("integrator stays bounded under sustained saturation", "[control][antiwindup][property]") {
    const PiGains g = table_iv()[2];
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> err(2.0, 30.0);
    PiState st;
    st.applied = g;
    const double bound = kLimits.upper / (g.kp * g.ki);
    for (int k = 0; k < 200000; ++k) {
        st = pi_step(err(rng), st, g, kLimits, kDt).state;
        REQUIRE(st.integrator <= bound * (1.0 + 1e-12));
    }
    CHECK(st.integrator > 0.99 * bound - 30.0 / g.ki);
}

TEST_CASE("gain changes keep the integral path continuous", "[control][pi]") {
    const GainTable t = table_iv();
    PiState st;
    st.applied = t[0];
    st.integrator = integrator_for_duty(0.3, t[0]);
    const PiStep s = pi_step(0.0, st, t[3], kLimits, kDt);
    CHECK(s.duty == Approx(0.3).epsilon(1e-12));
    CHECK(s.state.applied == t[3]);
}

TEST_CASE("membership examples", "[control][fuzzy]") {
    const FuzzyPartition part;
    CHECK(part.overlap_halfwidth() == 1.0);
    CHECK(membership_weights(15.0, part) == MembershipWeights{1, 0, 0, 0, 0});
    CHECK(membership_weights(18.0, part) == MembershipWeights{0.5, 0.5, 0, 0, 0});
    CHECK(membership_weights(60.0, part) == MembershipWeights{0, 0, 0, 0, 1});
    CHECK(membership_weights(5.0, part) == MembershipWeights{1, 0, 0, 0, 0});
    const auto w = membership_weights(30.5, part);
    CHECK(w[1] == Approx(0.0).margin(1e-15));
    CHECK(w[2] == Approx(0.75));
    CHECK(w[3] == Approx(0.25));
    CHECK_THROWS_AS(FuzzyPartition(0.0), ConfigError);
    CHECK_THROWS_AS(FuzzyPartition(3.5), ConfigError);
}

TEST_CASE("partition of unity", "[control][fuzzy][property]") {
    for (double hw : {0.25, 1.0, 3.0}) {
        const FuzzyPartition part(hw);
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> v(12.0, 57.0);
        for (int k = 0; k < 10000; ++k) {
            const auto w = membership_weights(v(rng), part);
            double sum = 0.0;
            for (double x : w) {
                REQUIRE(x >= 0.0);
                REQUIRE(x <= 1.0);
                sum += x;
            }
            REQUIRE(std::abs(sum - 1.0) < 1e-12);
        }
        for (Subinterval s : kSubintervals) {
            const auto w = membership_weights(midpoint(s), part);
            CHECK(w[index(s)] == 1.0);
            CHECK(std::count(w.begin(), w.end(), 0.0) == 4);
        }
    }
}

TEST_CASE("blended gains", "[control][fuzzy]") {
    const FuzzyPartition part;
    const GainTable t = table_iv();
    CHECK(blended_gains(15.0, part, t) == t[0]);
    const PiGains b = blended_gains(18.0, part, t);
    CHECK(b.kp == Approx(4.085e-6));
    CHECK(b.ki == Approx(1.57e6));

    // Convex combination and Lipschitz continuity.
    double kp_min = 1e9, kp_max = 0, ki_min = 1e18, ki_max = 0, dkp = 0, dki = 0;
    for (std::size_t k = 0; k < 5; ++k) {
        kp_min = std::min(kp_min, t[k].kp);
        kp_max = std::max(kp_max, t[k].kp);
        ki_min = std::min(ki_min, t[k].ki);
        ki_max = std::max(ki_max, t[k].ki);
        if (k > 0) {
            dkp = std::max(dkp, std::abs(t[k].kp - t[k - 1].kp));
            dki = std::max(dki, std::abs(t[k].ki - t[k - 1].ki));
        }
    }
    const double h = 1e-3;
    PiGains prev = blended_gains(10.0, part, t);
    for (double v = 10.0 + h; v < 60.0; v += h) {
        const PiGains g = blended_gains(v, part, t);
        REQUIRE(g.kp >= kp_min * (1 - 1e-12));
        REQUIRE(g.kp <= kp_max * (1 + 1e-12));
        REQUIRE(g.ki >= ki_min * (1 - 1e-12));
        REQUIRE(g.ki <= ki_max * (1 + 1e-12));
        // Slope never exceeds the neighbour gap over the overlap width.
        REQUIRE(std::abs(g.kp - prev.kp) <= dkp / (2.0 * part.overlap_halfwidth()) * h * 1.001 + 1e-20);
        REQUIRE(std::abs(g.ki - prev.ki) <= dki / (2.0 * part.overlap_halfwidth()) * h * 1.001 + 1e-6);
        prev = g;
    }
}

TEST_CASE("single active rule reproduces the local PI bit for bit", "[control][tsf][property]") {
    const TsfConfig cfg;
    const GainTable t = table_iv();
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> err(-3.0, 3.0);
    for (Subinterval s : kSubintervals) {
        // Core of S_k: inside the set, away from both crossovers.
        const double lo = lower_edge(s) + (s == Subinterval::S1 ? 0.0 : 1.0);
        const double hi = upper_edge(s) - (s == Subinterval::S5 ? 0.0 : 1.0);
        std::uniform_real_distribution<double> ref(lo, hi);
        PiState a;
        PiState b;
        for (int k = 0; k < 2000; ++k) {
            const double v_ref = ref(rng);
            const double v_o = v_ref - err(rng);
            const TsfStep ts = tsf_pi_step(v_ref, v_o, a, cfg, kLimits, kDt);
            const PiStep ps = pi_step(v_ref - v_o, b, t[index(s)], kLimits, kDt);
            REQUIRE(ts.gains == t[index(s)]);
            REQUIRE(ts.pi.duty == ps.duty);
            REQUIRE(ts.pi.unsaturated == ps.unsaturated);
            REQUIRE(ts.pi.state.integrator == ps.state.integrator);
            a = ts.pi.state;
            b = ps.state;
        }
    }
}

TEST_CASE("scheduling variable selects the blend input", "[control][tsf]") {
    TsfConfig cfg;
    const PiState st;
    CHECK(tsf_pi_step(15.0, 18.0, st, cfg, kLimits, kDt).gains == table_iv()[0]);
    cfg.scheduling = SchedulingVariable::output;
    const PiGains g = tsf_pi_step(15.0, 18.0, st, cfg, kLimits, kDt).gains;
    CHECK(g.kp == Approx(4.085e-6));
    // Zero error and an empty integrator give zero proportional contribution.
    CHECK(tsf_pi_step(20.0, 20.0, st, cfg, kLimits, kDt).pi.unsaturated == 0.0);
}

TEST_CASE("controller determinism", "[control][property]") {
    auto sequence = [] {
        const TsfConfig cfg;
        std::mt19937_64 rng(21);
        std::uniform_real_distribution<double> v(12.0, 57.0);
        PiState st;
        std::vector<double> out;
        for (int k = 0; k < 5000; ++k) {
            const double r = v(rng);
            const TsfStep s = tsf_pi_step(r, r - 0.3, st, cfg, kLimits, kDt);
            out.push_back(s.pi.duty);
            st = s.pi.state;
        }
        return out;
    };
    CHECK(sequence() == sequence());
}
