#include <catch_amalgamated.hpp>

#include <limits>
#include <sstream>

#include "tlbc/errors.hpp"
#include "tlbc/schedule.hpp"
#include "tlbc/subinterval.hpp"
#include "tlbc/time_series.hpp"

using namespace tlbc;

TEST_CASE("schedule lookup is right-continuous", "[schedule]") {
    const Schedule s({{0.0, 11.0}, {0.12, 13.0}, {0.25, 11.0}});
    CHECK(s.at(0.0) == 11.0);
    CHECK(s.at(0.119999) == 11.0);
    CHECK(s.at(0.12) == 13.0);
    CHECK(s.at(0.3) == 11.0);
    CHECK(s.initial() == 11.0);
    CHECK(s.next_change_after(0.0) == 0.12);
    CHECK(s.next_change_after(0.12) == 0.25);
    CHECK_FALSE(s.next_change_after(0.25).has_value());

    const Schedule c = Schedule::constant(17.0);
    CHECK(c.entries().size() == 1);
    CHECK(c.at(1e3) == 17.0);

    const Schedule st = Schedule::step(15.0, 25.0, 0.2);
    CHECK(st.at(0.1999) == 15.0);
    CHECK(st.at(0.2) == 25.0);
}

TEST_CASE("schedule rejects malformed entry lists", "[schedule]") {
    using V = std::vector<ScheduleEntry>;
    CHECK_THROWS_AS(Schedule(V{}), ConfigError);
    CHECK_THROWS_AS(Schedule(V{{0.1, 1.0}}), ConfigError);
    CHECK_THROWS_AS(Schedule(V{{0.0, 1.0}, {0.2, 2.0}, {0.2, 3.0}}), ConfigError);
    CHECK_THROWS_AS(Schedule(V{{0.0, 1.0}, {0.3, 2.0}, {0.2, 3.0}}), ConfigError);
    CHECK_THROWS_AS(Schedule(V{{0.0, std::numeric_limits<double>::quiet_NaN()}}), ConfigError);
    CHECK_THROWS_AS(Schedule::step(1.0, 2.0, 0.0), ConfigError);
}

TEST_CASE("subinterval table", "[subinterval]") {
    CHECK(lower_edge(Subinterval::S1) == 12.0);
    CHECK(upper_edge(Subinterval::S5) == 57.0);
    CHECK(midpoint(Subinterval::S1) == 15.0);
    CHECK(midpoint(Subinterval::S4) == 35.5);
    CHECK(name(Subinterval::S3) == "S3");
    CHECK(parse_subinterval("S2") == Subinterval::S2);
    CHECK(parse_subinterval("s5") == Subinterval::S5);
    CHECK_FALSE(parse_subinterval("S6").has_value());
    CHECK_FALSE(parse_subinterval("").has_value());
}

namespace {

TimeSeries sample_series() {
    TimeSeries ts;
    for (int k = 0; k < 5; ++k) {
        const double x = 0.1 * k + 1.0 / 3.0;
        ts.push({k * 3.125e-5, 12.0, 15.0, 0.2 + x * 1e-3, 1.0 + x, 7.5 + x, 7.5 - x, 15.0, 5.24e-6, 1.42e6});
    }
    return ts;
}

}  // namespace

TEST_CASE("time series CSV round trip is exact", "[time_series]") {
    const TimeSeries ts = sample_series();
    std::stringstream buf;
    write_csv(buf, ts);
    const std::string text = buf.str();
    CHECK(text.rfind("t_s,v_in,v_ref,duty,i_l,v_c1,v_c2,v_o,kp_active,ki_active\n", 0) == 0);
    const TimeSeries back = read_csv(buf);
    CHECK(back == ts);
    CHECK(back.sample(3).v_c1 == ts.v_c1[3]);
    CHECK(back.column("v_o") == ts.v_o);
}

TEST_CASE("time series CSV errors", "[time_series]") {
    std::istringstream bad_header("t,v\n0,1\n");
    CHECK_THROWS_AS(read_csv(bad_header), ConfigError);
    std::istringstream short_row(std::string(kTimeSeriesHeader) + "\n0,1,2\n");
    CHECK_THROWS_AS(read_csv(short_row), ConfigError);
    std::istringstream not_number(std::string(kTimeSeriesHeader) + "\n0,1,2,3,4,5,6,x,8,9\n");
    CHECK_THROWS_AS(read_csv(not_number), ConfigError);
    CHECK_THROWS_AS(sample_series().column("nope"), ConfigError);
}
