#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tlbc {

/// One recorded sample of a converter run.
struct Sample {
    double t_s = 0.0;
    double v_in = 0.0;
    double v_ref = 0.0;
    double duty = 0.0;
    double i_l = 0.0;
    double v_c1 = 0.0;
    double v_c2 = 0.0;
    double v_o = 0.0;
    double kp_active = 0.0;
    double ki_active = 0.0;
};

/// Column store of decimated simulation output. Columns always have equal
/// length and `t_s` is strictly increasing.
struct TimeSeries {
    std::vector<double> t_s;
    std::vector<double> v_in;
    std::vector<double> v_ref;
    std::vector<double> duty;
    std::vector<double> i_l;
    std::vector<double> v_c1;
    std::vector<double> v_c2;
    std::vector<double> v_o;
    std::vector<double> kp_active;
    std::vector<double> ki_active;

    void push(const Sample& s);
    void reserve(std::size_t n);
    [[nodiscard]] std::size_t size() const noexcept { return t_s.size(); }
    [[nodiscard]] bool empty() const noexcept { return t_s.empty(); }
    [[nodiscard]] Sample sample(std::size_t k) const;

    /// Named column lookup ("v_o", "duty", ...); throws ConfigError if unknown.
    [[nodiscard]] const std::vector<double>& column(const std::string& name) const;

    bool operator==(const TimeSeries&) const = default;
};

inline constexpr const char* kTimeSeriesHeader =
    "t_s,v_in,v_ref,duty,i_l,v_c1,v_c2,v_o,kp_active,ki_active";

/// CSV with the exact header above; values use shortest round-trip formatting.
void write_csv(std::ostream& out, const TimeSeries& ts);
[[nodiscard]] TimeSeries read_csv(std::istream& in);

}  // namespace tlbc
