#include "tlbc/time_series.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "tlbc/errors.hpp"

namespace tlbc {

void TimeSeries::push(const Sample& s) {
    t_s.push_back(s.t_s);
    v_in.push_back(s.v_in);
    v_ref.push_back(s.v_ref);
    duty.push_back(s.duty);
    i_l.push_back(s.i_l);
    v_c1.push_back(s.v_c1);
    v_c2.push_back(s.v_c2);
    v_o.push_back(s.v_o);
    kp_active.push_back(s.kp_active);
    ki_active.push_back(s.ki_active);
}

void TimeSeries::reserve(std::size_t n) {
    for (auto* c : {&t_s, &v_in, &v_ref, &duty, &i_l, &v_c1, &v_c2, &v_o, &kp_active, &ki_active}) {
        c->reserve(n);
    }
}

Sample TimeSeries::sample(std::size_t k) const {
    return {t_s.at(k), v_in.at(k), v_ref.at(k), duty.at(k), i_l.at(k),
            v_c1.at(k), v_c2.at(k), v_o.at(k), kp_active.at(k), ki_active.at(k)};
}

const std::vector<double>& TimeSeries::column(const std::string& name) const {
    if (name == "t_s") return t_s;
    if (name == "v_in") return v_in;
    if (name == "v_ref") return v_ref;
    if (name == "duty") return duty;
    if (name == "i_l") return i_l;
    if (name == "v_c1") return v_c1;
    if (name == "v_c2") return v_c2;
    if (name == "v_o") return v_o;
    if (name == "kp_active") return kp_active;
    if (name == "ki_active") return ki_active;
    throw ConfigError(fmt::format("unknown time-series column '{}'", name));
}

void write_csv(std::ostream& out, const TimeSeries& ts) {
    out << kTimeSeriesHeader << '\n';
    for (std::size_t k = 0; k < ts.size(); ++k) {
        fmt::print(out, "{},{},{},{},{},{},{},{},{},{}\n", ts.t_s[k], ts.v_in[k], ts.v_ref[k],
                   ts.duty[k], ts.i_l[k], ts.v_c1[k], ts.v_c2[k], ts.v_o[k], ts.kp_active[k],
                   ts.ki_active[k]);
    }
}

TimeSeries read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kTimeSeriesHeader) {
        throw ConfigError("time-series CSV must start with the header row");
    }
    TimeSeries ts;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) {
            continue;
        }
        std::array<double, 10> v{};
        std::istringstream fields(line);
        std::string cell;
        std::size_t n = 0;
        while (std::getline(fields, cell, ',')) {
            if (n >= v.size()) {
                throw ConfigError(fmt::format("row {}: too many columns", row));
            }
            try {
                v[n++] = std::stod(cell);
            } catch (const std::exception&) {
                throw ConfigError(fmt::format("row {}: '{}' is not a number", row, cell));
            }
        }
        if (n != v.size()) {
            throw ConfigError(fmt::format("row {}: expected 10 columns, got {}", row, n));
        }
        ts.push({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]});
    }
    return ts;
}

}  // namespace tlbc
