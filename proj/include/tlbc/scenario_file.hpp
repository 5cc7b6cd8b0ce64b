#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "tlbc/circuit.hpp"
#include "tlbc/scenario.hpp"

namespace tlbc {

/// A scenario plus the converter it runs on, as read from an INI-style file:
///
///   name = sag_test
///   t_end = 0.4
///   initial = auto              ; or "i_l v_c1 v_c2"
///
///   [converter]                 ; any ConverterParams field, SI units
///   r_load = 30
///
///   [controller]
///   type = fixed_pi             ; open_loop | fixed_pi | tsf_pi
///   subinterval = S4            ; fixed_pi: table gains ...
///   kp = 7.34e-7                ; ... or explicit kp and ki
///   ki = 1.38e6
///   anti_windup = conditional_integration   ; or none
///   scheduling = reference      ; tsf_pi: reference | output
///   overlap_halfwidth = 1.0     ; tsf_pi
///   gains_s1 = 5.24e-6 1.42e6   ; tsf_pi: override one table row
///
///   [schedules]                 ; "t:value" pairs, first at t = 0
///   v_in = 0:11, 0.12:13
///   v_ref = 0:15
///   duty = 0:0.2                ; open_loop only
///
/// Unknown sections or keys are rejected.
struct ScenarioDocument {
    Scenario scenario;
    ConverterParams params;
};

/// Sets the ConverterParams field called `key`. Throws ConfigError for an
/// unknown name; does not validate.
void set_converter_field(ConverterParams& params, std::string_view key, double value);

/// Throws ConfigError with the offending key or line.
[[nodiscard]] ScenarioDocument parse_scenario(std::istream& in);
[[nodiscard]] ScenarioDocument load_scenario_file(const std::filesystem::path& path);

/// Inverse of parse_scenario (every field written explicitly).
void write_scenario(std::ostream& out, const ScenarioDocument& doc);

}  // namespace tlbc
