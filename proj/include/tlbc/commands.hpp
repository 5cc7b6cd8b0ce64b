#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tlbc/circuit.hpp"
#include "tlbc/lti.hpp"
#include "tlbc/subinterval.hpp"

/// Command implementations behind the `tlbc` executable. Each writes its
/// files under `out_dir`, prints a human-readable report to `log`, and throws
/// ConfigError / NumericalError on failure (exit codes 2 / 3).
namespace tlbc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct CommonOptions {
    std::filesystem::path out_dir = ".";
    bool svg = false;
    std::uint64_t seed = 1;
    ConverterParams params{};
};

/// Applies "name=value" to a ConverterParams field. Throws ConfigError.
void apply_override(ConverterParams& params, const std::string& assignment);

struct CharacteristicOptions {
    std::optional<double> from;  ///< default 0
    std::optional<double> to;    ///< default: just past the duty reaching 57 V
    int steps = 41;
    std::optional<double> v_in;  ///< default: params.v_i_nominal
};

/// Writes characteristic.csv (d,v_o,status). Partial failures are listed.
int characteristic(const CommonOptions& common, const CharacteristicOptions& options, std::ostream& log);

struct IdentifyOptions {
    std::optional<Subinterval> subinterval;
    bool all = false;
    bool scan_zeros = false;
    int poles = 3;
    std::optional<int> zeros;              ///< default: 0 for F_i, 1 for F_d
    std::optional<InputChannel> channel;   ///< default: both
    std::optional<std::filesystem::path> data;  ///< fit recorded deviation CSV instead
    std::optional<double> step_size;       ///< with --data; default per channel
};

int identify(const CommonOptions& common, const IdentifyOptions& options, std::ostream& log);

/// Runs a builtin scenario by name, or a scenario file. Divergence is a
/// reported outcome and still returns kExitOk.
int run(const CommonOptions& common, const std::string& scenario, std::ostream& log);

struct ReproduceOptions {
    unsigned jobs = 0;  ///< worker count; 0 = hardware concurrency
    bool identification = true;
};

/// Every builtin scenario, the characteristic and the identification tables,
/// plus summary.txt mapping each output to the experiment it reproduces.
int reproduce_all(const CommonOptions& common, const ReproduceOptions& options, std::ostream& log);

}  // namespace tlbc::cli
