// tlbc: three-level boost converter workbench.
//
//   tlbc characteristic [--from D --to D --steps N]
//   tlbc identify (--subinterval S1 | --all) [--scan-zeros] [--poles N --zeros M] [--channel duty]
//   tlbc run <builtin-name | scenario.ini>
//   tlbc reproduce-all [--jobs N]
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tlbc/commands.hpp"
#include "tlbc/errors.hpp"

namespace cli = tlbc::cli;

int main(int argc, char** argv) {
    CLI::App app{"Three-level boost converter workbench: simulation, identification and TSF-PI control"};
    app.require_subcommand(1);

    std::string out_dir = ".";
    bool svg = false;
    std::uint64_t seed = 1;
    std::vector<std::string> overrides;
    app.add_option("-o,--out", out_dir, "Output directory")->capture_default_str();
    app.add_flag("--svg", svg, "Also write SVG plots");
    app.add_option("--seed", seed, "Optimizer initialization seed")->capture_default_str();
    app.add_option("--param", overrides, "Converter parameter override, name=value (repeatable)");

    // characteristic
    auto* chara = app.add_subcommand("characteristic", "Steady output over a duty grid");
    cli::CharacteristicOptions copt;
    double from = 0.0;
    double to = 0.0;
    double v_in = 0.0;
    auto* from_opt = chara->add_option("--from", from, "First duty value");
    auto* to_opt = chara->add_option("--to", to, "Last duty value");
    chara->add_option("--steps", copt.steps, "Grid points")->capture_default_str()->check(CLI::Range(2, 100000));
    auto* vin_opt = chara->add_option("--v-in", v_in, "Input voltage");

    // identify
    auto* ident = app.add_subcommand("identify", "Step experiments and transfer-function fits");
    cli::IdentifyOptions iopt;
    std::string sub_text;
    std::string channel_text;
    std::string data_path;
    int zeros = 0;
    double step = 0.0;
    auto* sub_opt = ident->add_option("--subinterval", sub_text, "S1..S5");
    auto* all_opt = ident->add_flag("--all", iopt.all, "All five subintervals");
    sub_opt->excludes(all_opt);
    ident->add_flag("--scan-zeros", iopt.scan_zeros, "Fit every zero count from 0 to --poles");
    ident->add_option("--poles", iopt.poles, "Model poles")->capture_default_str();
    auto* zeros_opt = ident->add_option("--zeros", zeros, "Model zeros (default 0 for input, 1 for duty)");
    ident->add_option("--channel", channel_text, "input or duty (default both)")
        ->check(CLI::IsMember({"input", "duty"}));
    auto* data_opt = ident->add_option("--data", data_path, "Fit a recorded t_s,deviation_v CSV");
    auto* step_opt = ident->add_option("--step", step, "Step size of --data");

    // run
    auto* runc = app.add_subcommand("run", "Run a builtin scenario or a scenario file");
    std::string scenario;
    runc->add_option("scenario", scenario, "fig7_s1..fig7_s5, fig8a, fig8b, fig11, fig12, or a file")->required();

    // reproduce-all
    auto* repro = app.add_subcommand("reproduce-all", "Every builtin scenario, characteristic and identification");
    cli::ReproduceOptions ropt;
    bool no_ident = false;
    repro->add_option("--jobs", ropt.jobs, "Worker threads (0 = all cores)")->capture_default_str();
    repro->add_flag("--no-identification", no_ident, "Skip the identification tables");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::kExitConfig;
    }

    try {
        cli::CommonOptions common;
        common.out_dir = out_dir;
        common.svg = svg;
        common.seed = seed;
        for (const auto& o : overrides) {
            cli::apply_override(common.params, o);
        }

        if (*chara) {
            if (*from_opt) copt.from = from;
            if (*to_opt) copt.to = to;
            if (*vin_opt) copt.v_in = v_in;
            return cli::characteristic(common, copt, std::cout);
        }
        if (*ident) {
            if (*sub_opt) {
                iopt.subinterval = tlbc::parse_subinterval(sub_text);
                if (!iopt.subinterval) {
                    throw tlbc::ConfigError(fmt::format("unknown subinterval '{}'", sub_text));
                }
            }
            if (*zeros_opt) iopt.zeros = zeros;
            if (!channel_text.empty()) {
                iopt.channel = channel_text == "duty" ? tlbc::InputChannel::duty : tlbc::InputChannel::input_voltage;
            }
            if (*data_opt) iopt.data = data_path;
            if (*step_opt) iopt.step_size = step;
            return cli::identify(common, iopt, std::cout);
        }
        if (*runc) {
            return cli::run(common, scenario, std::cout);
        }
        if (*repro) {
            ropt.identification = !no_ident;
            return cli::reproduce_all(common, ropt, std::cout);
        }
    } catch (const tlbc::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kExitConfig;
    } catch (const tlbc::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return cli::kExitNumerical;
    }
    return cli::kExitOk;
}
