#include "tlbc/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "tlbc/errors.hpp"
#include "tlbc/scenario.hpp"
#include "tlbc/scenario_file.hpp"
#include "tlbc/svg.hpp"
#include "tlbc/sysid.hpp"

namespace tlbc::cli {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text) || !out.flush()) {
        throw ConfigError(fmt::format("cannot write '{}'", path.string()));
    }
}

void prepare(const CommonOptions& common) {
    common.params.validate();
    std::error_code ec;
    fs::create_directories(common.out_dir, ec);
    if (ec || !fs::is_directory(common.out_dir)) {
        throw ConfigError(fmt::format("cannot create output directory '{}'", common.out_dir.string()));
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// =============================================================================
// Characteristic
// =============================================================================

struct CharacteristicOutput {
    std::string csv;
    std::string report;
    std::string svg;
};

CharacteristicOutput characteristic_output(const ConverterParams& params,
                                           const CharacteristicOptions& options) {
    const double v_in = options.v_in.value_or(params.v_i_nominal);
    const double from = options.from.value_or(0.0);
    double to = 0.0;
    if (options.to) {
        to = *options.to;
    } else {
        // Far enough to cover the 57 V top of the universe.
        to = std::ceil((averaged_duty_for(params, kSubintervalEdges.back(), v_in) + 0.02) * 100.0) / 100.0;
    }
    if (options.steps < 2 || !(to > from) || from < 0.0 || to >= 1.0) {
        throw ConfigError("characteristic grid needs 0 <= from < to < 1 and at least 2 steps");
    }
    std::vector<double> grid;
    for (int k = 0; k < options.steps; ++k) {
        grid.push_back(from + (to - from) * k / (options.steps - 1));
    }
    const auto points = operating_characteristic(params, grid, v_in);

    CharacteristicOutput out;
    out.csv = "d,v_o,status\n";
    out.report = fmt::format("operating characteristic at v_in = {} V ({} points)\n{:>8} {:>10} {:>10}\n", v_in,
                             points.size(), "d", "v_o [V]", "ideal [V]");
    PlotSeries sim{"switched circuit", {}, {}};
    PlotSeries ideal{"averaged model", {}, {}};
    int failed = 0;
    for (const auto& p : points) {
        const double avg = averaged_steady_state(params, p.d, v_in).v_o();
        if (p.ok) {
            out.csv += fmt::format("{},{},ok\n", p.d, p.v_o);
            out.report += fmt::format("{:>8.4f} {:>10.4f} {:>10.4f}\n", p.d, p.v_o, avg);
        } else {
            ++failed;
            out.csv += fmt::format("{},,failed\n", p.d);
            out.report += fmt::format("{:>8.4f} {:>10} {:>10.4f}  {}\n", p.d, "failed", avg, p.error);
        }
        sim.x.push_back(p.d);
        sim.y.push_back(p.ok ? p.v_o : std::nan(""));
        ideal.x.push_back(p.d);
        ideal.y.push_back(avg);
    }
    if (failed > 0) {
        out.report += fmt::format("{} point(s) failed to settle\n", failed);
    }
    out.svg = render_svg({"Operating characteristic", "duty cycle", "v_o [V]", {sim, ideal}});
    return out;
}

// =============================================================================
// Identification
// =============================================================================

const char* kRecordNote =
    "records: 2 ms steady pre-step plus at least 24 ms after the step (extended until re-settled, "
    "max 100 ms); one cycle-averaged output sample per switching period; steps of 1 V (input) and "
    "0.01 (duty)";

std::string model_symbol(InputChannel c, std::optional<Subinterval> s) {
    return fmt::format("F_{}{}", c == InputChannel::input_voltage ? "i" : "d",
                       s ? std::to_string(index(*s) + 1) : std::string{});
}

std::string pole_text(const TransferFunction& tf) {
    std::string out;
    for (const auto& p : poles(tf)) {
        out += fmt::format("{}{:.4g}{:+.4g}j", out.empty() ? "" : ", ", p.real(), p.imag());
    }
    return out;
}

int default_zeros(InputChannel c) {
    return c == InputChannel::input_voltage ? 0 : 1;
}

struct IdentifyOutput {
    std::string report;
    std::vector<std::pair<std::string, std::string>> files;  ///< name, content
};

IdentifyOutput identify_output(const CommonOptions& common, const IdentifyOptions& options) {
    if (options.poles < 1) {
        throw ConfigError("--poles must be at least 1");
    }
    if (options.zeros && (*options.zeros < 0 || *options.zeros > options.poles)) {
        throw ConfigError("--zeros must lie in [0, poles]");
    }
    if (options.all == options.subinterval.has_value() && !options.data) {
        throw ConfigError("identify needs exactly one of --subinterval or --all");
    }
    FitOptions fit_opt;
    fit_opt.seed = common.seed;

    std::vector<InputChannel> channels;
    if (options.channel) {
        channels.push_back(*options.channel);
    } else {
        channels = {InputChannel::input_voltage, InputChannel::duty};
    }

    struct Job {
        Experiment experiment;
        std::string label;
    };
    std::vector<Job> jobs;
    IdentifyOutput out;
    if (options.data) {
        if (!options.channel) {
            throw ConfigError("--data needs --channel");
        }
        std::ifstream in(*options.data);
        if (!in) {
            throw ConfigError(fmt::format("cannot open '{}'", options.data->string()));
        }
        const double step = options.step_size.value_or(*options.channel == InputChannel::duty ? 0.01 : 1.0);
        Experiment e = read_experiment_csv(in, step, *options.channel);
        if (options.subinterval) {
            e.operating_point = operating_point(*options.subinterval, common.params.v_i_nominal);
        }
        jobs.push_back({std::move(e), model_symbol(*options.channel, options.subinterval)});
        out.report += fmt::format("data: {} ({} samples, step {})\n", options.data->string(),
                                  jobs.back().experiment.t.size(), step);
    } else {
        std::vector<Subinterval> subs;
        if (options.all) {
            subs.assign(kSubintervals.begin(), kSubintervals.end());
        } else {
            subs.push_back(*options.subinterval);
        }
        for (Subinterval s : subs) {
            const OperatingPoint op = operating_point(s, common.params.v_i_nominal);
            for (InputChannel c : channels) {
                Experiment e = generate_experiment(common.params, op, c);
                std::ostringstream csv;
                write_experiment_csv(csv, e);
                out.files.emplace_back(fmt::format("experiment_{}_{}.csv", name(s), name(c)), csv.str());
                jobs.push_back({std::move(e), model_symbol(c, s)});
            }
        }
        out.report += std::string(kRecordNote) + "\n";
    }

    const auto registry = table_iii_registry();
    auto registry_model = [&](const Experiment& e) -> std::optional<TransferFunction> {
        if (options.data) {
            return std::nullopt;
        }
        const auto& m = registry[index(e.operating_point.subinterval)];
        return e.channel == InputChannel::input_voltage ? m.input_tf : m.duty_tf;
    };

    for (const Job& job : jobs) {
        const Experiment& e = job.experiment;
        out.report += fmt::format("\n== {}: {} step at v_in = {} V, d = {:.4f}{}\n", job.label, name(e.channel),
                                  e.operating_point.v_in, e.operating_point.d,
                                  options.data ? "" : fmt::format(" (baseline v_o = {:.4f} V)", e.baseline));
        const auto reference = registry_model(e);
        if (options.scan_zeros) {
            std::vector<int> counts;
            for (int z = 0; z <= options.poles; ++z) {
                counts.push_back(z);
            }
            const auto scan = structure_scan(e, options.poles, counts, fit_opt);
            out.report += fmt::format("{:>6} {:>8} {:>12}  {}\n", "zeros", "fit [%]", "dc gain", "status");
            const ScanEntry* best = nullptr;
            for (const auto& entry : scan) {
                if (entry.result) {
                    out.report += fmt::format("{:>6} {:>8.4f} {:>12.5g}  {}\n", entry.n_zeros,
                                              entry.result->fit_percent, dc_gain(entry.result->model),
                                              entry.error.empty() ? "ok" : entry.error);
                    if (!best || entry.result->fit_percent > best->result->fit_percent) {
                        best = &entry;
                    }
                } else {
                    out.report += fmt::format("{:>6} {:>8} {:>12}  failed: {}\n", entry.n_zeros, "-", "-", entry.error);
                }
            }
            if (best) {
                out.report += fmt::format("best fit: {} zero(s)\n", best->n_zeros);
            }
            for (const auto& entry : scan) {
                if (entry.result) {
                    out.report += fmt::format("[{} zeros] {}", entry.n_zeros, render(*entry.result));
                }
            }
        } else {
            const int zeros = options.zeros.value_or(default_zeros(e.channel));
            const FitResult fit = fit_tf(e, options.poles, zeros, fit_opt);
            out.report += render(fit);
            out.report += fmt::format("dc gain {:.5g}, poles {}\n", dc_gain(fit.model), pole_text(fit.model));
        }
        if (reference) {
            out.report += fmt::format("registry {}: dc gain {:.5g}, poles {}{}\n", job.label, dc_gain(*reference),
                                      pole_text(*reference),
                                      reference->corrected_from_published ? " (corrected entry: " + reference->note + ")" : "");
        }
    }
    return out;
}

// =============================================================================
// Scenarios
// =============================================================================

struct RunOutput {
    std::string csv;
    std::string metrics;
    std::string svg;
    bool all_settled = true;
    bool diverged = false;
};

std::string metrics_table(const std::vector<StepMetrics>& metrics) {
    std::string out = fmt::format("{:>8} {:>8} {:>9} {:>9} {:>9} {:>9} {:>10} {:>10} {:>8}\n", "event_s", "end_s",
                                  "initial", "final", "v_ref", "os_%", "settle_ms", "sse_V", "settled");
    for (const auto& m : metrics) {
        out += fmt::format("{:>8.3f} {:>8.3f} {:>9.4f} {:>9.4f} {:>9.3f} {:>9.3f} {:>10.2f} {:>10.5f} {:>8}\n",
                           m.event_time, m.window_end, m.initial_value, m.final_value, m.reference,
                           m.overshoot_percent, m.settling_time_s * 1e3, m.steady_state_error_v,
                           m.settled ? "yes" : "no");
    }
    return out;
}

RunOutput run_output(const Scenario& sc, const ConverterParams& params) {
    const RunResult result = run(sc, params);

    RunOutput out;
    std::ostringstream csv;
    write_csv(csv, result.series);
    out.csv = csv.str();
    out.diverged = result.divergence_time.has_value();

    out.metrics = fmt::format("scenario {}\n", sc.name);
    if (!sc.reproduces.empty()) {
        out.metrics += fmt::format("reproduces: {}\n", sc.reproduces);
    }
    out.metrics += fmt::format("simulated {} s, {} samples\n", sc.t_end, result.series.size());
    if (result.divergence_time) {
        out.metrics += fmt::format("DIVERGED at t = {:.6f} s: {}\n", *result.divergence_time,
                                   result.divergence_message);
    }
    if (result.duty_clamped) {
        out.metrics += "duty saturated at least once\n";
    }
    std::vector<StepMetrics> metrics;
    for (double ev : sc.events()) {
        std::vector<double> ends = sc.events();
        const auto next = std::upper_bound(ends.begin(), ends.end(), ev);
        double end = next == ends.end() ? sc.t_end : *next;
        if (result.divergence_time) {
            end = std::min(end, *result.divergence_time);
        }
        try {
            metrics.push_back(step_metrics(result.series, ev, end));
        } catch (const ConfigError& e) {
            StepMetrics m;
            m.event_time = ev;
            m.window_end = end;
            m.settled = false;
            metrics.push_back(m);
            out.metrics += fmt::format("event at {} s: no metrics ({})\n", ev, e.what());
        }
    }
    for (const auto& m : metrics) {
        out.all_settled = out.all_settled && m.settled;
    }
    out.metrics += metrics_table(metrics);
    out.metrics += fmt::format("all steps settled: {}\n", out.all_settled && !out.diverged ? "yes" : "no");

    const auto& t = result.series.column("t_s");
    out.svg = render_svg({sc.name, "t [s]", "V",
                          {{"v_o", t, result.series.column("v_o")}, {"v_ref", t, result.series.column("v_ref")},
                           {"v_in", t, result.series.column("v_in")}}});
    return out;
}

void write_run(const CommonOptions& common, const std::string& stem, const RunOutput& r) {
    write_file(common.out_dir / (stem + ".csv"), r.csv);
    write_file(common.out_dir / (stem + "_metrics.txt"), r.metrics);
    if (common.svg) {
        write_file(common.out_dir / (stem + ".svg"), r.svg);
    }
}

/// Runs `tasks` on at most `workers` threads; exceptions are captured per task.
void run_pool(std::vector<std::function<void()>>& tasks, unsigned workers,
              std::vector<std::exception_ptr>& errors) {
    errors.assign(tasks.size(), nullptr);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                tasks[i]();
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(tasks.size()))); ++w) {
        pool.emplace_back(worker);
    }
    for (auto& th : pool) {
        th.join();
    }
}

std::string describe(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const std::exception& ex) {
        return ex.what();
    }
}

}  // namespace

void apply_override(ConverterParams& params, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError(fmt::format("parameter override '{}' must look like name=value", assignment));
    }
    auto trimmed = [](std::string t) {
        const auto a = t.find_first_not_of(' ');
        return a == std::string::npos ? std::string{} : t.substr(a, t.find_last_not_of(' ') - a + 1);
    };
    const std::string key = trimmed(assignment.substr(0, eq));
    const std::string value = trimmed(assignment.substr(eq + 1));
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used == 0 || value.find_first_not_of(' ', used) != std::string::npos) {
        throw ConfigError(fmt::format("parameter override '{}': '{}' is not a number", assignment, value));
    }
    set_converter_field(params, key, v);
    params.validate();
}

int characteristic(const CommonOptions& common, const CharacteristicOptions& options, std::ostream& log) {
    prepare(common);
    const auto out = characteristic_output(common.params, options);
    write_file(common.out_dir / "characteristic.csv", out.csv);
    if (common.svg) {
        write_file(common.out_dir / "characteristic.svg", out.svg);
    }
    log << out.report;
    return kExitOk;
}

int identify(const CommonOptions& common, const IdentifyOptions& options, std::ostream& log) {
    prepare(common);
    const auto out = identify_output(common, options);
    for (const auto& [file, text] : out.files) {
        write_file(common.out_dir / file, text);
    }
    write_file(common.out_dir / "identification.txt", out.report);
    log << out.report;
    return kExitOk;
}

int run(const CommonOptions& common, const std::string& scenario, std::ostream& log) {
    prepare(common);
    Scenario sc;
    ConverterParams params = common.params;
    if (fs::is_regular_file(scenario)) {
        const ScenarioDocument doc = load_scenario_file(scenario);
        sc = doc.scenario;
        params = doc.params;
    } else {
        sc = builtin_scenario(scenario);
    }
    const RunOutput r = run_output(sc, params);
    write_run(common, sc.name, r);
    log << r.metrics;
    return kExitOk;
}

int reproduce_all(const CommonOptions& common, const ReproduceOptions& options, std::ostream& log) {
    prepare(common);
    const auto t0 = std::chrono::steady_clock::now();
    const auto scenarios = builtin_scenarios();

    std::vector<RunOutput> runs(scenarios.size());
    std::vector<double> run_wall(scenarios.size());
    CharacteristicOutput chara;
    IdentifyOutput ident_table;
    IdentifyOutput ident_all;

    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        tasks.emplace_back([&, i] {
            const auto s0 = std::chrono::steady_clock::now();
            runs[i] = run_output(scenarios[i], common.params);
            run_wall[i] = seconds_since(s0);
        });
    }
    tasks.emplace_back([&] { chara = characteristic_output(common.params, {}); });
    if (options.identification) {
        tasks.emplace_back([&] {
            IdentifyOptions o;
            o.subinterval = Subinterval::S1;
            o.scan_zeros = true;
            ident_table = identify_output(common, o);
        });
        tasks.emplace_back([&] {
            IdentifyOptions o;
            o.all = true;
            ident_all = identify_output(common, o);
        });
    }
    const unsigned workers = options.jobs > 0 ? options.jobs : std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::exception_ptr> errors;
    run_pool(tasks, workers, errors);

    std::string summary = fmt::format("reproduce-all: {} scenarios, {} worker(s), seed {}\n\n", scenarios.size(),
                                      workers, common.seed);
    summary += fmt::format("{:<10} {:<9} {:>8}  {}\n", "output", "status", "settled", "reproduces");
    bool failed = false;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        const auto& sc = scenarios[i];
        if (errors[i]) {
            failed = true;
            summary += fmt::format("{:<10} {:<9} {:>8}  {}\n", sc.name, "error", "-", describe(errors[i]));
            continue;
        }
        write_run(common, sc.name, runs[i]);
        summary += fmt::format("{:<10} {:<9} {:>8}  {}\n", sc.name, runs[i].diverged ? "diverged" : "ok",
                               runs[i].all_settled && !runs[i].diverged ? "all" : "not all", sc.reproduces);
        log << fmt::format("{}: {:.2f} s wall\n", sc.name, run_wall[i]);
    }
    const std::size_t c = scenarios.size();
    if (errors[c]) {
        failed = true;
        summary += fmt::format("characteristic: error: {}\n", describe(errors[c]));
    } else {
        write_file(common.out_dir / "characteristic.csv", chara.csv);
        if (common.svg) {
            write_file(common.out_dir / "characteristic.svg", chara.svg);
        }
        summary += "characteristic.csv: Fig. 3 operating characteristic (duty sweep at nominal input)\n";
    }
    if (options.identification) {
        for (std::size_t j = 0; j < 2; ++j) {
            const auto& err = errors[c + 1 + j];
            const auto& ident = j == 0 ? ident_table : ident_all;
            const std::string file = j == 0 ? "identification_S1_scan.txt" : "identification_all.txt";
            if (err) {
                failed = true;
                summary += fmt::format("{}: error: {}\n", file, describe(err));
                continue;
            }
            for (const auto& [name, text] : ident.files) {
                write_file(common.out_dir / name, text);
            }
            write_file(common.out_dir / file, ident.report);
            summary += fmt::format("{}: {}\n", file,
                                   j == 0 ? "Table II analogue (S1 zero-count scan, both channels)"
                                          : "Table III analogue (ten fitted models against the registry)");
        }
        summary += std::string(kRecordNote) + "\n";
    }
    summary += "\nnote: registry model F_i2 is a corrected entry; ";
    summary += table_iii_registry()[1].input_tf.note + "\n";
    write_file(common.out_dir / "summary.txt", summary);
    log << summary;
    log << fmt::format("total wall time {:.1f} s\n", seconds_since(t0));
    if (failed) {
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }
    return kExitOk;
}

}  // namespace tlbc::cli
