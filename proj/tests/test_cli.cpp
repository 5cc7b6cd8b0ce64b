#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "tlbc/commands.hpp"
#include "tlbc/errors.hpp"
#include "tlbc/scenario_file.hpp"
#include "tlbc/svg.hpp"

using namespace tlbc;
namespace fs = std::filesystem;

namespace {

ScenarioDocument parse(const std::string& text) {
    std::istringstream in(text);
    return parse_scenario(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t count_lines(const std::string& s) {
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

/// Fresh directory removed on scope exit.
struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("tlbc_test_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

constexpr const char* kFull = R"(name = sag_test
t_end = 0.4   ; trailing comment
initial = auto

[converter]
r_load = 30
d_max = 0.85

[controller]
type = tsf_pi
scheduling = output
overlap_halfwidth = 0.5
gains_s2 = 1e-6 2e6
anti_windup = none

# input sag
[schedules]
v_in = 0:11, 0.12:13
v_ref = 0:15, 0.2:20
)";

}  // namespace

// =============================================================================
// Scenario files
// =============================================================================

TEST_CASE("scenario file parses every section", "[cli][scenario-file]") {
    const ScenarioDocument doc = parse(kFull);
    const Scenario& sc = doc.scenario;
    CHECK(sc.name == "sag_test");
    CHECK(sc.t_end == 0.4);
    CHECK_FALSE(sc.initial_state.has_value());
    CHECK(doc.params.r_load == 30.0);
    CHECK(doc.params.d_max == 0.85);
    CHECK(doc.params.l == ConverterParams{}.l);
    CHECK(sc.anti_windup == AntiWindup::none);
    const auto* tsf = std::get_if<TsfPiController>(&sc.controller);
    REQUIRE(tsf != nullptr);
    CHECK(tsf->config.scheduling == SchedulingVariable::output);
    CHECK(tsf->config.partition.overlap_halfwidth() == 0.5);
    CHECK(tsf->config.table[1] == PiGains{1e-6, 2e6});
    CHECK(tsf->config.table[0] == table_iv()[0]);
    CHECK(sc.v_in_schedule.at(0.13) == 13.0);
    CHECK(sc.v_ref_schedule.at(0.1) == 15.0);
    CHECK(sc.events() == std::vector<double>{0.12, 0.2});
}

TEST_CASE("scenario file controller forms", "[cli][scenario-file]") {
    const auto a = parse("[controller]\ntype = fixed_pi\nsubinterval = s4\n");
    const auto* pa = std::get_if<FixedPiController>(&a.scenario.controller);
    REQUIRE(pa != nullptr);
    CHECK(pa->gains == table_iv()[3]);

    const auto b = parse("[controller]\ntype = fixed_pi\nkp = 1e-6\nki = 3e5\n");
    CHECK(std::get<FixedPiController>(b.scenario.controller).gains == PiGains{1e-6, 3e5});

    const auto c = parse("initial = 0.5 8 8\n[controller]\ntype = open_loop\n[schedules]\nduty = 0:0.2, 0.01:0.3\n");
    CHECK(c.scenario.initial_state == ConverterState{0.5, 8.0, 8.0});
    CHECK(std::get<OpenLoopController>(c.scenario.controller).duty.at(0.02) == 0.3);
}

TEST_CASE("scenario file rejects bad input", "[cli][scenario-file]") {
    CHECK_THROWS_AS(parse("colour = red\n"), ConfigError);
    CHECK_THROWS_AS(parse("[plant]\nl = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[converter]\ninductance = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("t_end = soon\n"), ConfigError);
    CHECK_THROWS_AS(parse("t_end = 0.1x\n"), ConfigError);
    CHECK_THROWS_AS(parse("[converter]\nr_load = -3\n"), ConfigError);
    CHECK_THROWS_AS(parse("initial = 1 2\n"), ConfigError);
    CHECK_THROWS_AS(parse("[controller]\ntype = lqr\n"), ConfigError);
    CHECK_THROWS_AS(parse("[controller]\ntype = fixed_pi\n"), ConfigError);
    CHECK_THROWS_AS(parse("[controller]\ntype = fixed_pi\nsubinterval = S1\nkp = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[controller]\ntype = tsf_pi\nsubinterval = S1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[controller]\ntype = tsf_pi\ngains_s3 = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[controller]\ntype = tsf_pi\noverlap_halfwidth = 4\n"), ConfigError);
    CHECK_THROWS_AS(parse("[schedules]\nduty = 0:0.3\n"), ConfigError);
    CHECK_THROWS_AS(parse("[schedules]\nv_in = 0:12, 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[schedules]\nv_in = 0.1:12\n"), ConfigError);
    CHECK_THROWS_AS(parse("[converter\nl = 1\n"), ConfigError);
    CHECK_THROWS_AS(load_scenario_file("/nonexistent/file.ini"), ConfigError);
}

TEST_CASE("scenario file round trip", "[cli][scenario-file][property]") {
    std::vector<ScenarioDocument> docs{parse(kFull)};
    for (const auto& sc : builtin_scenarios()) {
        docs.push_back({sc, ConverterParams{}});
    }
    docs.push_back(parse("initial = 0.5 8 8.25\n[controller]\ntype = open_loop\n[schedules]\nduty = 0:0.2, 0.01:0.3\n"));
    for (const auto& doc : docs) {
        std::ostringstream out;
        write_scenario(out, doc);
        const ScenarioDocument back = parse(out.str());
        std::ostringstream again;
        write_scenario(again, back);
        CHECK(again.str() == out.str());
        CHECK(back.scenario.t_end == doc.scenario.t_end);
        CHECK(back.scenario.events() == doc.scenario.events());
        CHECK(back.scenario.controller.index() == doc.scenario.controller.index());
    }
}

TEST_CASE("parameter overrides", "[cli]") {
    ConverterParams p;
    cli::apply_override(p, "r_load=30");
    CHECK(p.r_load == 30.0);
    cli::apply_override(p, " l = 1e-3 ");
    CHECK(p.l == 1e-3);
    CHECK_THROWS_AS(cli::apply_override(p, "r_load"), ConfigError);
    CHECK_THROWS_AS(cli::apply_override(p, "colour=3"), ConfigError);
    CHECK_THROWS_AS(cli::apply_override(p, "r_load=abc"), ConfigError);
}

TEST_CASE("svg rendering", "[cli][svg]") {
    const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
    const std::vector<double> y{1.0, 2.0, std::nan(""), 4.0};
    const std::string svg = render_svg({"a <b> & c", "t", "v", {{"v_o", x, y}}});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("a &lt;b&gt; &amp; c") != std::string::npos);
    CHECK(svg.find("v_o") != std::string::npos);
    // The NaN splits the curve in two.
    std::size_t lines = 0;
    for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) {
        ++lines;
    }
    CHECK(lines == 2);
    CHECK_NOTHROW(render_svg({"empty", "x", "y", {}}));
}

// =============================================================================
// Commands
// =============================================================================

TEST_CASE("characteristic command", "[cli][command]") {
    TempDir dir;
    cli::CommonOptions common;
    common.out_dir = dir.path;
    common.svg = true;
    std::ostringstream log;

    SECTION("explicit grid") {
        cli::CharacteristicOptions opt;
        opt.from = 0.0;
        opt.to = 0.95;
        opt.steps = 20;
        CHECK(cli::characteristic(common, opt, log) == cli::kExitOk);
        const std::string csv = slurp(dir.path / "characteristic.csv");
        CHECK(csv.rfind("d,v_o,status\n", 0) == 0);
        CHECK(count_lines(csv) == 21);
        CHECK(fs::exists(dir.path / "characteristic.svg"));
    }
    SECTION("default grid spans the operating range") {
        cli::CharacteristicOptions opt;
        opt.steps = 12;
        CHECK(cli::characteristic(common, opt, log) == cli::kExitOk);
        std::istringstream csv(slurp(dir.path / "characteristic.csv"));
        std::string line;
        std::getline(csv, line);
        double lo = 1e9;
        double hi = 0.0;
        while (std::getline(csv, line)) {
            std::istringstream row(line);
            std::string d;
            std::string v;
            std::getline(row, d, ',');
            std::getline(row, v, ',');
            REQUIRE_FALSE(v.empty());
            lo = std::min(lo, std::stod(v));
            hi = std::max(hi, std::stod(v));
        }
        CHECK(lo <= 12.0);
        CHECK(hi >= 57.0);
    }
    SECTION("bad grid") {
        cli::CharacteristicOptions opt;
        opt.from = 0.5;
        opt.to = 0.2;
        CHECK_THROWS_AS(cli::characteristic(common, opt, log), ConfigError);
    }
}

TEST_CASE("run command", "[cli][command]") {
    TempDir dir;
    cli::CommonOptions common;
    common.out_dir = dir.path;
    std::ostringstream log;

    SECTION("scenario file") {
        const fs::path file = dir.path / "short.ini";
        std::ofstream(file) << "name = short\nt_end = 0.03\n[controller]\ntype = fixed_pi\nsubinterval = S2\n"
                               "[schedules]\nv_in = 0:12, 0.01:13\nv_ref = 0:21\n";
        CHECK(cli::run(common, file.string(), log) == cli::kExitOk);
        const std::string csv = slurp(dir.path / "short.csv");
        CHECK(csv.rfind(kTimeSeriesHeader, 0) == 0);
        CHECK(count_lines(csv) == 1 + 960);
        const std::string metrics = slurp(dir.path / "short_metrics.txt");
        CHECK(metrics.find("scenario short") != std::string::npos);
        CHECK_FALSE(fs::exists(dir.path / "short.svg"));
    }
    SECTION("builtin") {
        common.svg = true;
        CHECK(cli::run(common, "fig8a", log) == cli::kExitOk);
        CHECK(fs::exists(dir.path / "fig8a.csv"));
        CHECK(fs::exists(dir.path / "fig8a.svg"));
        CHECK(slurp(dir.path / "fig8a_metrics.txt").find("reproduces: Fig. 8(a)") != std::string::npos);
    }
    SECTION("unknown") {
        CHECK_THROWS_AS(cli::run(common, "fig99", log), ConfigError);
    }
}

TEST_CASE("identify command", "[cli][command]") {
    TempDir dir;
    cli::CommonOptions common;
    common.out_dir = dir.path;
    std::ostringstream log;
    cli::IdentifyOptions opt;
    opt.subinterval = Subinterval::S1;
    opt.scan_zeros = true;
    CHECK(cli::identify(common, opt, log) == cli::kExitOk);
    CHECK(fs::exists(dir.path / "experiment_S1_duty.csv"));
    CHECK(fs::exists(dir.path / "experiment_S1_input_voltage.csv"));
    const std::string report = slurp(dir.path / "identification.txt");
    for (const char* row : {"[0 zeros]", "[1 zeros]", "[2 zeros]", "[3 zeros]"}) {
        std::size_t n = 0;
        for (auto pos = report.find(row); pos != std::string::npos; pos = report.find(row, pos + 1)) {
            ++n;
        }
        CHECK(n == 2);
    }
    CHECK(report.find("registry F_d1") != std::string::npos);

    cli::IdentifyOptions none;
    CHECK_THROWS_AS(cli::identify(common, none, log), ConfigError);
    cli::IdentifyOptions too_many = opt;
    too_many.zeros = 4;
    CHECK_THROWS_AS(cli::identify(common, too_many, log), ConfigError);
}
