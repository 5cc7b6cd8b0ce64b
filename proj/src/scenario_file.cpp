#include "tlbc/scenario_file.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <utility>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "tlbc/errors.hpp"

namespace tlbc {

namespace {

namespace pt = boost::property_tree;

constexpr std::array<std::pair<const char*, double ConverterParams::*>, 9> kConverterFields{{
    {"v_i_nominal", &ConverterParams::v_i_nominal},
    {"l", &ConverterParams::l},
    {"r", &ConverterParams::r},
    {"c1", &ConverterParams::c1},
    {"c2", &ConverterParams::c2},
    {"r_load", &ConverterParams::r_load},
    {"f_s", &ConverterParams::f_s},
    {"dt", &ConverterParams::dt},
    {"d_max", &ConverterParams::d_max},
}};

double to_number(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    double v = 0.0;
    in >> v;
    if (!in || !(in >> std::ws).eof()) {
        throw ConfigError(fmt::format("{}: '{}' is not a number", key, text));
    }
    return v;
}

std::vector<double> to_numbers(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    std::vector<double> out;
    std::string token;
    while (in >> token) {
        out.push_back(to_number(token, key));
    }
    return out;
}

Schedule to_schedule(const std::string& text, const std::string& key) {
    std::vector<ScheduleEntry> entries;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw ConfigError(fmt::format("{}: expected 't:value' pairs, got '{}'", key, item));
        }
        entries.push_back({to_number(item.substr(0, colon), key), to_number(item.substr(colon + 1), key)});
    }
    try {
        return Schedule(std::move(entries));
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", key, e.what()));
    }
}

std::string schedule_text(const Schedule& s) {
    std::string out;
    for (const auto& e : s.entries()) {
        out += fmt::format("{}{}:{}", out.empty() ? "" : ", ", e.t, e.value);
    }
    return out;
}

/// Key/value pairs of one section, each consumed at most once; leftovers are errors.
class Section {
public:
    Section(std::string name, const pt::ptree& tree) : name_(std::move(name)) {
        for (const auto& [key, child] : tree) {
            if (!child.empty()) {
                throw ConfigError(fmt::format("[{}] {}: nested values are not allowed", name_, key));
            }
            values_.emplace_back(key, child.data());
        }
    }

    std::optional<std::string> take(const std::string& key) {
        for (auto it = values_.begin(); it != values_.end(); ++it) {
            if (it->first == key) {
                std::string v = it->second;
                values_.erase(it);
                return v;
            }
        }
        return std::nullopt;
    }

    void finish() const {
        if (!values_.empty()) {
            throw ConfigError(fmt::format("{}unknown key '{}'", prefix(), values_.front().first));
        }
    }

    [[nodiscard]] std::string label(const std::string& key) const { return prefix() + key; }

private:
    [[nodiscard]] std::string prefix() const { return name_.empty() ? "" : "[" + name_ + "] "; }

    std::string name_;
    std::vector<std::pair<std::string, std::string>> values_;
};

ControllerSpec parse_controller(Section& s) {
    const std::string type = s.take("type").value_or("tsf_pi");
    if (type == "open_loop") {
        return OpenLoopController{};
    }
    if (type == "fixed_pi") {
        const auto sub = s.take("subinterval");
        const auto kp = s.take("kp");
        const auto ki = s.take("ki");
        if (sub && (kp || ki)) {
            throw ConfigError("[controller] give either subinterval or kp/ki, not both");
        }
        if (sub) {
            const auto id = parse_subinterval(*sub);
            if (!id) {
                throw ConfigError(fmt::format("[controller] subinterval: unknown '{}'", *sub));
            }
            return fixed_pi(*id);
        }
        if (!kp || !ki) {
            throw ConfigError("[controller] fixed_pi needs subinterval or both kp and ki");
        }
        FixedPiController c;
        c.gains = {to_number(*kp, s.label("kp")), to_number(*ki, s.label("ki"))};
        c.gains.validate();
        return c;
    }
    if (type == "tsf_pi") {
        TsfPiController c;
        if (const auto v = s.take("scheduling")) {
            if (*v == "reference") {
                c.config.scheduling = SchedulingVariable::reference;
            } else if (*v == "output") {
                c.config.scheduling = SchedulingVariable::output;
            } else {
                throw ConfigError(fmt::format("[controller] scheduling: unknown '{}'", *v));
            }
        }
        if (const auto v = s.take("overlap_halfwidth")) {
            c.config.partition = FuzzyPartition(to_number(*v, s.label("overlap_halfwidth")));
        }
        for (Subinterval id : kSubintervals) {
            const std::string key = fmt::format("gains_s{}", index(id) + 1);
            if (const auto v = s.take(key)) {
                const auto g = to_numbers(*v, s.label(key));
                if (g.size() != 2) {
                    throw ConfigError(fmt::format("{}: expected 'kp ki'", s.label(key)));
                }
                PiGains gains{g[0], g[1]};
                gains.validate();
                c.config.table[index(id)] = gains;
            }
        }
        return c;
    }
    throw ConfigError(fmt::format("[controller] type: unknown '{}'", type));
}

}  // namespace

void set_converter_field(ConverterParams& params, std::string_view key, double value) {
    for (const auto& [name, member] : kConverterFields) {
        if (key == name) {
            params.*member = value;
            return;
        }
    }
    throw ConfigError(fmt::format("unknown converter parameter '{}'", key));
}

ScenarioDocument parse_scenario(std::istream& in) {
    // read_ini only knows whole-line ';' comments; allow trailing ones and '#'.
    std::stringstream cleaned;
    std::string line;
    while (std::getline(in, line)) {
        cleaned << line.substr(0, line.find_first_of(";#")) << '\n';
    }
    pt::ptree tree;
    try {
        pt::read_ini(cleaned, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(fmt::format("scenario file line {}: {}", e.line(), e.message()));
    }

    ScenarioDocument doc;
    std::optional<Section> converter;
    std::optional<Section> controller;
    std::optional<Section> schedules;
    pt::ptree top_values;
    for (const auto& [key, child] : tree) {
        if (key == "converter") {
            converter.emplace(key, child);
        } else if (key == "controller") {
            controller.emplace(key, child);
        } else if (key == "schedules") {
            schedules.emplace(key, child);
        } else if (child.empty()) {
            top_values.push_back({key, child});
        } else {
            throw ConfigError(fmt::format("unknown section [{}]", key));
        }
    }
    Section top("", top_values);

    Scenario& sc = doc.scenario;
    sc.name = top.take("name").value_or("custom");
    if (const auto v = top.take("t_end")) {
        sc.t_end = to_number(*v, "t_end");
    }
    if (const auto v = top.take("initial"); v && *v != "auto") {
        const auto x = to_numbers(*v, "initial");
        if (x.size() != 3) {
            throw ConfigError("initial: expected 'auto' or 'i_l v_c1 v_c2'");
        }
        sc.initial_state = ConverterState{x[0], x[1], x[2]};
    }
    top.finish();

    if (converter) {
        for (const auto& [key, member] : kConverterFields) {
            if (const auto v = converter->take(key)) {
                doc.params.*member = to_number(*v, converter->label(key));
            }
        }
        converter->finish();
    }
    doc.params.validate();

    if (controller) {
        sc.controller = parse_controller(*controller);
        if (const auto v = controller->take("anti_windup")) {
            if (*v == "conditional_integration") {
                sc.anti_windup = AntiWindup::conditional_integration;
            } else if (*v == "none") {
                sc.anti_windup = AntiWindup::none;
            } else {
                throw ConfigError(fmt::format("[controller] anti_windup: unknown '{}'", *v));
            }
        }
        controller->finish();
    }

    if (schedules) {
        if (const auto v = schedules->take("v_in")) {
            sc.v_in_schedule = to_schedule(*v, schedules->label("v_in"));
        }
        if (const auto v = schedules->take("v_ref")) {
            sc.v_ref_schedule = to_schedule(*v, schedules->label("v_ref"));
        }
        if (const auto v = schedules->take("duty")) {
            auto* open = std::get_if<OpenLoopController>(&sc.controller);
            if (open == nullptr) {
                throw ConfigError("[schedules] duty: only valid with an open_loop controller");
            }
            open->duty = to_schedule(*v, schedules->label("duty"));
        }
        schedules->finish();
    }
    sc.validate();
    return doc;
}

ScenarioDocument load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open scenario file '{}'", path.string()));
    }
    return parse_scenario(in);
}

void write_scenario(std::ostream& out, const ScenarioDocument& doc) {
    const Scenario& sc = doc.scenario;
    out << fmt::format("name = {}\nt_end = {}\n", sc.name, sc.t_end);
    if (sc.initial_state) {
        out << fmt::format("initial = {} {} {}\n", sc.initial_state->i_l, sc.initial_state->v_c1,
                           sc.initial_state->v_c2);
    } else {
        out << "initial = auto\n";
    }

    out << "\n[converter]\n";
    for (const auto& [key, member] : kConverterFields) {
        out << fmt::format("{} = {}\n", key, doc.params.*member);
    }

    out << "\n[controller]\n";
    std::visit(
        [&out](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, OpenLoopController>) {
                out << "type = open_loop\n";
            } else if constexpr (std::is_same_v<T, FixedPiController>) {
                out << "type = fixed_pi\n";
                if (c.subinterval) {
                    out << fmt::format("subinterval = {}\n", name(*c.subinterval));
                } else {
                    out << fmt::format("kp = {}\nki = {}\n", c.gains.kp, c.gains.ki);
                }
            } else {
                out << "type = tsf_pi\n";
                out << fmt::format("scheduling = {}\n", c.config.scheduling == SchedulingVariable::reference
                                                            ? "reference"
                                                            : "output");
                out << fmt::format("overlap_halfwidth = {}\n", c.config.partition.overlap_halfwidth());
                for (Subinterval id : kSubintervals) {
                    const PiGains& g = c.config.table[index(id)];
                    out << fmt::format("gains_s{} = {} {}\n", index(id) + 1, g.kp, g.ki);
                }
            }
        },
        sc.controller);
    out << fmt::format("anti_windup = {}\n",
                       sc.anti_windup == AntiWindup::none ? "none" : "conditional_integration");

    out << "\n[schedules]\n";
    out << fmt::format("v_in = {}\nv_ref = {}\n", schedule_text(sc.v_in_schedule),
                       schedule_text(sc.v_ref_schedule));
    if (const auto* open = std::get_if<OpenLoopController>(&sc.controller)) {
        out << fmt::format("duty = {}\n", schedule_text(open->duty));
    }
}

}  // namespace tlbc
