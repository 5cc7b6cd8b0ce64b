#include "tlbc/schedule.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "tlbc/errors.hpp"
#include "tlbc/subinterval.hpp"

namespace tlbc {

Schedule::Schedule(std::vector<ScheduleEntry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) {
        throw ConfigError("schedule must have at least one entry");
    }
    if (entries_.front().t != 0.0) {
        throw ConfigError("schedule must start at t = 0");
    }
    for (std::size_t k = 0; k < entries_.size(); ++k) {
        if (!std::isfinite(entries_[k].t) || !std::isfinite(entries_[k].value)) {
            throw ConfigError("schedule entries must be finite");
        }
        if (k > 0 && entries_[k].t <= entries_[k - 1].t) {
            throw ConfigError("schedule times must be strictly increasing");
        }
    }
}

Schedule Schedule::constant(double value) {
    return Schedule({{0.0, value}});
}

Schedule Schedule::step(double before, double after, double t_step) {
    if (!(t_step > 0.0)) {
        throw ConfigError(fmt::format("step time must be positive, got {}", t_step));
    }
    return Schedule({{0.0, before}, {t_step, after}});
}

double Schedule::at(double t) const noexcept {
    auto it = std::upper_bound(entries_.begin(), entries_.end(), t,
                               [](double x, const ScheduleEntry& e) { return x < e.t; });
    if (it == entries_.begin()) {
        return entries_.front().value;
    }
    return std::prev(it)->value;
}

std::optional<double> Schedule::next_change_after(double t) const noexcept {
    auto it = std::upper_bound(entries_.begin(), entries_.end(), t,
                               [](double x, const ScheduleEntry& e) { return x < e.t; });
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->t;
}

std::string_view name(Subinterval s) noexcept {
    static constexpr std::array<std::string_view, 5> names{"S1", "S2", "S3", "S4", "S5"};
    return names[index(s)];
}

std::optional<Subinterval> parse_subinterval(std::string_view text) noexcept {
    if (text.size() != 2 || std::toupper(static_cast<unsigned char>(text[0])) != 'S') {
        return std::nullopt;
    }
    const int k = text[1] - '1';
    if (k < 0 || k > 4) {
        return std::nullopt;
    }
    return static_cast<Subinterval>(k);
}

}  // namespace tlbc
