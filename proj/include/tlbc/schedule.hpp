#pragma once

#include <optional>
#include <span>
#include <vector>

namespace tlbc {

struct ScheduleEntry {
    double t;
    double value;
};

/// Piecewise-constant signal: value of entry k holds on [t_k, t_{k+1}).
class Schedule {
public:
    /// Entries must be sorted by strictly increasing time and start at t = 0.
    explicit Schedule(std::vector<ScheduleEntry> entries);

    [[nodiscard]] static Schedule constant(double value);

    /// Step from `before` to `after` at `t_step` > 0.
    [[nodiscard]] static Schedule step(double before, double after, double t_step);

    [[nodiscard]] double at(double t) const noexcept;

    /// First change instant strictly after `t`, if any.
    [[nodiscard]] std::optional<double> next_change_after(double t) const noexcept;

    [[nodiscard]] std::span<const ScheduleEntry> entries() const noexcept { return entries_; }

    [[nodiscard]] double initial() const noexcept { return entries_.front().value; }

private:
    std::vector<ScheduleEntry> entries_;
};

}  // namespace tlbc
