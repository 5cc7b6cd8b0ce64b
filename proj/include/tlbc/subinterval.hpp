#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace tlbc {

/// The five linear pieces of the output-voltage characteristic, 12 V to 57 V.
enum class Subinterval { S1 = 0, S2, S3, S4, S5 };

inline constexpr std::array<Subinterval, 5> kSubintervals{
    Subinterval::S1, Subinterval::S2, Subinterval::S3, Subinterval::S4, Subinterval::S5};

/// Range edges in volts: S1 = [12, 18], S2 = [18, 24], ... S5 = [40, 57].
inline constexpr std::array<double, 6> kSubintervalEdges{12.0, 18.0, 24.0, 31.0, 40.0, 57.0};

[[nodiscard]] constexpr std::size_t index(Subinterval s) noexcept {
    return static_cast<std::size_t>(s);
}

[[nodiscard]] constexpr double lower_edge(Subinterval s) noexcept {
    return kSubintervalEdges[index(s)];
}

[[nodiscard]] constexpr double upper_edge(Subinterval s) noexcept {
    return kSubintervalEdges[index(s) + 1];
}

[[nodiscard]] constexpr double midpoint(Subinterval s) noexcept {
    return 0.5 * (lower_edge(s) + upper_edge(s));
}

[[nodiscard]] std::string_view name(Subinterval s) noexcept;

/// Accepts "S1".."S5" (case-insensitive); nullopt otherwise.
[[nodiscard]] std::optional<Subinterval> parse_subinterval(std::string_view text) noexcept;

}  // namespace tlbc
