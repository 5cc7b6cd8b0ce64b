#pragma once

#include <complex>
#include <span>
#include <vector>

namespace tlbc {

/// Real polynomial coefficients in descending powers: {a_n, ..., a_1, a_0}.
using Polynomial = std::vector<double>;

[[nodiscard]] std::complex<double> evaluate(std::span<const double> p, std::complex<double> z) noexcept;

/// Drops leading zero coefficients; an all-zero input becomes {0}.
[[nodiscard]] Polynomial trim(std::span<const double> p);

[[nodiscard]] Polynomial multiply(std::span<const double> a, std::span<const double> b);
[[nodiscard]] Polynomial add(std::span<const double> a, std::span<const double> b);
[[nodiscard]] Polynomial scale(std::span<const double> p, double k);

/// Roots from the eigenvalues of the balanced companion matrix, each polished
/// by Newton iteration. Throws NumericalError if any root's relative residual
/// |p(z)| / sum |a_k| |z|^k stays above 1e-8.
[[nodiscard]] std::vector<std::complex<double>> roots(std::span<const double> p);

/// Monic real polynomial with the given roots (conjugate pairs expected).
[[nodiscard]] Polynomial from_roots(std::span<const std::complex<double>> r);

/// True when every root has a strictly negative real part.
[[nodiscard]] bool is_hurwitz(std::span<const double> p);

}  // namespace tlbc
