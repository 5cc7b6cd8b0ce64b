#include "tlbc/polynomial.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "tlbc/errors.hpp"

namespace tlbc {

namespace {

// Parlett-Reinsch balancing by powers of two; keeps eigenvalues unchanged.
void balance(Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    constexpr double radix = 2.0;
    bool done = false;
    while (!done) {
        done = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double c = a.col(i).cwiseAbs().sum() - std::abs(a(i, i));
            const double r = a.row(i).cwiseAbs().sum() - std::abs(a(i, i));
            if (c == 0.0 || r == 0.0) {
                continue;
            }
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            double cc = c;
            while (cc < g) {
                f *= radix;
                cc *= radix * radix;
            }
            g = r * radix;
            while (cc > g) {
                f /= radix;
                cc /= radix * radix;
            }
            if ((cc + r / f) / f < 0.95 * s) {
                done = false;
                a.row(i) /= f;
                a.col(i) *= f;
            }
        }
    }
}

double relative_residual(std::span<const double> p, std::complex<double> z) {
    double scale = 0.0;
    double mag = 1.0;
    const double az = std::abs(z);
    for (auto it = p.rbegin(); it != p.rend(); ++it) {
        scale += std::abs(*it) * mag;
        mag *= az;
    }
    return scale == 0.0 ? 0.0 : std::abs(evaluate(p, z)) / scale;
}

}  // namespace

std::complex<double> evaluate(std::span<const double> p, std::complex<double> z) noexcept {
    std::complex<double> acc = 0.0;
    for (double c : p) {
        acc = acc * z + c;
    }
    return acc;
}

Polynomial trim(std::span<const double> p) {
    auto first = std::find_if(p.begin(), p.end(), [](double c) { return c != 0.0; });
    if (first == p.end()) {
        return {0.0};
    }
    return {first, p.end()};
}

Polynomial multiply(std::span<const double> a, std::span<const double> b) {
    Polynomial out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            out[i + j] += a[i] * b[j];
        }
    }
    return out;
}

Polynomial add(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = std::max(a.size(), b.size());
    Polynomial out(n, 0.0);
    for (std::size_t k = 0; k < a.size(); ++k) {
        out[n - a.size() + k] += a[k];
    }
    for (std::size_t k = 0; k < b.size(); ++k) {
        out[n - b.size() + k] += b[k];
    }
    return out;
}

Polynomial scale(std::span<const double> p, double k) {
    Polynomial out(p.begin(), p.end());
    for (double& c : out) {
        c *= k;
    }
    return out;
}

std::vector<std::complex<double>> roots(std::span<const double> p_in) {
    const Polynomial p = trim(p_in);
    const auto n = static_cast<Eigen::Index>(p.size()) - 1;
    if (n < 1) {
        throw NumericalError("root finding needs a polynomial of degree >= 1");
    }
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        companion(0, k) = -p[static_cast<std::size_t>(k + 1)] / p[0];
    }
    for (Eigen::Index k = 1; k < n; ++k) {
        companion(k, k - 1) = 1.0;
    }
    balance(companion);

    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("companion-matrix eigenvalue iteration did not converge");
    }

    // Newton polish on the original polynomial.
    Polynomial dp;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
        dp.push_back(p[k] * static_cast<double>(p.size() - 1 - k));
    }
    std::vector<std::complex<double>> out;
    out.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        std::complex<double> z = solver.eigenvalues()[k];
        for (int it = 0; it < 8; ++it) {
            const auto d = evaluate(dp, z);
            if (d == 0.0) {
                break;
            }
            const auto next = z - evaluate(p, z) / d;
            if (!std::isfinite(next.real()) || !std::isfinite(next.imag()) ||
                relative_residual(p, next) > relative_residual(p, z)) {
                break;
            }
            z = next;
        }
        if (relative_residual(p, z) > 1e-8) {
            throw NumericalError(fmt::format("root {}{:+}j did not converge (relative residual {:.3e})",
                                             z.real(), z.imag(), relative_residual(p, z)));
        }
        out.push_back(z);
    }
    std::sort(out.begin(), out.end(), [](auto a, auto b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return out;
}

Polynomial from_roots(std::span<const std::complex<double>> r) {
    std::vector<std::complex<double>> acc{1.0};
    for (const auto& z : r) {
        std::vector<std::complex<double>> next(acc.size() + 1, 0.0);
        for (std::size_t k = 0; k < acc.size(); ++k) {
            next[k] += acc[k];
            next[k + 1] -= acc[k] * z;
        }
        acc = std::move(next);
    }
    Polynomial out;
    out.reserve(acc.size());
    for (const auto& c : acc) {
        out.push_back(c.real());
    }
    return out;
}

bool is_hurwitz(std::span<const double> p) {
    if (trim(p).size() < 2) {
        return true;
    }
    // Routh array: strictly Hurwitz iff the first column keeps one sign.
    Polynomial q = trim(p);
    if (q[0] < 0.0) {
        q = scale(q, -1.0);
    }
    std::vector<double> upper;
    std::vector<double> lower;
    for (std::size_t k = 0; k < q.size(); ++k) {
        (k % 2 == 0 ? upper : lower).push_back(q[k]);
    }
    for (std::size_t row = 1; row < q.size(); ++row) {
        if (!(lower.front() > 0.0) || !std::isfinite(lower.front())) {
            return false;
        }
        std::vector<double> next(upper.size() > 1 ? upper.size() - 1 : 0);
        for (std::size_t k = 0; k < next.size(); ++k) {
            const double b = k + 1 < lower.size() ? lower[k + 1] : 0.0;
            next[k] = (lower.front() * upper[k + 1] - upper.front() * b) / lower.front();
        }
        upper = std::move(lower);
        lower = std::move(next);
        if (lower.empty()) {
            lower.push_back(0.0);
        }
    }
    return true;
}

}  // namespace tlbc
