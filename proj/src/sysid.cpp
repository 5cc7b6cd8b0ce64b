#include "tlbc/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <fmt/format.h>

namespace tlbc {

OperatingPoint operating_point(Subinterval s, double v_in) noexcept {
    return {v_in, 1.0 - v_in / midpoint(s), s};
}

double Experiment::sample_interval() const {
    if (t.size() < 2) {
        throw ConfigError("experiment needs at least two samples");
    }
    return (t.back() - t.front()) / static_cast<double>(t.size() - 1);
}

// =============================================================================
// Experiments
// =============================================================================

namespace {

double default_step(InputChannel channel) {
    return channel == InputChannel::input_voltage ? 1.0 : 0.01;
}

/// Cycle-averaged v_o over [t, t + period] read off the running integrals.
class PeriodRecorder {
public:
    PeriodRecorder(SwitchedConverter& conv, double period) : conv_(conv), period_(period) {}

    double next(double d, double v_in) {
        const auto before = conv_.integrals();
        ++count_;
        conv_.advance(static_cast<double>(count_) * period_, d, v_in);
        const auto& after = conv_.integrals();
        return ((after[1] - before[1]) + (after[2] - before[2])) / period_;
    }

private:
    SwitchedConverter& conv_;
    double period_;
    long count_ = 0;
};

bool resettled(const std::vector<double>& dev, std::size_t window) {
    if (dev.size() < window) {
        return false;
    }
    const auto first = dev.end() - static_cast<std::ptrdiff_t>(window);
    const auto [lo, hi] = std::minmax_element(first, dev.end());
    const double level = std::abs(std::accumulate(first, dev.end(), 0.0)) / static_cast<double>(window);
    return *hi - *lo <= std::max(5e-3 * level, 1e-6);
}

}  // namespace

Experiment generate_experiment(const ConverterParams& params, const OperatingPoint& op,
                               InputChannel channel, const ExperimentOptions& options) {
    params.validate();
    if (!(op.v_in > 0.0) || !(op.d >= 0.0) || !(op.d < params.d_max)) {
        throw ConfigError(fmt::format("operating point (v_in = {} V, d = {}) is outside the boosting region",
                                      op.v_in, op.d));
    }
    const double step = options.step_size.value_or(default_step(channel));
    if (!std::isfinite(step)) {
        throw ConfigError("step size must be finite");
    }
    if (!(options.pre_step > 0.0) || !(options.min_post_step > 0.0) ||
        options.max_post_step < options.min_post_step) {
        throw ConfigError("experiment durations must be positive and max_post_step >= min_post_step");
    }

    SettleOptions so;
    so.rel_tol = 1e-8;
    const SteadyState steady = settle(params, op.d, op.v_in, so);

    const double period = params.period();
    SwitchedConverter conv(params, steady.state);
    PeriodRecorder rec(conv, period);

    const auto n_pre = static_cast<long>(std::lround(options.pre_step / period));
    std::vector<double> v;
    for (long k = 0; k < n_pre; ++k) {
        v.push_back(rec.next(op.d, op.v_in));
    }
    const double baseline = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());

    const double d1 = channel == InputChannel::duty ? op.d + step : op.d;
    const double v1 = channel == InputChannel::input_voltage ? op.v_in + step : op.v_in;
    const auto n_min = static_cast<long>(std::lround(options.min_post_step / period));
    const auto n_max = static_cast<long>(std::lround(options.max_post_step / period));
    const auto window = static_cast<std::size_t>(std::lround(2e-3 / period));
    std::vector<double> dev;
    for (long k = 0; k < n_max; ++k) {
        dev.push_back(rec.next(d1, v1) - baseline);
        if (k + 1 >= n_min && (k + 1 - n_min) % 64 == 0 && resettled(dev, window)) {
            break;
        }
    }

    Experiment e;
    e.operating_point = op;
    e.channel = channel;
    e.step_size = step;
    e.baseline = baseline;
    e.baseline_removed = true;
    e.period_averaged = true;
    for (long k = -n_pre; k < static_cast<long>(dev.size()); ++k) {
        e.t.push_back((static_cast<double>(k) + 0.5) * period);
    }
    e.deviation.reserve(e.t.size());
    for (double x : v) {
        e.deviation.push_back(x - baseline);
    }
    e.deviation.insert(e.deviation.end(), dev.begin(), dev.end());

    // The record must start from rest relative to the response.
    if (step != 0.0) {
        const double final_dev = dev.back();
        const std::size_t head = std::max<std::size_t>(1, e.deviation.size() / 20);
        for (std::size_t k = 0; k < head; ++k) {
            if (std::abs(e.deviation[k]) >= 0.01 * std::abs(final_dev)) {
                throw NumericalError(fmt::format(
                    "experiment did not start from steady state (deviation {:.3g} V at sample {})",
                    e.deviation[k], k));
            }
        }
    }
    return e;
}

Experiment experiment_from_samples(std::vector<double> t, std::vector<double> deviation,
                                   double step_size, InputChannel channel, bool period_averaged) {
    if (t.size() != deviation.size()) {
        throw ConfigError("time and deviation columns differ in length");
    }
    if (t.size() < 2) {
        throw ConfigError("experiment needs at least two samples");
    }
    const double h = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    if (!(h > 0.0)) {
        throw ConfigError("experiment times must increase");
    }
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (std::abs((t[k] - t[k - 1]) - h) > 1e-6 * h) {
            throw ConfigError(fmt::format("experiment grid is not uniform at sample {}", k));
        }
    }
    Experiment e;
    e.channel = channel;
    e.step_size = step_size;
    e.period_averaged = period_averaged;
    e.t = std::move(t);
    e.deviation = std::move(deviation);
    return e;
}

void write_experiment_csv(std::ostream& out, const Experiment& e) {
    out << "t_s,deviation_v\n";
    for (std::size_t k = 0; k < e.t.size(); ++k) {
        out << fmt::format("{},{}\n", e.t[k], e.deviation[k]);
    }
}

Experiment read_experiment_csv(std::istream& in, double step_size, InputChannel channel,
                               bool period_averaged) {
    std::string line;
    if (!std::getline(in, line) || line != "t_s,deviation_v") {
        throw ConfigError("experiment CSV must start with the header 't_s,deviation_v'");
    }
    std::vector<double> t;
    std::vector<double> dev;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) {
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
            throw ConfigError(fmt::format("experiment CSV row {} needs two columns", row));
        }
        try {
            std::size_t used = 0;
            const std::string a = line.substr(0, comma);
            const std::string b = line.substr(comma + 1);
            t.push_back(std::stod(a, &used));
            if (used != a.size()) throw std::invalid_argument(a);
            dev.push_back(std::stod(b, &used));
            if (used != b.size()) throw std::invalid_argument(b);
        } catch (const std::logic_error&) {
            throw ConfigError(fmt::format("experiment CSV row {} is not numeric", row));
        }
    }
    return experiment_from_samples(std::move(t), std::move(dev), step_size, channel, period_averaged);
}

// =============================================================================
// Metric
// =============================================================================

double fit_metric(std::span<const double> measured, std::span<const double> simulated) {
    if (measured.size() != simulated.size() || measured.size() < 2) {
        throw ConfigError("fit metric needs two series of equal length >= 2");
    }
    const double mean = std::accumulate(measured.begin(), measured.end(), 0.0) /
                        static_cast<double>(measured.size());
    double err = 0.0;
    double spread = 0.0;
    for (std::size_t k = 0; k < measured.size(); ++k) {
        err += (measured[k] - simulated[k]) * (measured[k] - simulated[k]);
        spread += (measured[k] - mean) * (measured[k] - mean);
    }
    if (!(spread > 0.0)) {
        throw NumericalError("fit metric is undefined for a constant measured series");
    }
    return 100.0 * (1.0 - std::sqrt(err) / std::sqrt(spread));
}

// =============================================================================
// Model responses on the experiment grid
// =============================================================================

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Basis responses in normalized time for the monic denominator `a`
/// (descending, a[0] = 1) driven by a step of `u` at t = 0. Column j < n is
/// the response of sigma^j / den, column n that of sigma^n / den. Rows are
/// point samples or window averages per the experiment.
MatrixXd basis_responses(const std::vector<double>& a, const Experiment& e, double u) {
    const auto n = static_cast<Index>(a.size() - 1);
    MatrixXd A = MatrixXd::Zero(n, n);
    for (Index j = 0; j + 1 < n; ++j) {
        A(j, j + 1) = 1.0;
    }
    for (Index j = 0; j < n; ++j) {
        A(n - 1, j) = -a[static_cast<std::size_t>(n - j)];
    }

    // Augmented generator over [x; u; integral of x].
    const Index m = 2 * n + 1;
    MatrixXd G = MatrixXd::Zero(m, m);
    G.topLeftCorner(n, n) = A;
    G(n - 1, n) = 1.0;
    G.bottomLeftCorner(n, n) = MatrixXd::Identity(n, n);

    const double h = e.sample_interval() / kTimeScale;
    auto flow = [&](double tau) -> MatrixXd { return (G * tau).exp(); };

    const auto rows = static_cast<Index>(e.t.size());
    MatrixXd out = MatrixXd::Zero(rows, n + 1);
    auto fill = [&](Index k, const VectorXd& xs, double us) {
        out.row(k).head(n) = xs.transpose();
        double top = us;
        for (Index j = 0; j < n; ++j) {
            top -= a[static_cast<std::size_t>(n - j)] * xs(j);
        }
        out(k, n) = top;
    };

    VectorXd w = VectorXd::Zero(m);
    w(n) = u;
    const MatrixXd step_flow = flow(h);
    bool started = false;
    for (Index k = 0; k < rows; ++k) {
        const double tk = e.t[static_cast<std::size_t>(k)] / kTimeScale;
        if (!e.period_averaged) {
            if (tk < 0.0) {
                continue;
            }
            if (!started) {
                w = flow(tk) * w;
                started = true;
            } else {
                w = step_flow * w;
            }
            fill(k, w.head(n), u);
        } else {
            const double end = tk + 0.5 * h;
            if (end <= 0.0) {
                continue;
            }
            w.tail(n).setZero();
            const double span = started ? h : std::min(end, h);
            w = (started ? step_flow : flow(span)) * w;
            started = true;
            fill(k, w.tail(n) / h, u * span / h);
        }
    }
    return out;
}

struct Projection {
    double cost = std::numeric_limits<double>::infinity();
    VectorXd b;       ///< numerator in normalized time, ascending powers
    VectorXd model;   ///< model output on the grid
};

/// Best numerator for the denominator `a` by linear least squares.
Projection project(const std::vector<double>& a, const Experiment& e, int n_zeros,
                   const VectorXd& y) {
    const MatrixXd full = basis_responses(a, e, e.step_size);
    const auto cols = static_cast<Index>(n_zeros + 1);
    MatrixXd phi = full.leftCols(cols);
    if (n_zeros == static_cast<int>(a.size() - 1)) {
        phi.col(cols - 1) = full.col(cols - 1);
    }
    VectorXd scale(cols);
    for (Index j = 0; j < cols; ++j) {
        const double norm = phi.col(j).norm();
        scale(j) = norm > 0.0 ? 1.0 / norm : 1.0;
        phi.col(j) *= scale(j);
    }
    Projection p;
    const VectorXd z = phi.completeOrthogonalDecomposition().solve(y);
    p.b = z.cwiseProduct(scale);
    p.model = phi * z;
    p.cost = (p.model - y).squaredNorm();
    if (!std::isfinite(p.cost)) {
        p.cost = std::numeric_limits<double>::infinity();
    }
    return p;
}

std::vector<double> den_from_log(const VectorXd& q) {
    std::vector<double> a(static_cast<std::size_t>(q.size()) + 1, 1.0);
    for (Index k = 0; k < q.size(); ++k) {
        a[static_cast<std::size_t>(k) + 1] = std::exp(q(k));
    }
    return a;
}

/// ARX equation-error fit at the sample rate, mapped to continuous poles.
/// Returns a monic Hurwitz denominator in normalized time.
std::vector<double> arx_initial_den(const Experiment& e, int n_poles, int n_zeros) {
    const auto n = static_cast<std::size_t>(n_poles);
    const double h = e.sample_interval() / kTimeScale;
    const std::size_t N = e.t.size();
    std::vector<double> u(N);
    for (std::size_t k = 0; k < N; ++k) {
        u[k] = e.t[k] >= 0.0 ? e.step_size : 0.0;
    }
    const bool direct = n_zeros == n_poles;
    const std::size_t cols = 2 * n + (direct ? 1 : 0);
    if (N <= n + cols) {
        throw ConfigError("experiment is too short for the requested model order");
    }
    MatrixXd phi(static_cast<Index>(N - n), static_cast<Index>(cols));
    VectorXd rhs(static_cast<Index>(N - n));
    for (std::size_t k = n; k < N; ++k) {
        const auto r = static_cast<Index>(k - n);
        for (std::size_t i = 1; i <= n; ++i) {
            phi(r, static_cast<Index>(i - 1)) = -e.deviation[k - i];
            phi(r, static_cast<Index>(n + i - 1)) = u[k - i];
        }
        if (direct) {
            phi(r, static_cast<Index>(2 * n)) = u[k];
        }
        rhs(r) = e.deviation[k];
    }
    const VectorXd theta = phi.completeOrthogonalDecomposition().solve(rhs);

    Polynomial zpoly(n + 1, 1.0);
    for (std::size_t i = 1; i <= n; ++i) {
        zpoly[i] = theta(static_cast<Index>(i - 1));
    }
    std::vector<std::complex<double>> s;
    try {
        for (const auto& z : roots(zpoly)) {
            const double mag = std::max(std::abs(z), 1e-6);
            std::complex<double> si;
            if (std::abs(z.imag()) <= 1e-9 * mag) {
                si = std::log(mag) / h;  // negative real z has no continuous image
            } else {
                si = std::log(z) / h;
            }
            if (si.real() >= 0.0) {
                si = {-std::max(si.real(), 1e-3 / h), si.imag()};
            }
            s.push_back(si);
        }
    } catch (const NumericalError&) {
        s.clear();
    }
    if (s.size() != n) {
        s.assign(n, {-1.0 / h, 0.0});
    }
    Polynomial den = from_roots(s);
    for (double& c : den) {
        c = std::max(c, 1e-12);
    }
    if (!is_hurwitz(den)) {
        den = from_roots(std::vector<std::complex<double>>(n, {-0.1, 0.0}));
    }
    return den;
}

struct Iterate {
    VectorXd q;
    Projection proj;
    int iterations = 0;
};

Iterate levenberg_marquardt(VectorXd q, const Experiment& e, int n_zeros, const VectorXd& y,
                            const FitOptions& opt) {
    auto evaluate = [&](const VectorXd& qq) -> Projection {
        const std::vector<double> a = den_from_log(qq);
        if (!qq.allFinite() || !is_hurwitz(a)) {
            return {};
        }
        return project(a, e, n_zeros, y);
    };

    Iterate it{q, evaluate(q), 0};
    if (!std::isfinite(it.proj.cost)) {
        return it;
    }
    double lambda = 1e-3;
    const Index p = q.size();
    constexpr double kDelta = 1e-6;
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        it.iterations = iter + 1;
        const VectorXd r = it.proj.model - y;
        MatrixXd J(r.size(), p);
        bool jac_ok = true;
        for (Index j = 0; j < p && jac_ok; ++j) {
            VectorXd qp = it.q;
            VectorXd qm = it.q;
            qp(j) += kDelta;
            qm(j) -= kDelta;
            const Projection fp = evaluate(qp);
            const Projection fm = evaluate(qm);
            if (std::isfinite(fp.cost) && std::isfinite(fm.cost)) {
                J.col(j) = (fp.model - fm.model) / (2.0 * kDelta);
            } else if (std::isfinite(fp.cost)) {
                J.col(j) = (fp.model - it.proj.model) / kDelta;
            } else if (std::isfinite(fm.cost)) {
                J.col(j) = (it.proj.model - fm.model) / kDelta;
            } else {
                jac_ok = false;
            }
        }
        if (!jac_ok) {
            break;
        }
        const MatrixXd JtJ = J.transpose() * J;
        const VectorXd g = J.transpose() * r;
        bool accepted = false;
        while (lambda < 1e12) {
            MatrixXd H = JtJ;
            for (Index j = 0; j < p; ++j) {
                H(j, j) += lambda * std::max(JtJ(j, j), 1e-12);
            }
            const VectorXd step = H.ldlt().solve(-g);
            const VectorXd trial_q = it.q + step;
            Projection trial = evaluate(trial_q);
            if (trial.cost < it.proj.cost) {
                const double decrease = (it.proj.cost - trial.cost) / std::max(it.proj.cost, 1e-300);
                it.q = trial_q;
                it.proj = std::move(trial);
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (decrease < opt.rel_tol) {
                    return it;
                }
                break;
            }
            lambda *= 4.0;
        }
        if (!accepted) {
            break;
        }
    }
    return it;
}

TransferFunction to_physical(const std::vector<double>& a, const VectorXd& b, InputChannel channel) {
    const std::size_t n = a.size() - 1;
    Polynomial den(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        den[k] = a[k] / std::pow(kTimeScale, static_cast<double>(k));
    }
    // b(j) multiplies sigma^j = (T0 s)^j; dividing by T0^n keeps den monic.
    const auto m = static_cast<std::size_t>(b.size() - 1);
    Polynomial num(m + 1);
    for (std::size_t j = 0; j <= m; ++j) {
        num[m - j] = b(static_cast<Index>(j)) *
                     std::pow(kTimeScale, static_cast<double>(j) - static_cast<double>(n));
    }
    return make_tf(std::move(num), std::move(den), channel);
}

}  // namespace

std::vector<double> simulate_experiment(const TransferFunction& model, const Experiment& e) {
    const std::size_t n = model.order();
    if (n < 1) {
        throw ConfigError("model has no dynamics");
    }
    // Back to normalized time, numerator split over the basis responses.
    std::vector<double> a(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        a[k] = model.den[k] * std::pow(kTimeScale, static_cast<double>(k)) / model.den[0];
    }
    const MatrixXd basis = basis_responses(a, e, e.step_size);
    VectorXd y = VectorXd::Zero(basis.rows());
    const std::size_t m = model.zero_count();
    for (std::size_t j = 0; j <= m; ++j) {
        const double bj = model.num[m - j] / model.den[0] *
                          std::pow(kTimeScale, static_cast<double>(n) - static_cast<double>(j));
        y += bj * basis.col(static_cast<Index>(j));
    }
    return {y.data(), y.data() + y.size()};
}

FitResult fit_tf(const Experiment& e, int n_poles, int n_zeros, const FitOptions& options) {
    if (n_poles < 1 || n_zeros < 0 || n_zeros > n_poles) {
        throw ConfigError(fmt::format("cannot fit {} poles with {} zeros", n_poles, n_zeros));
    }
    if (e.t.size() < 50) {
        throw ConfigError("experiment needs at least 50 samples");
    }
    if (e.step_size == 0.0) {
        throw ConfigError("experiment has a zero step");
    }
    if (options.max_iterations < 1 || !(options.rel_tol > 0.0) || options.restarts < 0) {
        throw ConfigError("invalid fit options");
    }
    const VectorXd y = Eigen::Map<const VectorXd>(e.deviation.data(), static_cast<Index>(e.deviation.size()));
    if (!y.allFinite()) {
        throw ConfigError("experiment contains non-finite samples");
    }

    const std::vector<double> a0 = arx_initial_den(e, n_poles, n_zeros);
    VectorXd q0(n_poles);
    for (int k = 0; k < n_poles; ++k) {
        q0(k) = std::log(a0[static_cast<std::size_t>(k) + 1]);
    }

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::optional<Iterate> best;
    int total_iterations = 0;
    for (int start = 0; start <= options.restarts; ++start) {
        VectorXd q = q0;
        if (start > 0) {
            // Perturb the pole scale and spread; redraw until Hurwitz.
            for (int attempt = 0; attempt < 50; ++attempt) {
                const double shift = 0.5 * noise(rng);
                for (int k = 0; k < n_poles; ++k) {
                    q(k) = q0(k) + shift * static_cast<double>(k + 1) + 0.3 * noise(rng);
                }
                if (is_hurwitz(den_from_log(q))) {
                    break;
                }
                q = q0;
            }
        }
        Iterate it = levenberg_marquardt(q, e, n_zeros, y, options);
        total_iterations += it.iterations;
        if (std::isfinite(it.proj.cost) && (!best || it.proj.cost < best->proj.cost)) {
            best = std::move(it);
        }
    }
    if (!best) {
        throw FitError("no stable model found from any starting point", std::nullopt);
    }

    FitResult result;
    result.n_poles = n_poles;
    result.n_zeros = n_zeros;
    result.iterations = total_iterations;
    result.model = to_physical(den_from_log(best->q), best->proj.b, e.channel);
    result.model.subinterval = e.operating_point.subinterval;
    const std::vector<double> sim = simulate_experiment(result.model, e);
    result.fit_percent = fit_metric(e.deviation, sim);
    if (!std::isfinite(result.fit_percent)) {
        throw FitError("fitted model response is not finite", result);
    }
    return result;
}

std::vector<ScanEntry> structure_scan(const Experiment& e, int n_poles,
                                      const std::vector<int>& zero_counts,
                                      const FitOptions& options) {
    std::vector<int> counts = zero_counts;
    std::sort(counts.begin(), counts.end());
    std::vector<std::future<ScanEntry>> jobs;
    for (int z : counts) {
        jobs.push_back(std::async(std::launch::async, [&e, n_poles, z, options] {
            ScanEntry entry;
            entry.n_zeros = z;
            try {
                entry.result = fit_tf(e, n_poles, z, options);
            } catch (const FitError& err) {
                entry.error = err.what();
                entry.result = err.best();
            } catch (const NumericalError& err) {
                entry.error = err.what();
            } catch (const ConfigError& err) {
                entry.error = err.what();
            }
            return entry;
        }));
    }
    std::vector<ScanEntry> out;
    for (auto& j : jobs) {
        out.push_back(j.get());
    }
    return out;
}

std::string render(const FitResult& fit) {
    return fmt::format("{}\nfit: {:.2f} %  ({} poles, {} zeros)\n", to_text(fit.model), fit.fit_percent,
                       fit.n_poles, fit.n_zeros);
}

}  // namespace tlbc
