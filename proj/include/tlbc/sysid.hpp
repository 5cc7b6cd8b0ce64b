#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tlbc/circuit.hpp"
#include "tlbc/errors.hpp"
#include "tlbc/lti.hpp"
#include "tlbc/subinterval.hpp"

namespace tlbc {

// =============================================================================
// Step experiments on the switched circuit
// =============================================================================

struct OperatingPoint {
    double v_in = 12.0;
    double d = 0.2;
    Subinterval subinterval = Subinterval::S1;
};

/// Duty that puts the ideal converter at the subinterval midpoint:
/// d = 1 - v_in / v_mid (S1 -> 0.20, S2 -> 0.43, ..., S5 -> 0.75 at 12 V).
[[nodiscard]] OperatingPoint operating_point(Subinterval s, double v_in = 12.0) noexcept;

struct ExperimentOptions {
    double pre_step = 2e-3;        ///< s of steady record before the step
    double min_post_step = 24e-3;  ///< s recorded after the step at minimum ...
    double max_post_step = 0.1;    ///< ... extended up to this until re-settled
    /// Default: 1 V for the input channel, 0.01 for the duty channel.
    std::optional<double> step_size;
};

/// Output deviation from the pre-step steady state on a uniform grid. Times
/// are relative to the step, so pre-step samples have t < 0. Circuit records
/// hold one cycle average per switching period stamped at the middle of the
/// period; `period_averaged` tells the fitter to model them the same way.
struct Experiment {
    OperatingPoint operating_point;
    InputChannel channel = InputChannel::input_voltage;
    double step_size = 1.0;
    bool baseline_removed = true;
    double baseline = 0.0;  ///< steady v_o before the step, V
    bool period_averaged = true;
    std::vector<double> t;
    std::vector<double> deviation;

    [[nodiscard]] double sample_interval() const;
};

[[nodiscard]] Experiment generate_experiment(const ConverterParams& params, const OperatingPoint& op,
                                             InputChannel channel,
                                             const ExperimentOptions& options = {});

/// Wraps recorded samples (t relative to the step, uniform spacing). Throws
/// ConfigError for fewer than two samples, unequal lengths or a non-uniform grid.
[[nodiscard]] Experiment experiment_from_samples(std::vector<double> t, std::vector<double> deviation,
                                                 double step_size, InputChannel channel,
                                                 bool period_averaged = false);

/// CSV with header "t_s,deviation_v".
void write_experiment_csv(std::ostream& out, const Experiment& e);
[[nodiscard]] Experiment read_experiment_csv(std::istream& in, double step_size, InputChannel channel,
                                             bool period_averaged = true);

// =============================================================================
// Fitting
// =============================================================================

/// 100 (1 - ||measured - simulated|| / ||measured - mean(measured)||).
/// Can be negative. Throws NumericalError for a constant measured series.
[[nodiscard]] double fit_metric(std::span<const double> measured, std::span<const double> simulated);

struct FitOptions {
    std::uint64_t seed = 1;   ///< initialization perturbations
    int restarts = 6;         ///< perturbed starts besides the equation-error one
    int max_iterations = 200;
    double rel_tol = 1e-10;   ///< stop on relative objective decrease below this
};

struct FitResult {
    TransferFunction model;  ///< monic, physical time units, per unit input
    double fit_percent = 0.0;
    int n_poles = 0;
    int n_zeros = 0;
    int iterations = 0;
};

/// Fit failure that still carries the best iterate.
class FitError : public NumericalError {
public:
    FitError(const std::string& what, std::optional<FitResult> best)
        : NumericalError(what), best_(std::move(best)) {}

    [[nodiscard]] const std::optional<FitResult>& best() const noexcept { return best_; }

private:
    std::optional<FitResult> best_;
};

/// Output-error fit of n_poles / n_zeros (n_zeros <= n_poles; equal counts
/// give a biproper model). Stage one solves an ARX equation-error problem at
/// the sample rate for initial poles. Stage two runs Levenberg-Marquardt on
/// the continuous-time output error from that start and from seeded
/// perturbations of it. The numerator enters the response linearly, so it is
/// solved exactly for every trial denominator and the damped Gauss-Newton
/// steps act on the log denominator coefficients.
[[nodiscard]] FitResult fit_tf(const Experiment& experiment, int n_poles, int n_zeros,
                               const FitOptions& options = {});

/// Step response of `model` for the experiment's step, at its sample times.
[[nodiscard]] std::vector<double> simulate_experiment(const TransferFunction& model,
                                                      const Experiment& experiment);

struct ScanEntry {
    int n_zeros = 0;
    std::optional<FitResult> result;
    std::string error;  ///< set when the candidate failed
};

/// One fit per zero count, ordered by zero count. Failures are recorded and
/// the scan continues.
[[nodiscard]] std::vector<ScanEntry> structure_scan(const Experiment& experiment, int n_poles = 3,
                                                    const std::vector<int>& zero_counts = {0, 1, 2, 3},
                                                    const FitOptions& options = {});

/// Transfer-function text form followed by "fit: <percent> %".
[[nodiscard]] std::string render(const FitResult& fit);

}  // namespace tlbc
