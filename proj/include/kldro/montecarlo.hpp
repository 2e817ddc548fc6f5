#pragma once

// Monte Carlo measurement of disappointment / conservatism probabilities,
// exact enumeration for two-point laws, rate fitting, the Cramer rate and
// population dual quantities.

#include "kldro/core.hpp"
#include "kldro/dual.hpp"
#include "kldro/estimators.hpp"
#include "kldro/random.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kldro {

/// Inverse-CDF draws; deterministic given (spec, n, rng state).
Sample draw_sample(const DistributionSpec& spec, std::size_t n, Rng& rng);
Sample draw_sample(const DistributionSpec& spec, std::size_t n, std::uint64_t stream);

// Trial reports --------------------------------------------------------------

enum class Event { Disappointment, Conservatism };

std::string to_string(Event e);

struct TrialReport {
    std::string estimator_id;
    Event event = Event::Disappointment;
    std::size_t n = 0;
    std::size_t trials = 0;
    std::size_t hits = 0;
    double p_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::optional<double> bound;
    std::uint64_t seed = 0;
    double threshold = 0.0;  // mu for disappointment, mu - b for conservatism
    double b = 0.0;

    double half_width() const { return 0.5 * (ci_hi - ci_lo); }
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// 95% Wilson score interval. Zero hits report the rule-of-three bound 3/trials.
Interval wilson_interval(std::size_t hits, std::size_t trials);

struct RunOptions {
    std::size_t trials = 1000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Thrown when an estimator fails inside a trial.
class TrialError : public std::runtime_error {
public:
    TrialError(std::size_t trial, const std::string& what)
        : std::runtime_error("trial " + std::to_string(trial) + ": " + what), trial_(trial) {}
    std::size_t trial() const noexcept { return trial_; }

private:
    std::size_t trial_;
};

/// Estimate of P[e_n > mu] (strict), mu = true_mean(spec).
TrialReport disappointment_probability(const DistributionSpec& spec, const EstimatorConfig& cfg, std::size_t n,
                                       const RunOptions& run);

/// Estimate of P[e_n < mu - b].
TrialReport conservatism_probability(const DistributionSpec& spec, const EstimatorConfig& cfg, double b,
                                     std::size_t n, const RunOptions& run);

/// Theoretical comparison values (nullopt when none applies):
/// disappointment: KL-DRO bound for lambda > 1, e^{-lambda} for the truncated mean;
/// conservatism: n P[zeta > b sqrt(n/(2r))] for variance regularization.
std::optional<double> theoretical_bound(const DistributionSpec& spec, const EstimatorConfig& cfg, Event event,
                                        std::size_t n, double b);

/// Exact P[event] for a scaled-Bernoulli law by enumerating the number of
/// high observations (binomial weights, log-space).
double exact_bernoulli_probability(const ScaledBernoulli& spec, const EstimatorConfig& cfg, Event event,
                                   std::size_t n, double b = 0.0);

// Rates ----------------------------------------------------------------------

enum class RateAxis { LogLog, LogLinear };

std::string to_string(RateAxis a);

struct RateFit {
    std::vector<std::pair<double, double>> points;  // (n, p_hat) actually used
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    RateAxis axis = RateAxis::LogLog;
};

/// Least squares of log p against log n (LogLog) or n (LogLinear); points
/// with p <= 0 are dropped. Needs at least three positive points.
RateFit rate_fit(const std::vector<std::pair<double, double>>& points, RateAxis axis);

/// I(b) = sup_{s>0} (b - mu) s - log E exp(-s zeta). +inf when b exceeds
/// mu - ess inf zeta (the event is impossible).
double cramer_rate(const DistributionSpec& spec, double b);

/// log E exp(-s zeta), s >= 0.
double log_laplace(const DistributionSpec& spec, double s);

// Population dual ------------------------------------------------------------

/// Dual solved with expectations under the law itself instead of P_n.
DualSolution solve_population_dual(const DistributionSpec& spec, double r);

/// V[eta^r(zeta)] for the population dual at radius r.
double population_llr_variance(const DistributionSpec& spec, const DualSolution& sol);

/// (r, V[eta^r]/r) for each radius in the grid.
std::vector<std::pair<double, double>> variance_ratio_curve(const DistributionSpec& spec,
                                                            const std::vector<double>& r_grid);

}  // namespace kldro
