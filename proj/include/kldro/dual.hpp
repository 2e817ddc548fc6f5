#pragma once

#include "kldro/core.hpp"

#include <utility>

namespace kldro {

/// Solution of the one-dimensional KL-DRO dual
///   max_{alpha >= 0}  exp(-r) exp(mean log(alpha + zeta)) - alpha.
struct DualSolution {
    double radius = 0.0;
    double alpha_star = 0.0;
    double value = 0.0;       // optimal dual objective = KL-DRO estimate
    double nu = 0.0;          // exp(mean log(alpha* + zeta) - r)
    double atom = 0.0;        // mass the worst case puts on zero beyond the sample part
    double stationarity = 0.0;
    int iterations = 0;
    std::pair<double, double> bracket{0.0, 0.0};
    /// Every observation is zero; the estimate is 0 and the KL constraint is slack.
    bool degenerate = false;
};

struct DualOptions {
    double tol = 1e-10;
    int max_iterations = 200;
};

/// g(alpha) for the empirical distribution of s. At alpha = 0 with a zero
/// observation the geometric mean is taken as exp(-inf) = 0.
double kl_dro_dual_objective(const Sample& s, double r, double alpha);

/// g'(alpha) for alpha > 0.
double kl_dro_dual_derivative(const Sample& s, double r, double alpha);

/// Maximizes the dual over alpha >= 0. Duplicate observations are merged
/// before the search. Throws ConvergenceError with the last bracket on failure.
DualSolution solve_kl_dro_dual(const Sample& s, double r, const DualOptions& opt = {});

/// Worst-case distribution: weight nu/(n (alpha* + zeta_i)) on every sample
/// point plus the remaining mass on zero. Support is {0} union distinct(s).
DiscreteDistribution primal_witness(const Sample& s, const DualSolution& sol);

/// Result of maximizing phi(alpha) = mean log(1 - alpha (mu - zeta_i)/mu) over [0, 1].
struct KlInfSolution {
    double value = 0.0;
    double alpha = 0.0;
};

KlInfSolution kl_inf_solve(const Sample& s, double mu);

/// Smallest KL(P_n, Q) over distributions Q on [0, inf) with mean <= mu.
inline double kl_inf(const Sample& s, double mu) { return kl_inf_solve(s, mu).value; }

/// eta(u) = log((alpha* + u) / nu) = log dP/dQ at u.
double log_likelihood_ratio(const DualSolution& sol, double u);

}  // namespace kldro
