#pragma once

// Independent checks for the KL-DRO dual solver: a brute-force primal search
// and a strong-duality certificate built from the primal witness.

#include "kldro/core.hpp"
#include "kldro/dual.hpp"

#include <cstdint>
#include <limits>
#include <string>

namespace kldro {

struct CertificateReport {
    bool primal_feasible = false;
    double kl_gap = 0.0;
    double duality_gap = 0.0;
    double simplex_residual = 0.0;
    std::size_t probe_violations = 0;
    std::size_t probes = 0;
    double value = 0.0;
    double radius = 0.0;

    bool passed() const;
};

struct CertificateOptions {
    std::size_t probes = 10000;
    std::uint64_t seed = 0;
    /// Radius the witness is checked against; NaN means the solve radius.
    /// Setting it to something else is a negative control for the checker.
    double claimed_radius = std::numeric_limits<double>::quiet_NaN();
};

/// Solves the dual, rebuilds the witness and checks simplex feasibility,
/// empirical KL = r and mean = dual value, then runs random probes.
/// Failures are reported, not thrown.
CertificateReport verify_certificate(const Sample& s, double r, const CertificateOptions& opt = {});

/// Counts random feasible distributions (KL(P_n, q) <= r) whose mean falls
/// below `value` by more than 1e-7. Candidates are Dirichlet perturbations of
/// `center` and of the empirical weights, with extra support at zero and at a
/// synthetic point above max(s).
std::size_t probe_feasible_region(const Sample& s, double r, const DiscreteDistribution& center, double value,
                                  std::size_t trials, std::uint64_t seed);

/// Solves at r and probes around the witness. Expected result: 0.
std::size_t random_feasible_probe(const Sample& s, double r, std::size_t trials, std::uint64_t seed);

/// Minimizes sum q_i zeta_i over q on {0} union distinct(s) subject to
/// KL(P_n, q) <= r by switching projected subgradient steps in the log-ratio
/// coordinates u_i = log(q_i / w_i), restarted from 32 random simplex points.
/// `iterations` is the per-restart budget. Returns the best feasible objective
/// found, so the result is an upper bound on the optimum.
double kl_projection_bruteforce(const Sample& s, double r, std::size_t iterations = 4000,
                                std::uint64_t seed = 0x5eed);

/// Randomized instance for certificate suites: Pareto, lognormal or scaled
/// Bernoulli draws with n in [1, max_n] and r log-uniform in [1e-4, 2].
struct Instance {
    Sample sample;
    double radius;
    std::string family;
};

Instance random_instance(std::uint64_t seed, std::size_t index, std::size_t max_n = 50);

}  // namespace kldro
