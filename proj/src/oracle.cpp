#include "kldro/oracle.hpp"

#include "kldro/montecarlo.hpp"
#include "kldro/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace kldro {

namespace {

constexpr double kKlTolerance = 1e-8;
constexpr double kDualityTolerance = 1e-9;
constexpr double kSimplexTolerance = 1e-10;
constexpr double kProbeMargin = 1e-7;

Array dirichlet(Rng& rng, Eigen::Index k) {
    Array d(k);
    for (Eigen::Index i = 0; i < k; ++i) d(i) = rng.exponential();
    return d / d.sum();
}

}  // namespace

bool CertificateReport::passed() const {
    return primal_feasible && kl_gap <= kKlTolerance &&
           duality_gap <= kDualityTolerance * std::max(1.0, std::abs(value)) && probe_violations == 0;
}

CertificateReport verify_certificate(const Sample& s, double r, const CertificateOptions& opt) {
    CertificateReport rep;
    rep.radius = std::isnan(opt.claimed_radius) ? r : opt.claimed_radius;
    rep.kl_gap = std::numeric_limits<double>::infinity();
    rep.duality_gap = std::numeric_limits<double>::infinity();
    rep.simplex_residual = std::numeric_limits<double>::infinity();

    DualSolution sol;
    std::optional<DiscreteDistribution> witness;
    try {
        sol = solve_kl_dro_dual(s, r);
        witness.emplace(primal_witness(s, sol));
    } catch (const std::exception&) {
        return rep;
    }
    rep.value = sol.value;

    // Simplex residual from the raw (unnormalized) witness weights.
    const WeightedPoints wp = merge_duplicates(s);
    if (sol.degenerate) {
        rep.simplex_residual = 0.0;
    } else {
        const double raw = (wp.weights * sol.nu / (sol.alpha_star + wp.points)).sum() + sol.atom;
        rep.simplex_residual = std::abs(1.0 - raw);
    }
    rep.primal_feasible = rep.simplex_residual <= kSimplexTolerance && (witness->weights() >= 0.0).all();

    double kl = 0.0;
    for (Eigen::Index j = 0; j < wp.points.size(); ++j) {
        const double q = witness->weight_at(wp.points(j));
        kl += q > 0.0 ? wp.weights(j) * std::log(wp.weights(j) / q) : std::numeric_limits<double>::infinity();
    }
    // An all-zero sample attains the trivial lower bound 0 with slack in the constraint.
    rep.kl_gap = sol.degenerate ? std::max(0.0, kl - rep.radius) : std::abs(kl - rep.radius);
    rep.duality_gap = std::abs(witness->mean() - sol.value);

    if (opt.probes > 0) {
        rep.probes = opt.probes;
        rep.probe_violations = probe_feasible_region(s, rep.radius, *witness, sol.value, opt.probes, opt.seed);
    }
    return rep;
}

std::size_t probe_feasible_region(const Sample& s, double r, const DiscreteDistribution& center, double value,
                                  std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw DomainError("probe needs at least one trial");
    const Eigen::Index k = static_cast<Eigen::Index>(center.size()) + 1;
    Array support(k), base(k), empirical(k);
    support << center.support(), std::max(center.support().maxCoeff(), s.max()) * 1.5 + 1.0;
    base << center.weights(), 0.0;
    empirical.setZero();
    const WeightedPoints wp = merge_duplicates(s);
    for (Eigen::Index j = 0; j < wp.points.size(); ++j) {
        const double* first = support.data();
        const double* it = std::lower_bound(first, first + k, wp.points(j));
        if (it == first + k || *it != wp.points(j)) throw DomainError("probe center must contain the sample support");
        empirical(it - first) = wp.weights(j);
    }

    Rng rng(seed);
    std::size_t violations = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        Array anchor;
        switch (t % 3) {
            case 0: anchor = base; break;
            case 1: anchor = empirical; break;
            default: {
                const double mix = rng.uniform();
                anchor = mix * base + (1.0 - mix) * empirical;
            }
        }
        const double eps = std::pow(10.0, rng.uniform(-8.0, 0.0));
        Array q = (1.0 - eps) * anchor + eps * dirichlet(rng, k);
        double kl = kl_divergence(empirical, q);
        if (kl > r) {
            // KL(P_n, .) is convex and zero at P_n, so shrinking toward P_n restores feasibility.
            const double theta = r / kl;
            q = theta * q + (1.0 - theta) * empirical;
            kl = kl_divergence(empirical, q);
            if (kl > r) continue;
        }
        if ((support * q).sum() < value - kProbeMargin) ++violations;
    }
    return violations;
}

std::size_t random_feasible_probe(const Sample& s, double r, std::size_t trials, std::uint64_t seed) {
    if (trials < 1) throw DomainError("probe needs at least one trial");
    const DualSolution sol = solve_kl_dro_dual(s, r);
    return probe_feasible_region(s, r, primal_witness(s, sol), sol.value, trials, seed);
}

double kl_projection_bruteforce(const Sample& s, double r, std::size_t iterations, std::uint64_t seed) {
    if (!(r > 0.0)) throw DomainError("brute force requires r > 0");
    if (iterations < 1) throw DomainError("brute force needs a positive iteration budget");
    const WeightedPoints wp = merge_duplicates(s);
    const Eigen::Index m = wp.points.size();
    if (m > 63) throw DomainError("brute force is limited to 63 distinct sample points");
    const Array& z = wp.points;
    const Array& w = wp.weights;
    const double sample_avg = (w * z).sum();
    double best = sample_avg;  // q = P_n is feasible
    if (m == 1 && z(0) == 0.0) return best;

    // Coordinates u_i = log(q_i / w_i) on the sample points; whatever mass is
    // left, 1 - sum q_i, sits on zero and costs nothing. Then KL(P_n, q) <= r is
    // the half-space sum w_i u_i >= -r, onto which projection is exact, and the
    // simplex becomes the convex constraint sum w_i e^{u_i} <= 1, handled by
    // switching: objective steps when it holds, constraint steps otherwise.
    constexpr int kRestarts = 32;
    const double step0 = 1.0;
    const double step_end = 1e-6;
    const double decay = std::pow(step_end / step0, 1.0 / static_cast<double>(iterations));
    const double ww = w.square().sum();

    Rng rng(seed);
    for (int restart = 0; restart < kRestarts; ++restart) {
        // Random simplex point over {0} and the sample points; the zero coordinate is dropped.
        const Array start = dirichlet(rng, m + 1);
        Array u = (start.tail(m).max(1e-300) / w).log();
        double step = step0;
        for (std::size_t it = 0; it < iterations; ++it, step *= decay) {
            const double deficit = -r - (w * u).sum();
            if (deficit > 0.0) u += deficit / ww * w;

            const Array q = w * u.exp();
            const double mass = q.sum();
            Array grad;
            if (mass <= 1.0) {
                best = std::min(best, (z * q).sum());
                grad = z * q;
            } else {
                // Renormalize, then mix toward P_n if that broke the KL constraint (KL is convex, zero at P_n).
                const Array qn = q / mass;
                const double kl = kl_divergence(w, qn);
                const double theta = kl <= r ? 1.0 : r / kl;
                best = std::min(best, theta * (z * qn).sum() + (1.0 - theta) * sample_avg);
                grad = q;
            }
            const double norm = std::sqrt(grad.square().sum());
            if (!(norm > 0.0)) break;
            u -= step * grad / norm;
        }
    }
    return best;
}

Instance random_instance(std::uint64_t seed, std::size_t index, std::size_t max_n) {
    if (max_n < 1) throw DomainError("max_n must be positive");
    Rng rng(seed, index);
    const std::size_t n = static_cast<std::size_t>(rng.integer(1, max_n));
    const double r = std::exp(rng.uniform(std::log(1e-4), std::log(2.0)));
    DistributionSpec spec;
    std::string family;
    switch (index % 3) {
        case 0:
            spec = Pareto{rng.uniform(1.2, 3.0), 1.0};
            family = "pareto";
            break;
        case 1:
            spec = LogNormal{0.0, rng.uniform(0.5, 1.5)};
            family = "lognormal";
            break;
        default:
            spec = ScaledBernoulli{rng.uniform(0.2, 0.8), rng.uniform(0.5, 5.0)};
            family = "bernoulli";
    }
    return {draw_sample(spec, n, rng), r, family};
}

}  // namespace kldro
