#include "kldro/dual.hpp"

#include "kldro/detail/dual_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kldro {

namespace {

class EmpiricalMeasure {
public:
    explicit EmpiricalMeasure(WeightedPoints wp) : wp_(std::move(wp)) {
        mean_ = (wp_.weights * wp_.points).sum();
        spread_ = std::sqrt((wp_.weights * (wp_.points - mean_).square()).sum());
    }

    bool all_zero() const { return wp_.points.size() == 1 && wp_.points(0) == 0.0; }
    bool has_zero_atom() const { return wp_.points(0) == 0.0; }

    detail::OriginMoments origin() const {
        return {(wp_.weights * wp_.points.log()).sum(), std::log((wp_.weights / wp_.points).sum())};
    }

    detail::ShiftedMoments shifted(double alpha) const {
        const Array frac = wp_.points / (alpha + wp_.points);
        detail::ShiftedMoments sm;
        sm.log_mean = (wp_.weights * (wp_.points / alpha).log1p()).sum();
        sm.frac_mean = (wp_.weights * frac).sum();
        sm.frac_var = (wp_.weights * (frac - sm.frac_mean).square()).sum();
        return sm;
    }

    double scale() const { return mean_; }
    double spread() const { return spread_; }
    const WeightedPoints& points() const { return wp_; }

private:
    WeightedPoints wp_;
    double mean_ = 0.0;
    double spread_ = 0.0;
};

void check_radius_alpha(double r, double alpha) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("radius must be finite and non-negative");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be finite and non-negative");
}

}  // namespace

double kl_dro_dual_objective(const Sample& s, double r, double alpha) {
    check_radius_alpha(r, alpha);
    const Array& v = s.values();
    if (alpha == 0.0) {
        if (s.min() == 0.0) return 0.0;
        return std::exp(v.log().mean() - r);
    }
    return alpha * std::expm1((v / alpha).log1p().mean() - r);
}

double kl_dro_dual_derivative(const Sample& s, double r, double alpha) {
    check_radius_alpha(r, alpha);
    if (alpha == 0.0) throw DomainError("derivative is evaluated at alpha > 0 only");
    const Array& v = s.values();
    const double lg = (v / alpha).log1p().mean();
    const double fm = (v / (alpha + v)).mean();
    return std::expm1(lg + std::log1p(-fm) - r);
}

DualSolution solve_kl_dro_dual(const Sample& s, double r, const DualOptions& opt) {
    if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("solve_kl_dro_dual requires a finite radius r > 0");
    if (!(opt.tol > 0.0)) throw DomainError("tolerance must be positive");
    // The problem is scale equivariant; solving on s / max(s) keeps sums of
    // values near 1e308 finite. Tolerances are relative, so nothing else changes.
    WeightedPoints wp = merge_duplicates(s);
    const double c = s.max() > 0.0 ? s.max() : 1.0;
    wp.points /= c;
    const EmpiricalMeasure m(std::move(wp));
    detail::DualSearchOptions so;
    so.tol = opt.tol;
    so.max_iterations = opt.max_iterations;
    const detail::DualSearchResult res = detail::maximize_dual(m, r, so);

    DualSolution sol;
    sol.radius = r;
    sol.alpha_star = c * res.alpha;
    // Every candidate Q lives on [0, inf), so the optimum is >= 0; near-zero
    // optima can come out as -eps * max(s) from cancellation in alpha * expm1(.).
    sol.value = std::max(c * res.value, 0.0);
    sol.nu = c * res.nu;
    sol.atom = res.atom;
    sol.stationarity = res.stationarity;
    sol.iterations = res.iterations;
    sol.bracket = {c * res.lo, c * res.hi};
    sol.degenerate = res.degenerate;
    return sol;
}

DiscreteDistribution primal_witness(const Sample& s, const DualSolution& sol) {
    if (sol.degenerate) {
        if (s.max() != 0.0) throw DomainError("degenerate solution used with a non-zero sample");
        return DiscreteDistribution(Array::Zero(1), Array::Ones(1));
    }
    const double g = kl_dro_dual_objective(s, sol.radius, sol.alpha_star);
    if (std::abs(g - sol.value) > 1e-9 * std::max({1.0, std::abs(g), s.max()}))
        throw DomainError("dual solution does not belong to this sample and radius");

    const WeightedPoints wp = merge_duplicates(s);
    const bool zero_in_sample = wp.points(0) == 0.0;
    if (sol.alpha_star == 0.0 && zero_in_sample)
        throw ConvergenceError("alpha* = 0 with a zero observation: inconsistent atom", sol.bracket.first,
                               sol.bracket.second);

    Array q = wp.weights * sol.nu / (sol.alpha_star + wp.points);
    const double total = q.sum();
    double atom = 0.0;
    if (sol.alpha_star > 0.0) {
        // Complementary slackness: no atom, and stationarity makes the weights sum to one.
        if (std::abs(1.0 - total) > 1e-10)
            throw ConvergenceError("witness weights do not sum to one; dual not stationary",
                                   sol.bracket.first, sol.bracket.second);
        q /= total;
    } else {
        atom = 1.0 - total;
        if (atom < -1e-12) throw ConvergenceError("negative atom in witness", sol.bracket.first, sol.bracket.second);
        atom = std::max(atom, 0.0);
    }

    if (zero_in_sample) {
        q(0) += atom;
        return DiscreteDistribution(wp.points, q);
    }
    Array support(wp.points.size() + 1), weights(wp.points.size() + 1);
    support << 0.0, wp.points;
    weights << atom, q;
    return DiscreteDistribution(std::move(support), std::move(weights));
}

KlInfSolution kl_inf_solve(const Sample& s, double mu) {
    if (!(mu > 0.0) || !std::isfinite(mu)) throw DomainError("kl_inf requires mu > 0");
    const WeightedPoints wp = merge_duplicates(s);
    const Array x = wp.points / mu - 1.0;
    const auto phi = [&](double a) { return (wp.weights * (a * x).log1p()).sum(); };
    const auto dphi = [&](double a) { return (wp.weights * x / (1.0 + a * x)).sum(); };

    if (dphi(0.0) <= 0.0) return {0.0, 0.0};
    // With a zero observation log(1 - alpha) -> -inf at alpha = 1.
    const double a_max = wp.points(0) == 0.0 ? 1.0 - 1e-14 : 1.0;
    if (dphi(a_max) >= 0.0) return {phi(a_max), a_max};

    double lo = 0.0, hi = a_max;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (dphi(mid) > 0.0) lo = mid;
        else hi = mid;
    }
    const double a = 0.5 * (lo + hi);
    return {std::max(0.0, phi(a)), a};
}

double log_likelihood_ratio(const DualSolution& sol, double u) {
    if (!(u >= 0.0)) throw DomainError("u must be non-negative");
    if (!(sol.nu > 0.0)) throw DomainError("log-likelihood ratio needs nu > 0");
    if (!(sol.alpha_star + u > 0.0)) throw DomainError("alpha* + u must be positive");
    return std::log(sol.alpha_star + u) - std::log(sol.nu);
}

}  // namespace kldro
