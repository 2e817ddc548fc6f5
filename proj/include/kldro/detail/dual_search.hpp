#pragma once

// Safeguarded Newton/bisection search for the maximizer of the KL-DRO dual
//
//   g(alpha) = exp(-r) exp(E log(alpha + zeta)) - alpha,   alpha >= 0,
//
// written against an abstract measure so the same code serves the empirical
// distribution and population distributions evaluated by quadrature.
//
// All evaluations at alpha > 0 go through the alpha-normalized moments
//   lg = E log1p(zeta/alpha),  fm = E zeta/(alpha+zeta),  fv = Var zeta/(alpha+zeta)
// which give
//   g(alpha)   = alpha * expm1(lg - r)
//   g'(alpha)  = expm1(lg + log1p(-fm) - r)
//   g''(alpha) = -exp(lg - r) * fv / alpha
// without the cancellation that e^{-r} G(alpha) - alpha suffers when alpha is large.

#include "kldro/core.hpp"

#include <cmath>
#include <limits>

namespace kldro::detail {

struct ShiftedMoments {
    double log_mean = 0.0;   // E log1p(zeta/alpha)
    double frac_mean = 0.0;  // E zeta/(alpha+zeta)
    double frac_var = 0.0;   // Var zeta/(alpha+zeta)
};

/// Moments at alpha = 0, available when P[zeta = 0] = 0.
struct OriginMoments {
    double log_mean = 0.0;     // E log zeta
    double log_inv_mean = 0.0; // log E 1/zeta
};

struct DualSearchResult {
    double alpha = 0.0;
    double value = 0.0;
    double nu = 0.0;
    double atom = 0.0;
    double stationarity = 0.0;  // g'(alpha) at the returned point
    int iterations = 0;
    double lo = 0.0;
    double hi = 0.0;
    bool degenerate = false;    // all mass at zero
};

struct DualSearchOptions {
    double tol = 1e-10;
    int max_iterations = 200;
    int max_doublings = 2000;
};

template <class Measure>
DualSearchResult golden_section_fallback(const Measure& m, double r, double lo, double hi,
                                         const DualSearchOptions& opt, int evals) {
    // g is concave, so golden-section on g itself needs only function values.
    auto g = [&](double a) { return a * std::expm1(m.shifted(a).log_mean - r); };
    constexpr double inv_phi = 0.6180339887498949;
    double a = std::max(lo, 1e-300), b = hi;
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = g(x1), f2 = g(x2);
    for (int it = 0; it < 4 * opt.max_iterations && b - a > opt.tol * std::max(b, 1e-300); ++it) {
        if (f1 < f2) {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + inv_phi * (b - a); f2 = g(x2);
        } else {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - inv_phi * (b - a); f1 = g(x1);
        }
        ++evals;
    }
    if (!(b - a <= opt.tol * std::max(b, 1e-300)))
        throw ConvergenceError("golden-section fallback did not converge", a, b);
    DualSearchResult out;
    out.alpha = 0.5 * (a + b);
    const ShiftedMoments sm = m.shifted(out.alpha);
    out.value = out.alpha * std::expm1(sm.log_mean - r);
    out.nu = out.alpha * std::exp(sm.log_mean - r);
    out.stationarity = std::expm1(sm.log_mean + std::log1p(-sm.frac_mean) - r);
    out.iterations = evals;
    out.lo = a;
    out.hi = b;
    return out;
}

// Measure requirements:
//   bool all_zero() const;
//   bool has_zero_atom() const;
//   OriginMoments origin() const;            // only called when !has_zero_atom()
//   ShiftedMoments shifted(double alpha) const;
//   double scale() const;                     // positive magnitude, e.g. the mean
//   double spread() const;                    // standard deviation (may be 0)
template <class Measure>
DualSearchResult maximize_dual(const Measure& m, double r, const DualSearchOptions& opt = {}) {
    DualSearchResult out;
    if (m.all_zero()) {
        out.degenerate = true;
        return out;
    }

    if (!m.has_zero_atom()) {
        const OriginMoments o = m.origin();
        const double d0 = std::expm1(o.log_mean + o.log_inv_mean - r);
        if (d0 <= 0.0 || m.spread() == 0.0) {
            // Boundary maximizer: the atom at zero absorbs the slack.
            out.alpha = 0.0;
            out.nu = std::exp(o.log_mean - r);
            out.value = out.nu;
            out.atom = std::max(0.0, -d0);
            out.stationarity = d0;
            return out;
        }
    }

    const double scale = m.scale();
    auto derivative = [&](double a, ShiftedMoments& sm) {
        sm = m.shifted(a);
        return std::expm1(sm.log_mean + std::log1p(-sm.frac_mean) - r);
    };
    auto curvature = [&](double a, const ShiftedMoments& sm) {
        return -std::exp(sm.log_mean - r) * sm.frac_var / a;
    };

    // g'(0+) > 0 here, so lo = 0 is a valid left end.
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    const double spread = m.spread();
    double alpha = spread > 0.0 ? spread / std::sqrt(2.0 * r) : scale;
    if (!(alpha > 0.0) || !std::isfinite(alpha)) alpha = scale;

    ShiftedMoments sm;
    double d = derivative(alpha, sm);
    int evals = 1;
    if (d < 0.0) hi = alpha;
    else lo = alpha;

    int doublings = 0;
    double probe = std::max(alpha, scale);
    while (!std::isfinite(hi)) {
        if (++doublings > opt.max_doublings)
            throw ConvergenceError("dual bracket search failed: g' stays positive", lo, probe);
        probe *= 2.0;
        ShiftedMoments sp;
        const double dp = derivative(probe, sp);
        ++evals;
        if (dp < 0.0) {
            hi = probe;
        } else {
            lo = probe;
            alpha = probe;
            d = dp;
            sm = sp;
        }
    }
    if (d >= 0.0 && alpha < lo) alpha = lo;

    for (int it = 0; it < opt.max_iterations; ++it) {
        if (d == 0.0) break;
        const double g2 = curvature(alpha, sm);
        double next = (g2 < 0.0 && std::isfinite(g2)) ? alpha - d / g2 : std::numeric_limits<double>::quiet_NaN();
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);

        const double step = std::abs(next - alpha);
        alpha = next;
        d = derivative(alpha, sm);
        ++evals;
        if (!std::isfinite(d)) return golden_section_fallback(m, r, lo, hi, opt, evals);
        if (d > 0.0) lo = alpha;
        else if (d < 0.0) hi = alpha;

        const double tol_abs = opt.tol * std::max(alpha, 1e-6 * scale);
        if (step <= tol_abs * 1e-3 || hi - lo <= tol_abs * 1e-3) break;
        if (step <= tol_abs) {
            // One more Newton step lands at machine precision; take it and stop.
            const double g2b = curvature(alpha, sm);
            if (g2b < 0.0 && std::isfinite(g2b)) {
                const double polish = alpha - d / g2b;
                if (polish > lo && polish < hi) {
                    ShiftedMoments sp;
                    const double dp = derivative(polish, sp);
                    ++evals;
                    if (std::abs(dp) <= std::abs(d)) {
                        alpha = polish;
                        d = dp;
                        sm = sp;
                    }
                }
            }
            break;
        }
        if (it + 1 == opt.max_iterations)
            throw ConvergenceError("dual search did not converge", lo, hi);
    }

    out.alpha = alpha;
    out.value = alpha * std::expm1(sm.log_mean - r);
    out.nu = alpha * std::exp(sm.log_mean - r);
    out.atom = 0.0;
    out.stationarity = d;
    out.iterations = evals;
    out.lo = lo;
    out.hi = hi;
    return out;
}

}  // namespace kldro::detail
