#include "kldro/expectation.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <vector>

namespace kldro {

namespace {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 31>;

constexpr double kRelTolerance = 1e-13;
constexpr std::size_t kMaxIntervals = 4000;
// Error estimates above this fraction of the L1 norm are treated as failure.
constexpr double kAcceptError = 1e-9;
constexpr double kNormalCut = 38.0;

struct Piece {
    double a, b, value, error, l1;
    bool operator<(const Piece& o) const { return error < o.error; }
};

// One 15-point Gauss / 31-point Kronrod pair on [a, b]. Boost supplies the
// nodes and weights; its integrate() with max_depth = 0 does not scale the
// error estimate by the interval length, so the pair is applied here.
Piece rule(const std::function<double(double)>& g, double a, double b) {
    static const auto& x = Kronrod::abscissa();
    static const auto& wk = Kronrod::weights();
    static const auto& wg = boost::math::quadrature::gauss<double, 15>::weights();
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = g(c);
    double k = wk[0] * fc, gs = wg[0] * fc, l1 = wk[0] * std::abs(fc);
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double f1 = g(c - h * x[i]);
        const double f2 = g(c + h * x[i]);
        k += wk[i] * (f1 + f2);
        l1 += wk[i] * (std::abs(f1) + std::abs(f2));
        // Gauss nodes are the even-indexed Kronrod nodes.
        if (i % 2 == 0) gs += wg[i / 2] * (f1 + f2);
    }
    return {a, b, h * k, h * std::abs(k - gs), h * l1};
}

// Globally adaptive Gauss-Kronrod: always bisect the piece with the largest error.
// Boost's own recursion reports only the root error estimate, which is useless
// as a convergence check for endpoint singularities.
double integrate(const std::function<double(double)>& g, double a, double b) {
    std::priority_queue<Piece> pieces;
    pieces.push(rule(g, a, b));
    double value = pieces.top().value, error = pieces.top().error, l1 = pieces.top().l1;
    while (error > kRelTolerance * l1 && pieces.size() < kMaxIntervals) {
        const Piece worst = pieces.top();
        pieces.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            pieces.push(worst);
            break;
        }
        const Piece left = rule(g, worst.a, mid);
        const Piece right = rule(g, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        l1 += left.l1 + right.l1 - worst.l1;
        pieces.push(left);
        pieces.push(right);
    }
    // Recompute the totals to drop accumulated rounding from the running sums.
    value = error = l1 = 0.0;
    for (; !pieces.empty(); pieces.pop()) {
        value += pieces.top().value;
        error += pieces.top().error;
        l1 += pieces.top().l1;
    }
    if (!std::isfinite(value) || error > kAcceptError * std::max(l1, 1e-300))
        throw QuadratureError("quadrature did not converge on [" + std::to_string(a) + ", " + std::to_string(b) +
                              "], error estimate " + std::to_string(error));
    return value;
}

/// Integrates g over (lo, hi) split at the given interior points.
double integrate_pieces(const std::function<double(double)>& g, double lo, double hi, std::vector<double> cuts) {
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> knots{lo};
    for (double c : cuts)
        if (c > knots.back() && c < hi) knots.push_back(c);
    knots.push_back(hi);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) total += integrate(g, knots[i], knots[i + 1]);
    return total;
}

}  // namespace

double expectation(const DistributionSpec& spec, const std::function<double(double)>& f,
                   std::span<const double> breaks) {
    validate(spec);
    return std::visit(
        [&](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, PointMass>) {
                return f(d.c);
            } else if constexpr (std::is_same_v<T, ScaledBernoulli>) {
                double total = 0.0;
                if (d.p < 1.0) total += (1.0 - d.p) * f(0.0);
                if (d.p > 0.0) total += d.p * f(d.high);
                return total;
            } else if constexpr (std::is_same_v<T, UniformBounded>) {
                const double width = d.hi - d.lo;
                auto g = [&](double u) { return f(u) / width; };
                return integrate_pieces(g, d.lo, d.hi, {breaks.begin(), breaks.end()});
            } else if constexpr (std::is_same_v<T, Pareto>) {
                // Integrate in v = P[zeta > u] = (xm/u)^rho, so zeta = xm v^{-1/rho} and dv is uniform.
                // The tail becomes a neighbourhood of v = 0 where f grows at most like a power of log.
                const double inv_rho = 1.0 / d.tail_index;
                auto g = [&](double v) { return f(d.scale * std::pow(v, -inv_rho)); };
                std::vector<double> cuts;
                for (double b : breaks)
                    if (b > d.scale) cuts.push_back(std::pow(d.scale / b, d.tail_index));
                return integrate_pieces(g, 0.0, 1.0, cuts);
            } else {
                // zeta = exp(mu + sigma z) with z standard normal.
                auto g = [&](double z) {
                    return f(std::exp(d.mu_log + d.sigma_log * z)) * std::exp(-0.5 * z * z) /
                           std::sqrt(2.0 * std::numbers::pi);
                };
                std::vector<double> cuts{0.0};
                for (double b : breaks)
                    if (b > 0.0) cuts.push_back((std::log(b) - d.mu_log) / d.sigma_log);
                // The normal density is below 1e-320 beyond |z| = 38.
                return integrate_pieces(g, -kNormalCut, kNormalCut, cuts);
            }
        },
        spec);
}

}  // namespace kldro
