#include "kldro/montecarlo.hpp"

#include "kldro/detail/dual_search.hpp"
#include "kldro/expectation.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

namespace kldro {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kWilsonZ = 1.959963984540054;

void draw_values(const DistributionSpec& spec, Rng& rng, Array& out) {
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            for (Eigen::Index i = 0; i < out.size(); ++i) {
                if constexpr (std::is_same_v<T, Pareto>) {
                    out(i) = d.scale * std::exp(-std::log(rng.uniform()) / d.tail_index);
                } else if constexpr (std::is_same_v<T, LogNormal>) {
                    out(i) = std::exp(d.mu_log + d.sigma_log * rng.normal());
                } else if constexpr (std::is_same_v<T, ScaledBernoulli>) {
                    out(i) = rng.uniform() < d.p ? d.high : 0.0;
                } else if constexpr (std::is_same_v<T, PointMass>) {
                    out(i) = d.c;
                } else {
                    out(i) = rng.uniform(d.lo, d.hi);
                }
            }
        },
        spec);
}

// Cheap enclosure [lower, upper] of the estimate computed from unsorted draws.
// When the event can be decided from it the sort and the dual solve are skipped.
struct Enclosure {
    double lower = -kInf;
    double upper = kInf;
};

Enclosure enclose(const EstimatorConfig& cfg, const Array& x, double r) {
    const double mean = x.mean();
    auto sd = [&] { return std::sqrt((x - mean).square().mean()); };
    return std::visit(
        [&](const auto& k) -> Enclosure {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, SampleMeanDelta>) {
                return {mean - k.delta, mean - k.delta};
            } else if constexpr (std::is_same_v<T, Wasserstein>) {
                const double v = std::max(mean - r, 0.0);
                return {v, v};
            } else if constexpr (std::is_same_v<T, TruncatedMean>) {
                if (!(r > 0.0)) return {mean, mean};
                const double cut = std::pow(r, -1.0 / k.a);
                const double c_a = truncation_constants(k.a, k.A).c_a;
                const double v = x.min(cut).mean() - c_a * std::pow(r, (k.a - 1.0) / k.a);
                return {v, v};
            } else if constexpr (std::is_same_v<T, VarianceReg>) {
                const double v = mean - std::sqrt(2.0 * r) * sd();
                return {v, v};
            } else if constexpr (std::is_same_v<T, TotalVariation>) {
                // Out-of-domain radii go through estimate() so the error surfaces.
                if (r > 2.0) return {};
                const double capped = x.min(k.truncation).mean();
                return {capped - std::min(x.maxCoeff(), k.truncation) * std::sqrt(r / 2.0), capped};
            } else {
                if (!(r > 0.0)) return {mean, mean};
                // Any alpha > 0 gives a lower bound on the dual maximum.
                const double alpha = sd() / std::sqrt(2.0 * r);
                if (!(alpha > 0.0) || !std::isfinite(alpha)) return {-kInf, mean};
                return {alpha * std::expm1((x / alpha).log1p().mean() - r), mean};
            }
        },
        cfg.kind);
}

enum class Decision { Hit, Miss, Undecided };

Decision decide(Event event, const Enclosure& e, double threshold, double margin) {
    if (event == Event::Disappointment) {
        if (e.upper <= threshold - margin) return Decision::Miss;
        if (e.lower > threshold + margin) return Decision::Hit;
    } else {
        if (e.upper < threshold - margin) return Decision::Hit;
        if (e.lower >= threshold + margin) return Decision::Miss;
    }
    return Decision::Undecided;
}

bool is_hit(Event event, double value, double threshold) {
    return event == Event::Disappointment ? value > threshold : value < threshold;
}

TrialReport run_trials(const DistributionSpec& spec, const EstimatorConfig& cfg, Event event, double b,
                       std::size_t n, const RunOptions& run) {
    validate(spec);
    validate(cfg);
    if (n < 1) throw DomainError("sample size must be at least 1");
    if (run.trials < 1) throw DomainError("trials must be at least 1");
    if (run.threads < 1) throw DomainError("threads must be at least 1");

    const double mu = true_mean(spec);
    const double threshold = event == Event::Disappointment ? mu : mu - b;
    const double margin = 1e-9 * std::max(1.0, std::abs(threshold));
    const double r = cfg.schedule.radius(n);

    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(run.threads, run.trials));
    std::vector<std::size_t> hits(workers, 0);
    std::vector<std::size_t> failed_at(workers, std::numeric_limits<std::size_t>::max());
    std::vector<std::string> failure(workers);

    auto work = [&](unsigned w) {
        Array x(static_cast<Eigen::Index>(n));
        for (std::size_t t = w; t < run.trials; t += workers) {
            Rng rng(run.seed, t);
            draw_values(spec, rng, x);
            try {
                Decision d = decide(event, enclose(cfg, x, r), threshold, margin);
                if (d == Decision::Undecided) {
                    const EstimateResult est = estimate(cfg, Sample(x));
                    d = is_hit(event, est.value, threshold) ? Decision::Hit : Decision::Miss;
                }
                if (d == Decision::Hit) ++hits[w];
            } catch (const std::exception& ex) {
                failed_at[w] = t;
                failure[w] = ex.what();
                return;
            }
        }
    };

    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }

    const auto first = std::min_element(failed_at.begin(), failed_at.end());
    if (*first != std::numeric_limits<std::size_t>::max())
        throw TrialError(*first, failure[static_cast<std::size_t>(first - failed_at.begin())]);

    TrialReport rep;
    rep.estimator_id = estimator_id(cfg.kind);
    rep.event = event;
    rep.n = n;
    rep.trials = run.trials;
    for (std::size_t h : hits) rep.hits += h;
    rep.p_hat = static_cast<double>(rep.hits) / static_cast<double>(rep.trials);
    const Interval ci = wilson_interval(rep.hits, rep.trials);
    rep.ci_lo = ci.lo;
    rep.ci_hi = ci.hi;
    rep.bound = theoretical_bound(spec, cfg, event, n, b);
    rep.seed = run.seed;
    rep.threshold = threshold;
    rep.b = b;
    return rep;
}

double log_binomial(std::size_t n, std::size_t k) {
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

// Expectations under the law for the population version of the dual.
class PopulationMeasure {
public:
    explicit PopulationMeasure(const DistributionSpec& spec) : spec_(spec) {
        validate(spec_);
        mean_ = true_mean(spec_);
        spread_ = std::visit(
            [&](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, Pareto>) {
                    if (d.tail_index <= 2.0) return kInf;
                    const double rho = d.tail_index;
                    return d.scale * std::sqrt(rho / ((rho - 1.0) * (rho - 1.0) * (rho - 2.0)));
                } else if constexpr (std::is_same_v<T, LogNormal>) {
                    const double s2 = d.sigma_log * d.sigma_log;
                    return std::exp(d.mu_log + 0.5 * s2) * std::sqrt(std::expm1(s2));
                } else if constexpr (std::is_same_v<T, ScaledBernoulli>) {
                    return d.high * std::sqrt(d.p * (1.0 - d.p));
                } else if constexpr (std::is_same_v<T, PointMass>) {
                    return 0.0;
                } else {
                    return (d.hi - d.lo) / std::sqrt(12.0);
                }
            },
            spec_);
    }

    bool all_zero() const { return mean_ == 0.0; }

    bool has_zero_atom() const {
        if (const auto* b = std::get_if<ScaledBernoulli>(&spec_)) return b->p < 1.0;
        if (const auto* c = std::get_if<PointMass>(&spec_)) return c->c == 0.0;
        return false;
    }

    detail::OriginMoments origin() const {
        return std::visit(
            [&](const auto& d) -> detail::OriginMoments {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, Pareto>) {
                    const double rho = d.tail_index;
                    return {std::log(d.scale) + 1.0 / rho, std::log(rho / ((rho + 1.0) * d.scale))};
                } else if constexpr (std::is_same_v<T, LogNormal>) {
                    return {d.mu_log, -d.mu_log + 0.5 * d.sigma_log * d.sigma_log};
                } else if constexpr (std::is_same_v<T, ScaledBernoulli>) {
                    return {std::log(d.high), -std::log(d.high)};
                } else if constexpr (std::is_same_v<T, PointMass>) {
                    return {std::log(d.c), -std::log(d.c)};
                } else {
                    const double w = d.hi - d.lo;
                    auto xlogx = [](double u) { return u > 0.0 ? u * std::log(u) : 0.0; };
                    const double log_mean = (xlogx(d.hi) - d.hi - xlogx(d.lo) + d.lo) / w;
                    const double inv = d.lo > 0.0 ? std::log(std::log(d.hi / d.lo) / w) : kInf;
                    return {log_mean, inv};
                }
            },
            spec_);
    }

    detail::ShiftedMoments shifted(double alpha) const {
        const double breaks[] = {alpha};
        detail::ShiftedMoments sm;
        sm.log_mean = expectation(spec_, [&](double u) { return std::log1p(u / alpha); }, breaks);
        sm.frac_mean = expectation(spec_, [&](double u) { return u / (alpha + u); }, breaks);
        const double fm = sm.frac_mean;
        sm.frac_var = expectation(
            spec_,
            [&](double u) {
                const double dev = u / (alpha + u) - fm;
                return dev * dev;
            },
            breaks);
        return sm;
    }

    double scale() const { return mean_; }
    double spread() const { return spread_; }

private:
    DistributionSpec spec_;
    double mean_ = 0.0;
    double spread_ = 0.0;
};

}  // namespace

Sample draw_sample(const DistributionSpec& spec, std::size_t n, Rng& rng) {
    validate(spec);
    if (n < 1) throw DomainError("sample size must be at least 1");
    Array x(static_cast<Eigen::Index>(n));
    draw_values(spec, rng, x);
    return Sample(std::move(x));
}

Sample draw_sample(const DistributionSpec& spec, std::size_t n, std::uint64_t stream) {
    Rng rng(stream);
    return draw_sample(spec, n, rng);
}

std::string to_string(Event e) { return e == Event::Disappointment ? "disappointment" : "conservatism"; }

std::string to_string(RateAxis a) { return a == RateAxis::LogLog ? "log-log" : "log-linear"; }

Interval wilson_interval(std::size_t hits, std::size_t trials) {
    if (trials < 1) throw DomainError("Wilson interval needs at least one trial");
    if (hits > trials) throw DomainError("hits exceed trials");
    const double t = static_cast<double>(trials);
    if (hits == 0) return {0.0, std::min(1.0, 3.0 / t)};
    const double p = static_cast<double>(hits) / t;
    const double z2 = kWilsonZ * kWilsonZ;
    const double denom = 1.0 + z2 / t;
    const double center = (p + z2 / (2.0 * t)) / denom;
    const double half = kWilsonZ * std::sqrt(p * (1.0 - p) / t + z2 / (4.0 * t * t)) / denom;
    return {std::clamp(center - half, 0.0, p), std::clamp(center + half, p, 1.0)};
}

TrialReport disappointment_probability(const DistributionSpec& spec, const EstimatorConfig& cfg, std::size_t n,
                                       const RunOptions& run) {
    return run_trials(spec, cfg, Event::Disappointment, 0.0, n, run);
}

TrialReport conservatism_probability(const DistributionSpec& spec, const EstimatorConfig& cfg, double b,
                                     std::size_t n, const RunOptions& run) {
    if (!(b > 0.0) || !std::isfinite(b)) throw DomainError("conservatism needs b > 0");
    return run_trials(spec, cfg, Event::Conservatism, b, n, run);
}

std::optional<double> theoretical_bound(const DistributionSpec& spec, const EstimatorConfig& cfg, Event event,
                                        std::size_t n, double b) {
    const double lambda = cfg.schedule.lambda(n);
    if (event == Event::Disappointment) {
        if (std::holds_alternative<KlDro>(cfg.kind) && lambda > 1.0 && n >= 2)
            return kl_disappointment_bound(n, lambda);
        if (std::holds_alternative<TruncatedMean>(cfg.kind)) return std::min(1.0, std::exp(-lambda));
        return std::nullopt;
    }
    if (std::holds_alternative<VarianceReg>(cfg.kind)) {
        const double r = cfg.schedule.radius(n);
        if (!(r > 0.0)) return std::nullopt;
        const double u = b * std::sqrt(static_cast<double>(n) / (2.0 * r));
        return std::min(1.0, static_cast<double>(n) * survival(spec, u));
    }
    return std::nullopt;
}

double exact_bernoulli_probability(const ScaledBernoulli& spec, const EstimatorConfig& cfg, Event event,
                                   std::size_t n, double b) {
    validate(DistributionSpec{spec});
    validate(cfg);
    if (n < 1) throw DomainError("sample size must be at least 1");
    if (event == Event::Conservatism && !(b > 0.0)) throw DomainError("conservatism needs b > 0");
    const double mu = spec.p * spec.high;
    const double threshold = event == Event::Disappointment ? mu : mu - b;

    std::vector<double> log_terms;
    Array x(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k <= n; ++k) {
        const double log_w = log_binomial(n, k) + (k > 0 ? static_cast<double>(k) * std::log(spec.p) : 0.0) +
                             (k < n ? static_cast<double>(n - k) * std::log1p(-spec.p) : 0.0);
        if (!std::isfinite(log_w)) continue;  // p in {0, 1}
        x.head(static_cast<Eigen::Index>(n - k)).setZero();
        x.tail(static_cast<Eigen::Index>(k)).setConstant(spec.high);
        const EstimateResult est = estimate(cfg, Sample(x));
        if (is_hit(event, est.value, threshold)) log_terms.push_back(log_w);
    }
    if (log_terms.empty()) return 0.0;
    const double top = *std::max_element(log_terms.begin(), log_terms.end());
    double acc = 0.0;
    for (double l : log_terms) acc += std::exp(l - top);
    return std::min(1.0, std::exp(top + std::log(acc)));
}

RateFit rate_fit(const std::vector<std::pair<double, double>>& points, RateAxis axis) {
    RateFit fit;
    fit.axis = axis;
    for (const auto& [n, p] : points)
        if (p > 0.0 && n > 0.0 && std::isfinite(p) && std::isfinite(n)) fit.points.emplace_back(n, p);
    if (fit.points.size() < 3) throw DomainError("rate fit needs at least three points with p > 0");

    const Eigen::Index m = static_cast<Eigen::Index>(fit.points.size());
    Eigen::MatrixXd design(m, 2);
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& [n, p] = fit.points[static_cast<std::size_t>(i)];
        design(i, 0) = 1.0;
        design(i, 1) = axis == RateAxis::LogLog ? std::log(n) : n;
        y(i) = std::log(p);
    }
    if (design.col(1).maxCoeff() == design.col(1).minCoeff())
        throw DomainError("rate fit needs at least two distinct n");
    const Eigen::Vector2d beta = design.colPivHouseholderQr().solve(y);
    fit.intercept = beta(0);
    fit.slope = beta(1);
    const double ss_res = (y - design * beta).squaredNorm();
    const double ss_tot = (y.array() - y.mean()).square().sum();
    fit.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
    return fit;
}

double log_laplace(const DistributionSpec& spec, double s) {
    validate(spec);
    if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("Laplace argument must be finite and non-negative");
    if (s == 0.0) return 0.0;
    return std::visit(
        [&](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, PointMass>) {
                return -s * d.c;
            } else if constexpr (std::is_same_v<T, ScaledBernoulli>) {
                return std::log1p(d.p * std::expm1(-s * d.high));
            } else if constexpr (std::is_same_v<T, UniformBounded>) {
                const double sw = s * (d.hi - d.lo);
                return -s * d.lo + std::log(-std::expm1(-sw) / sw);
            } else {
                // Shift by the support minimum so the integrand stays O(1) for large s.
                const double m = support_min(spec);
                const double breaks[] = {m + 1.0 / s, m + 10.0 / s, m + 100.0 / s};
                const double e = expectation(spec, [&](double u) { return std::exp(-s * (u - m)); }, breaks);
                return -s * m + std::log(e);
            }
        },
        spec);
}

double cramer_rate(const DistributionSpec& spec, double b) {
    validate(spec);
    if (!(b >= 0.0) || !std::isfinite(b)) throw DomainError("Cramer rate needs finite b >= 0");
    if (b == 0.0) return 0.0;
    const double mu = true_mean(spec);
    const double floor = support_min(spec);
    const double reach = mu - floor;
    if (b > reach * (1.0 + 1e-15)) return kInf;
    if (b >= reach * (1.0 - 1e-15)) {
        // s -> infinity: the rate is -log P[zeta = ess inf].
        if (const auto* bern = std::get_if<ScaledBernoulli>(&spec)) return -std::log1p(-bern->p);
        return kInf;
    }

    auto h = [&](double s) { return (b - mu) * s - log_laplace(spec, s); };
    double hi = 1.0 / std::max(mu, 1e-300);
    double h_hi = h(hi);
    for (int k = 0; k < 2000; ++k) {
        const double next = 2.0 * hi;
        const double h_next = h(next);
        if (!(h_next > h_hi)) break;
        hi = next;
        h_hi = h_next;
        if (k == 1999) throw ConvergenceError("Cramer rate bracket search failed", 0.0, hi);
    }
    // The maximizer lies in (0, 2 hi].
    constexpr double inv_phi = 0.6180339887498949;
    double a = 0.0, c = 2.0 * hi;
    double x1 = c - inv_phi * (c - a), x2 = a + inv_phi * (c - a);
    double f1 = h(x1), f2 = h(x2);
    for (int it = 0; it < 400 && c - a > 1e-12 * c; ++it) {
        if (f1 < f2) {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + inv_phi * (c - a); f2 = h(x2);
        } else {
            c = x2; x2 = x1; f2 = f1;
            x1 = c - inv_phi * (c - a); f1 = h(x1);
        }
    }
    return std::max(0.0, std::max(f1, f2));
}

DualSolution solve_population_dual(const DistributionSpec& spec, double r) {
    if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("population dual requires a finite radius r > 0");
    const PopulationMeasure m(spec);
    const detail::DualSearchResult res = detail::maximize_dual(m, r);
    DualSolution sol;
    sol.radius = r;
    sol.alpha_star = res.alpha;
    sol.value = res.value;
    sol.nu = res.nu;
    sol.atom = res.atom;
    sol.stationarity = res.stationarity;
    sol.iterations = res.iterations;
    sol.bracket = {res.lo, res.hi};
    sol.degenerate = res.degenerate;
    return sol;
}

double population_llr_variance(const DistributionSpec& spec, const DualSolution& sol) {
    validate(spec);
    if (sol.degenerate) return 0.0;
    const double alpha = sol.alpha_star;
    if (alpha > 0.0) {
        // eta = log(alpha + u) - log nu = log1p(u/alpha) + const.
        const double breaks[] = {alpha};
        auto eta = [&](double u) { return std::log1p(u / alpha); };
        const double m1 = expectation(spec, eta, breaks);
        return expectation(
            spec,
            [&](double u) {
                const double dev = eta(u) - m1;
                return dev * dev;
            },
            breaks);
    }
    if (const auto* pm = std::get_if<PointMass>(&spec); pm != nullptr) return 0.0;
    if (const auto* b = std::get_if<ScaledBernoulli>(&spec); b != nullptr) {
        if (b->p == 1.0) return 0.0;
        throw DomainError("alpha* = 0 with an atom at zero");
    }
    const double m1 = expectation(spec, [](double u) { return std::log(u); });
    return expectation(spec, [&](double u) {
        const double dev = std::log(u) - m1;
        return dev * dev;
    });
}

std::vector<std::pair<double, double>> variance_ratio_curve(const DistributionSpec& spec,
                                                            const std::vector<double>& r_grid) {
    std::vector<std::pair<double, double>> out;
    out.reserve(r_grid.size());
    for (double r : r_grid) {
        const DualSolution sol = solve_population_dual(spec, r);
        out.emplace_back(r, population_llr_variance(spec, sol) / r);
    }
    return out;
}

}  // namespace kldro
