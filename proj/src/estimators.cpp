#include "kldro/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace kldro {

namespace {

void check_radius(double r) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("radius must be finite and non-negative");
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

void validate(const EstimatorConfig& cfg) {
    std::visit(overloaded{
                   [](const SampleMeanDelta& k) {
                       if (!(k.delta >= 0.0)) throw DomainError("Delta must be non-negative");
                   },
                   [](const TruncatedMean& k) { (void)truncation_constants(k.a, k.A); },
                   [](const TotalVariation& k) {
                       if (!(k.truncation > 0.0)) throw DomainError("TV truncation level must be positive");
                   },
                   [](const auto&) {},
               },
               cfg.kind);
}

std::string estimator_id(const EstimatorKind& kind) {
    return std::visit(overloaded{
                          [](const SampleMeanDelta&) { return std::string("mean"); },
                          [](const Wasserstein&) { return std::string("wasserstein"); },
                          [](const TruncatedMean&) { return std::string("trunc"); },
                          [](const VarianceReg&) { return std::string("vr"); },
                          [](const TotalVariation&) { return std::string("tv"); },
                          [](const KlDro&) { return std::string("kl"); },
                      },
                      kind);
}

EstimateResult estimate(const EstimatorConfig& cfg, const Sample& s) {
    const double r = cfg.schedule.radius(s.size());
    EstimateResult res = std::visit(
        overloaded{
            [&](const SampleMeanDelta& k) { return EstimateResult{sample_mean_delta(s, k.delta), "", {}}; },
            [&](const Wasserstein&) { return EstimateResult{wasserstein_estimator(s, r), "", {}}; },
            [&](const TruncatedMean& k) { return EstimateResult{truncated_mean_estimator(s, k.a, k.A, r), "", {}}; },
            [&](const VarianceReg&) { return EstimateResult{variance_reg_estimator(s, r), "", {}}; },
            [&](const TotalVariation& k) { return EstimateResult{tv_estimator(s, r, k.truncation), "", {}}; },
            [&](const KlDro&) { return kl_dro_estimator(s, r); },
        },
        cfg.kind);
    res.estimator_id = estimator_id(cfg.kind);
    res.diagnostics["radius"] = r;
    return res;
}

double sample_mean_delta(const Sample& s, double delta) {
    if (!(delta >= 0.0)) throw DomainError("Delta must be non-negative");
    return sample_mean(s) - delta;
}

double wasserstein_estimator(const Sample& s, double r) {
    check_radius(r);
    // Moving mass down by d costs d per unit and lowers the mean by d, until it reaches zero.
    return std::max(sample_mean(s) - r, 0.0);
}

TruncationConstants truncation_constants(double a, double A) {
    if (!(a > 1.0 && a <= 2.0)) throw DomainError("truncation exponent a must lie in (1, 2]");
    if (!(A > 0.0) || !std::isfinite(A)) throw DomainError("moment bound A must be positive");
    TruncationConstants k;
    if (a == 2.0) {
        k.C = std::min(0.25, A * std::exp(2.0) / 2.0);
    } else {
        k.C = std::min(1.0 / ((a - 1.0) * std::pow(a, a)), A * std::exp(a) * 2.0 / (2.0 + a));
    }
    k.c_a = std::pow(a - 1.0, -(a - 1.0) / a) * a * std::pow(k.C, 1.0 / a);
    return k;
}

double truncated_mean_estimator(const Sample& s, double a, double A, double r) {
    const TruncationConstants k = truncation_constants(a, A);
    check_radius(r);
    if (r == 0.0) return sample_mean(s);
    const double level = std::pow(r, -1.0 / a);
    return s.values().min(level).mean() - k.c_a * std::pow(r, (a - 1.0) / a);
}

double variance_reg_estimator(const Sample& s, double r) {
    check_radius(r);
    return sample_mean(s) - std::sqrt(2.0 * r) * std::sqrt(sample_variance(s));
}

double tv_estimator(const Sample& s, double r, double truncation) {
    check_radius(r);
    if (!(truncation > 0.0)) throw DomainError("TV truncation level must be positive");
    const double moved = std::sqrt(r / 2.0);
    if (moved > 1.0) throw DomainError("TV radius sqrt(r/2) exceeds one");
    const Array& v = s.values();
    const auto n = v.size();
    const double w = 1.0 / static_cast<double>(n);
    double mean = v.min(truncation).mean();
    double remaining = moved;
    // Values are sorted, so the largest revenues sit at the back.
    for (Eigen::Index i = n - 1; i >= 0 && remaining > 0.0; --i) {
        const double take = std::min(w, remaining);
        mean -= take * std::min(v(i), truncation);
        remaining -= take;
    }
    return mean;
}

EstimateResult kl_dro_estimator(const Sample& s, double r, const DualOptions& opt) {
    check_radius(r);
    EstimateResult res;
    res.estimator_id = "kl";
    if (r == 0.0) {
        res.value = sample_mean(s);
        return res;
    }
    const DualSolution sol = solve_kl_dro_dual(s, r, opt);
    res.value = sol.value;
    res.diagnostics = {{"alpha", sol.alpha_star},
                       {"nu", sol.nu},
                       {"atom", sol.atom},
                       {"iterations", static_cast<double>(sol.iterations)}};
    return res;
}

double kl_disappointment_bound(std::size_t n, double lambda) {
    if (n < 2) throw DomainError("bound requires n >= 2");
    if (!(lambda > 1.0)) throw DomainError("bound requires lambda > 1");
    const double e = std::numbers::e;
    const double b = (e * lambda * std::log(static_cast<double>(n)) + e * e) * std::exp(-lambda);
    return std::min(1.0, b);
}

double kl_disappointment_bound_general(std::size_t n, double lambda, double m) {
    if (n < 1) throw DomainError("bound requires n >= 1");
    if (!(lambda > 1.0)) throw DomainError("bound requires lambda > 1");
    if (!(m > 0.0) || std::pow(1.0 - 1.0 / lambda, m) > 0.5)
        throw DomainError("grid size m must satisfy (1 - 1/lambda)^m <= 1/2");
    const double e = std::numbers::e;
    const double tail = std::exp(2.0 * static_cast<double>(n) * std::exp(-m / lambda));
    return std::exp(-lambda) * (m * e + tail);
}

}  // namespace kldro
