#pragma once

#include "kldro/core.hpp"
#include "kldro/dual.hpp"

#include <limits>
#include <string>
#include <variant>

namespace kldro {

// Estimator kinds. Radius-driven estimators take r = lambda(n)/n from the
// schedule carried by EstimatorConfig.
struct SampleMeanDelta { double delta = 0.0; };
struct Wasserstein {};
struct TruncatedMean { double a = 2.0; double A = 1.0; };
struct VarianceReg {};
/// `truncation` caps observations before mass removal; infinity means none.
struct TotalVariation { double truncation = std::numeric_limits<double>::infinity(); };
struct KlDro {};

using EstimatorKind = std::variant<SampleMeanDelta, Wasserstein, TruncatedMean, VarianceReg, TotalVariation, KlDro>;

struct EstimatorConfig {
    EstimatorKind kind;
    RadiusSchedule schedule = RadiusSchedule::constant_radius(0.0);
};

/// Validates parameters (Delta >= 0, a in (1, 2], A > 0, truncation > 0).
void validate(const EstimatorConfig& cfg);

/// Short identifier: mean, wasserstein, trunc, vr, tv, kl.
std::string estimator_id(const EstimatorKind& kind);

EstimateResult estimate(const EstimatorConfig& cfg, const Sample& s);

/// mu_hat - Delta (not clamped).
double sample_mean_delta(const Sample& s, double delta);

/// Exact minimum of the mean over the 1-Wasserstein ball of radius r on [0, inf).
double wasserstein_estimator(const Sample& s, double r);

struct TruncationConstants {
    double C = 0.0;
    double c_a = 0.0;
};

/// a = 2: C = min{1/4, A e^2/2}; a in (1,2): C = min{1/((a-1)a^a), A e^a 2/(2+a)};
/// c_a = (a-1)^{-(a-1)/a} a C^{1/a}.
TruncationConstants truncation_constants(double a, double A);

/// mean(zeta_i ^ r^{-1/a}) - c_a r^{(a-1)/a}.
double truncated_mean_estimator(const Sample& s, double a, double A, double r);

/// mu_hat - sqrt(2 r) sigma_hat.
double variance_reg_estimator(const Sample& s, double r);

/// Moves probability sqrt(r/2) from the largest (optionally truncated)
/// observations to zero and returns the resulting mean.
double tv_estimator(const Sample& s, double r, double truncation = std::numeric_limits<double>::infinity());

/// r = 0 gives the sample mean; otherwise the dual value with diagnostics.
EstimateResult kl_dro_estimator(const Sample& s, double r, const DualOptions& opt = {});

/// min(1, (e lambda log n + e^2) e^{-lambda}); n >= 2, lambda > 1.
double kl_disappointment_bound(std::size_t n, double lambda);

/// e^{-lambda} [m e + exp(2 n e^{-m/lambda})], for m with (1 - 1/lambda)^m <= 1/2.
double kl_disappointment_bound_general(std::size_t n, double lambda, double m);

}  // namespace kldro
