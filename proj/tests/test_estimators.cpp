#include "kldro/estimators.hpp"
#include "kldro/random.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace kldro;

namespace {

Sample heavy_sample(Rng& rng, int max_n = 40) {
    const int n = 1 + static_cast<int>(rng.integer(0, static_cast<std::uint64_t>(max_n - 1)));
    std::vector<double> v(n);
    for (double& x : v) x = std::exp(-std::log(rng.uniform()) / 1.7) - (rng.uniform() < 0.2 ? 1.0 : 0.0);
    return Sample{std::span<const double>(v)};
}

}  // namespace

TEST_CASE("sample mean minus Delta") {
    CHECK(sample_mean_delta(Sample{0.0, 2.0}, 0.0) == 1.0);
    CHECK(sample_mean_delta(Sample{0.0, 2.0}, 0.25) == doctest::Approx(0.75));
    CHECK(sample_mean_delta(Sample{1.5}, 1.5) == 0.0);
    CHECK(sample_mean_delta(Sample{0.0, 1.0}, 2.0) == doctest::Approx(-1.5));
    CHECK_THROWS_AS(sample_mean_delta(Sample{1.0}, -0.1), DomainError);
}

TEST_CASE("wasserstein") {
    CHECK(wasserstein_estimator(Sample{1.0, 3.0}, 0.5) == doctest::Approx(1.5));
    CHECK(wasserstein_estimator(Sample{0.1, 0.1}, 1.0) == 0.0);
    CHECK(wasserstein_estimator(Sample{1.0, 2.0, 6.0}, 0.0) == doctest::Approx(3.0));
}

TEST_CASE("truncated mean") {
    const TruncationConstants k2 = truncation_constants(2.0, 1.0);
    CHECK(k2.C == 0.25);
    CHECK(k2.c_a == doctest::Approx(1.0));
    CHECK(truncation_constants(2.0, 0.01).C == doctest::Approx(0.01 * std::exp(2.0) / 2.0));
    CHECK(truncated_mean_estimator(Sample{0.0, 2.0}, 2.0, 1.0, 0.01) == doctest::Approx(0.9));
    CHECK(truncated_mean_estimator(Sample{0.0, 20.0}, 2.0, 1.0, 0.01) == doctest::Approx(4.9));

    // a in (1,2): C = min{1/((a-1)a^a), A e^a 2/(2+a)}, c_a = (a-1)^{-(a-1)/a} a C^{1/a}.
    const double a = 1.5;
    const double C = std::min(1.0 / (0.5 * std::pow(1.5, 1.5)), std::exp(1.5) * 2.0 / 3.5);
    const TruncationConstants k15 = truncation_constants(a, 1.0);
    CHECK(k15.C == doctest::Approx(C));
    CHECK(k15.c_a == doctest::Approx(std::pow(0.5, -1.0 / 3.0) * 1.5 * std::pow(C, 2.0 / 3.0)));

    const Sample s{0.3, 1.0, 2.0, 7.0};
    double prev_gap = std::abs(truncated_mean_estimator(s, 1.5, 1.0, 1e-2) - sample_mean(s));
    for (double r : {1e-4, 1e-6, 1e-8, 1e-10}) {
        const double gap = std::abs(truncated_mean_estimator(s, 1.5, 1.0, r) - sample_mean(s));
        CHECK(gap < prev_gap);
        prev_gap = gap;
    }
    CHECK(prev_gap < 1e-2);

    CHECK_THROWS_AS(truncation_constants(1.0, 1.0), DomainError);
    CHECK_THROWS_AS(truncation_constants(2.5, 1.0), DomainError);
    CHECK_THROWS_AS(truncation_constants(2.0, 0.0), DomainError);
}

TEST_CASE("variance regularization") {
    CHECK(variance_reg_estimator(Sample{4.0, 4.0, 4.0}, 0.7) == doctest::Approx(4.0));
    CHECK(variance_reg_estimator(Sample{0.0, 2.0}, 0.02) == doctest::Approx(0.8));
    CHECK(variance_reg_estimator(Sample{0.0, 2.0}, 0.0) == 1.0);
}

TEST_CASE("total variation") {
    CHECK(tv_estimator(Sample{0.0, 2.0}, 0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(tv_estimator(Sample{0.0, 2.0}, 0.02) == doctest::Approx(0.8));
    CHECK(tv_estimator(Sample{1.0, 2.0, 9.0}, 0.0) == doctest::Approx(4.0));
    // Truncation at 3 caps the 9 before the top mass moves.
    CHECK(tv_estimator(Sample{1.0, 2.0, 9.0}, 0.0, 3.0) == doctest::Approx(2.0));
    // Mass 1/2 leaves: 1/3 from the capped 3, then 1/6 from the 2.
    CHECK(tv_estimator(Sample{1.0, 2.0, 9.0}, 0.5, 3.0) == doctest::Approx(2.0 - 1.0 - 1.0 / 3.0));
    CHECK_THROWS_AS(tv_estimator(Sample{1.0}, 3.0), DomainError);
}

TEST_CASE("KL-DRO estimator") {
    CHECK(kl_dro_estimator(Sample{0.0, 2.0}, std::log(2.0)).value == doctest::Approx(0.13397).epsilon(1e-4));
    CHECK(kl_dro_estimator(Sample{5.0}, 0.4).value == doctest::Approx(5.0 * std::exp(-0.4)));
    CHECK(kl_dro_estimator(Sample{0.0, 2.0}, 0.0).value == 1.0);
    const EstimateResult res = kl_dro_estimator(Sample{0.0, 2.0}, 0.3);
    CHECK(res.estimator_id == "kl");
    CHECK(res.diagnostics.count("alpha") == 1);
    CHECK(res.diagnostics.count("nu") == 1);
}

TEST_CASE("estimate dispatch") {
    const Sample s{0.0, 2.0};
    EstimatorConfig cfg{KlDro{}, RadiusSchedule::constant_radius(std::log(2.0))};
    EstimateResult res = estimate(cfg, s);
    CHECK(res.estimator_id == "kl");
    CHECK(res.value == doctest::Approx(0.13397).epsilon(1e-4));
    CHECK(res.diagnostics.at("radius") == doctest::Approx(std::log(2.0)));

    // lambda = 0.04 at n = 2 gives r = 0.02.
    cfg = {VarianceReg{}, RadiusSchedule::constant(0.04)};
    CHECK(estimate(cfg, s).value == doctest::Approx(0.8));
    CHECK(estimate(cfg, s).estimator_id == "vr");

    cfg = {TruncatedMean{2.0, 1.0}, RadiusSchedule::constant(0.02)};
    CHECK(estimate(cfg, s).value == doctest::Approx(0.9));

    cfg = {TotalVariation{}, RadiusSchedule::constant(0.04)};
    CHECK(estimate(cfg, s).value == doctest::Approx(0.8));
    cfg = {Wasserstein{}, RadiusSchedule::constant(1.0)};
    CHECK(estimate(cfg, s).value == doctest::Approx(0.5));
    cfg = {SampleMeanDelta{0.25}};
    CHECK(estimate(cfg, s).value == doctest::Approx(0.75));
    CHECK(estimate(cfg, s).estimator_id == "mean");

    CHECK_THROWS_AS(validate(EstimatorConfig{SampleMeanDelta{-1.0}}), DomainError);
    CHECK_THROWS_AS(validate(EstimatorConfig{TruncatedMean{3.0, 1.0}}), DomainError);
    CHECK_THROWS_AS(validate(EstimatorConfig{TotalVariation{0.0}}), DomainError);
}

TEST_CASE("disappointment bound") {
    const double e = std::numbers::e;
    const double l100 = std::log(100.0);
    CHECK(kl_disappointment_bound(100, l100) == doctest::Approx((e * l100 * l100 + e * e) / 100.0));
    CHECK(kl_disappointment_bound(100, l100) == doctest::Approx(0.6504).epsilon(1e-3));
    CHECK(kl_disappointment_bound(100, 1.5) == 1.0);
    // The raw value at n=2, lambda=2 is 1.51, so the cap applies.
    CHECK(kl_disappointment_bound(2, 2.0) == std::min(1.0, (e * 2.0 * std::log(2.0) + e * e) * std::exp(-2.0)));
    CHECK(kl_disappointment_bound(2, 5.0) == doctest::Approx((e * 5.0 * std::log(2.0) + e * e) * std::exp(-5.0)));
    CHECK_THROWS_AS(kl_disappointment_bound(1, 2.0), DomainError);
    CHECK_THROWS_AS(kl_disappointment_bound(10, 1.0), DomainError);

    CHECK(kl_disappointment_bound_general(100, 5.0, 4.0) ==
          doctest::Approx(std::exp(-5.0) * (4.0 * e + std::exp(200.0 * std::exp(-0.8)))));
    CHECK_THROWS_AS(kl_disappointment_bound_general(100, 5.0, 1.0), DomainError);
}

TEST_CASE("property: every estimator sits below the sample mean") {
    Rng rng(17);
    for (int rep = 0; rep < 300; ++rep) {
        const Sample s = heavy_sample(rng);
        const double r = std::exp(rng.uniform(std::log(1e-4), std::log(1.5)));
        const double m = sample_mean(s);
        const double tol = 1e-12 * std::max(1.0, m);
        const double w = wasserstein_estimator(s, r);
        CHECK(w >= m - r - tol);
        if (m > r) CHECK(w == doctest::Approx(m - r));
        CHECK(w <= m + tol);
        CHECK(kl_dro_estimator(s, r).value <= m + tol);
        CHECK(tv_estimator(s, r) <= m + tol);
        CHECK(variance_reg_estimator(s, r) <= m + tol);
        CHECK(truncated_mean_estimator(s, 2.0, 1.0, r) <= m + tol);
        CHECK(sample_mean_delta(s, 0.1) <= m + tol);
        CHECK(tv_estimator(s, r) >= m - s.max() * std::sqrt(r / 2.0) - tol);
    }
}

TEST_CASE("property: truncated mean is nonincreasing in A") {
    Rng rng(23);
    for (int rep = 0; rep < 100; ++rep) {
        const Sample s = heavy_sample(rng);
        const double r = std::exp(rng.uniform(std::log(1e-4), std::log(0.5)));
        const double a = rng.uniform(1.05, 2.0);
        double prev = truncated_mean_estimator(s, a, 1e-4, r);
        for (double A : {1e-3, 1e-2, 0.1, 1.0, 10.0}) {
            const double cur = truncated_mean_estimator(s, a, A, r);
            CHECK(cur <= prev + 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("property: scale equivariance") {
    Rng rng(29);
    for (int rep = 0; rep < 200; ++rep) {
        const Sample s = heavy_sample(rng);
        const double r = std::exp(rng.uniform(std::log(1e-4), std::log(1.5)));
        const double c = std::exp(rng.uniform(-3.0, 3.0));
        const Sample cs = s.scaled(c);
        CHECK(sample_mean_delta(cs, c * 0.3) == doctest::Approx(c * sample_mean_delta(s, 0.3)).epsilon(1e-12));
        CHECK(wasserstein_estimator(cs, c * r) == doctest::Approx(c * wasserstein_estimator(s, r)).epsilon(1e-12));
        CHECK(variance_reg_estimator(cs, r) == doctest::Approx(c * variance_reg_estimator(s, r)).epsilon(1e-12));
        CHECK(tv_estimator(cs, r) == doctest::Approx(c * tv_estimator(s, r)).epsilon(1e-12));
        CHECK(kl_dro_estimator(cs, r).value == doctest::Approx(c * kl_dro_estimator(s, r).value).epsilon(1e-9));
    }
}

TEST_CASE("property: log(1+t) contracts the sample variance") {
    Rng rng(31);
    for (int rep = 0; rep < 300; ++rep) {
        const Sample s = heavy_sample(rng);
        const Sample t{Array(s.values().log1p())};
        CHECK(sample_variance(t) <= sample_variance(s) + 1e-12);
    }
}
