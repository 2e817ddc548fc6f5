#include "kldro/core.hpp"
#include "kldro/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

using namespace kldro;

TEST_CASE("sample_mean examples") {
    CHECK(sample_mean(Sample{0.0, 2.0}) == doctest::Approx(1.0));
    CHECK(sample_mean(Sample{3.5, 3.5, 3.5}) == doctest::Approx(3.5));
    CHECK(sample_mean(Sample{1.0, 2.0, 3.0, 10.0}) == doctest::Approx(4.0));
}

TEST_CASE("sample_variance uses the 1/n divisor") {
    CHECK(sample_variance(Sample{7.0, 7.0, 7.0, 7.0}) == 0.0);
    CHECK(sample_variance(Sample{0.0, 2.0}) == doctest::Approx(1.0));
    CHECK(sample_variance(Sample{1.0, 2.0, 3.0, 10.0}) == doctest::Approx(12.5));
}

TEST_CASE("Sample sorts, keeps duplicates and rejects bad values") {
    Sample s{3.0, 1.0, 3.0, 0.0};
    REQUIRE(s.size() == 4);
    CHECK(s[0] == 0.0);
    CHECK(s[3] == 3.0);
    CHECK(s.min() == 0.0);
    CHECK(s.max() == 3.0);
    CHECK_THROWS_AS(Sample({1.0, -1.0}), DomainError);
    CHECK_THROWS_AS(Sample({1.0, std::nan("")}), DomainError);
    const Array empty;
    CHECK_THROWS_AS(Sample{empty}, DomainError);

    const WeightedPoints wp = merge_duplicates(s);
    REQUIRE(wp.points.size() == 3);
    CHECK(wp.weights(2) == doctest::Approx(0.5));
    CHECK(wp.weights.sum() == doctest::Approx(1.0));
}

TEST_CASE("moments are permutation invariant and obey Popoviciu") {
    Rng rng(11);
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 1 + static_cast<int>(rng.integer(0, 40));
        std::vector<double> v(n);
        for (double& x : v) x = rng.exponential() * 5.0;
        const Sample a{std::span<const double>(v)};
        std::reverse(v.begin(), v.end());
        std::swap(v.front(), v[v.size() / 2]);
        const Sample b{std::span<const double>(v)};
        CHECK(sample_mean(a) == doctest::Approx(sample_mean(b)).epsilon(1e-14));
        CHECK(sample_variance(a) == doctest::Approx(sample_variance(b)).epsilon(1e-12));
        const double range = a.max() - a.min();
        CHECK(sample_variance(a) <= range * range / 4.0 + 1e-12);
    }
}

TEST_CASE("read_sample parses and reports line numbers") {
    std::istringstream ok("# header\n0\n\n2.5\n  1e1  \n");
    const Sample s = read_sample(ok);
    REQUIRE(s.size() == 3);
    CHECK(s.max() == 10.0);

    std::istringstream bad("1\n2\nabc\n");
    try {
        read_sample(bad);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(e.line() == 3);
    }
    std::istringstream neg("1\n-2\n");
    try {
        read_sample(neg);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(e.line() == 2);
    }
    std::istringstream empty("# nothing\n");
    CHECK_THROWS_AS(read_sample(empty), InputError);
    std::istringstream inf("inf\n");
    CHECK_THROWS_AS(read_sample(inf), InputError);
    CHECK_THROWS_AS(read_sample_file("/nonexistent/sample.txt"), InputError);
}

TEST_CASE("DiscreteDistribution invariants") {
    Array sup(3), w(3);
    sup << 0.0, 1.0, 2.0;
    w << 0.25, 0.25, 0.5;
    DiscreteDistribution d(sup, w);
    CHECK(d.mean() == doctest::Approx(1.25));
    CHECK(d.weight_at(2.0) == 0.5);
    CHECK(d.weight_at(1.5) == 0.0);

    Array bad_w(3);
    bad_w << 0.25, 0.25, 0.4;
    CHECK_THROWS_AS(DiscreteDistribution(sup, bad_w), DomainError);
    Array bad_sup(3);
    bad_sup << 0.0, 2.0, 1.0;
    CHECK_THROWS_AS(DiscreteDistribution(bad_sup, w), DomainError);
    Array neg_w(3);
    neg_w << -0.1, 0.6, 0.5;
    CHECK_THROWS_AS(DiscreteDistribution(sup, neg_w), DomainError);
}

TEST_CASE("kl_divergence") {
    Array p(2), q(2);
    p << 0.5, 0.5;
    q << 0.25, 0.75;
    CHECK(kl_divergence(p, q) == doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)));
    CHECK(kl_divergence(p, p) == 0.0);
    Array q0(2);
    q0 << 1.0, 0.0;
    CHECK(std::isinf(kl_divergence(p, q0)));
    Array p0(2);
    p0 << 1.0, 0.0;
    CHECK(kl_divergence(p0, q) == doctest::Approx(std::log(4.0)));
}

TEST_CASE("radius schedules") {
    CHECK(RadiusSchedule::constant(3.0).radius(100) == doctest::Approx(0.03));
    CHECK(RadiusSchedule::log_n().lambda(1000) == doctest::Approx(std::log(1000.0)));
    CHECK(RadiusSchedule::log_n(2.0).radius(100) == doctest::Approx(2.0 * std::log(100.0) / 100.0));
    CHECK(RadiusSchedule::log_log_n().lambda(100) == doctest::Approx(std::log(std::log(100.0))));
    CHECK(RadiusSchedule::power(1.0, 0.5).lambda(400) == doctest::Approx(20.0));
    CHECK(RadiusSchedule::constant_radius(0.1).lambda(50) == doctest::Approx(5.0));
    CHECK(RadiusSchedule::constant_radius(0.0).radius(50) == 0.0);

    CHECK_THROWS_AS(RadiusSchedule::log_n().lambda(1), DomainError);
    CHECK_THROWS_AS(RadiusSchedule::log_log_n().lambda(2), DomainError);
    CHECK_THROWS_AS(RadiusSchedule::power(1.0, 1.0), DomainError);
    CHECK_THROWS_AS(RadiusSchedule::constant(0.0), DomainError);
    CHECK_THROWS_AS(RadiusSchedule::constant_radius(-1.0), DomainError);

    CHECK(RadiusSchedule::parse("logn").lambda(50) == doctest::Approx(std::log(50.0)));
    CHECK(RadiusSchedule::parse("logn:3").lambda(50) == doctest::Approx(3.0 * std::log(50.0)));
    CHECK(RadiusSchedule::parse("const:4").lambda(9) == doctest::Approx(4.0));
    CHECK(RadiusSchedule::parse("power:2:0.25").lambda(16) == doctest::Approx(4.0));
    CHECK(RadiusSchedule::parse("radius:0.5").radius(7) == doctest::Approx(0.5));
    CHECK_THROWS_AS(RadiusSchedule::parse("quadratic:1"), DomainError);
    CHECK_THROWS_AS(RadiusSchedule::parse("const:x"), DomainError);
}

TEST_CASE("radius equals lambda over n") {
    const std::vector<RadiusSchedule> all = {RadiusSchedule::constant(2.0), RadiusSchedule::log_n(1.5),
                                             RadiusSchedule::log_log_n(), RadiusSchedule::power(0.7, 0.3)};
    for (const auto& sch : all)
        for (std::size_t n : {3u, 10u, 1000u, 123457u}) {
            CHECK(sch.lambda(n) > 0.0);
            CHECK(sch.radius(n) == sch.lambda(n) / static_cast<double>(n));
        }
}

TEST_CASE("distribution specs") {
    CHECK(true_mean(Pareto{2.0, 1.0}) == doctest::Approx(2.0));
    CHECK(true_mean(Pareto{2.5, 2.0}) == doctest::Approx(2.5 * 2.0 / 1.5));
    CHECK(true_mean(PointMass{3.0}) == 3.0);
    CHECK(true_mean(ScaledBernoulli{0.5, 2.0}) == doctest::Approx(1.0));
    CHECK(true_mean(LogNormal{0.0, 1.0}) == doctest::Approx(std::exp(0.5)));
    CHECK(true_mean(UniformBounded{1.0, 3.0}) == doctest::Approx(2.0));

    CHECK(survival(Pareto{2.5, 1.0}, 4.0) == doctest::Approx(std::pow(0.25, 2.5)));
    CHECK(survival(Pareto{2.5, 1.0}, 0.5) == 1.0);
    CHECK(survival(ScaledBernoulli{0.3, 2.0}, 1.0) == doctest::Approx(0.3));
    CHECK(survival(PointMass{3.0}, 3.0) == 0.0);
    CHECK(support_min(Pareto{2.5, 1.5}) == 1.5);
    CHECK(support_min(ScaledBernoulli{1.0, 2.0}) == 2.0);

    CHECK_THROWS_AS(validate(Pareto{1.0, 1.0}), DomainError);
    CHECK_THROWS_AS(validate(Pareto{2.0, 0.0}), DomainError);
    CHECK_THROWS_AS(validate(LogNormal{0.0, 0.0}), DomainError);
    CHECK_THROWS_AS(validate(ScaledBernoulli{1.5, 2.0}), DomainError);
    CHECK_THROWS_AS(validate(UniformBounded{2.0, 1.0}), DomainError);

    const DistributionSpec p = parse_distribution("pareto:2.5:1");
    REQUIRE(std::holds_alternative<Pareto>(p));
    CHECK(std::get<Pareto>(p).tail_index == 2.5);
    CHECK(std::holds_alternative<ScaledBernoulli>(parse_distribution("bern:0.5:2")));
    CHECK(std::holds_alternative<PointMass>(parse_distribution("point:3")));
    CHECK(std::holds_alternative<LogNormal>(parse_distribution("lognormal:0:1")));
    CHECK(std::holds_alternative<UniformBounded>(parse_distribution("uniform:0:1")));
    CHECK_THROWS_AS(parse_distribution("pareto:0.5:1"), DomainError);
    CHECK_THROWS_AS(parse_distribution("cauchy:0:1"), DomainError);
    CHECK_THROWS_AS(parse_distribution("pareto:2"), DomainError);
}
