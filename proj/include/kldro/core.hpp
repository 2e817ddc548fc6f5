#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace kldro {

using Array = Eigen::ArrayXd;

// Errors ---------------------------------------------------------------------

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Iterative numeric procedure did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double lo, double hi)
        : std::runtime_error(what), lo_(lo), hi_(hi) {}
    double bracket_lo() const noexcept { return lo_; }
    double bracket_hi() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

/// Malformed sample input; carries the 1-based line number.
class InputError : public std::runtime_error {
public:
    InputError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Sample ---------------------------------------------------------------------

/// Finite multiset of non-negative observations, stored sorted ascending.
/// Duplicates are kept so every observation carries empirical weight 1/n.
class Sample {
public:
    explicit Sample(Array values);
    explicit Sample(std::span<const double> values);
    Sample(std::initializer_list<double> values);

    const Array& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
    double min() const noexcept { return values_(0); }
    double max() const noexcept { return values_(values_.size() - 1); }
    double operator[](std::size_t i) const { return values_(static_cast<Eigen::Index>(i)); }

    /// Sample with every value multiplied by c > 0.
    Sample scaled(double c) const;

private:
    Array values_;
};

/// Distinct sample points with their empirical weights (multiplicity / n).
struct WeightedPoints {
    Array points;   // strictly increasing
    Array weights;  // sum to one
};

WeightedPoints merge_duplicates(const Sample& s);

double sample_mean(const Sample& s);

/// Biased (divide-by-n) variance.
double sample_variance(const Sample& s);

/// Parses one non-negative decimal per line. Blank lines and lines starting
/// with '#' are skipped. Throws InputError on anything else.
Sample read_sample(std::istream& in);
Sample read_sample_file(const std::string& path);

// DiscreteDistribution -------------------------------------------------------

class DiscreteDistribution {
public:
    /// Validates the invariants: increasing distinct non-negative support,
    /// non-negative weights summing to one within 1e-12.
    DiscreteDistribution(Array support, Array weights);

    const Array& support() const noexcept { return support_; }
    const Array& weights() const noexcept { return weights_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(support_.size()); }

    double mean() const { return (support_ * weights_).sum(); }
    /// Weight on the support point equal to u, zero if absent.
    double weight_at(double u) const;

private:
    Array support_;
    Array weights_;
};

/// KL(p || q) = sum p log(p/q) over points with p > 0; +inf if q vanishes where p does not.
double kl_divergence(const Eigen::Ref<const Array>& p, const Eigen::Ref<const Array>& q);

// RadiusSchedule -------------------------------------------------------------

/// n -> lambda(n), with radius r(n) = lambda(n) / n.
class RadiusSchedule {
public:
    struct Constant { double lambda; };
    struct LogN { double c; };
    struct LogLogN { double c; };
    struct Power { double c; double beta; };
    struct ConstantRadius { double r; };
    using Kind = std::variant<Constant, LogN, LogLogN, Power, ConstantRadius>;

    static RadiusSchedule constant(double lambda);
    static RadiusSchedule log_n(double c = 1.0);
    static RadiusSchedule log_log_n(double c = 1.0);
    static RadiusSchedule power(double c, double beta);
    /// lambda(n) = r n. r = 0 is accepted and turns every radius-driven
    /// estimator into the sample mean.
    static RadiusSchedule constant_radius(double r);

    double lambda(std::size_t n) const;
    double radius(std::size_t n) const;
    const Kind& kind() const noexcept { return kind_; }
    std::string describe() const;

    /// Parses const:<v> | logn:<c> | loglogn:<c> | power:<c>:<beta> | radius:<r>.
    static RadiusSchedule parse(const std::string& text);

private:
    explicit RadiusSchedule(Kind k) : kind_(k) {}
    Kind kind_;
};

// DistributionSpec -----------------------------------------------------------

struct Pareto { double tail_index; double scale; };
struct LogNormal { double mu_log; double sigma_log; };
struct ScaledBernoulli { double p; double high; };
struct PointMass { double c; };
struct UniformBounded { double lo; double hi; };

using DistributionSpec = std::variant<Pareto, LogNormal, ScaledBernoulli, PointMass, UniformBounded>;

/// Throws DomainError when the parameters are invalid (e.g. Pareto tail index <= 1).
void validate(const DistributionSpec& spec);
double true_mean(const DistributionSpec& spec);
/// P[zeta > u].
double survival(const DistributionSpec& spec, double u);
/// Essential infimum of the support.
double support_min(const DistributionSpec& spec);
std::string describe(const DistributionSpec& spec);
/// Parses pareto:<rho>:<xm> | lognormal:<mu>:<sigma> | bern:<p>:<high> | point:<c> | uniform:<lo>:<hi>.
DistributionSpec parse_distribution(const std::string& text);

// EstimateResult -------------------------------------------------------------

struct EstimateResult {
    double value = 0.0;
    std::string estimator_id;
    std::map<std::string, double> diagnostics;
};

}  // namespace kldro
