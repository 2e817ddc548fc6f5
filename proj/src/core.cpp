#include "kldro/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <sstream>

namespace kldro {

namespace {

void check_observations(const Array& v) {
    if (v.size() < 1) throw DomainError("sample must contain at least one observation");
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v(i)) || v(i) < 0.0)
            throw DomainError("sample values must be finite and non-negative");
    }
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) parts.push_back(item);
    return parts;
}

double parse_number(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw DomainError("not a number: '" + s + "'");
    return v;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r,");
    return s.substr(first, last - first + 1);
}

}  // namespace

// Sample ---------------------------------------------------------------------

Sample::Sample(Array values) : values_(std::move(values)) {
    check_observations(values_);
    std::sort(values_.data(), values_.data() + values_.size());
}

Sample::Sample(std::span<const double> values)
    : Sample(Array(Eigen::Map<const Array>(values.data(), static_cast<Eigen::Index>(values.size())))) {}

Sample::Sample(std::initializer_list<double> values)
    : Sample(std::span<const double>(values.begin(), values.size())) {}

Sample Sample::scaled(double c) const {
    if (!(c > 0.0)) throw DomainError("scale factor must be positive");
    return Sample(Array(values_ * c));
}

WeightedPoints merge_duplicates(const Sample& s) {
    const Array& v = s.values();
    const auto n = v.size();
    Array points(n), weights(n);
    Eigen::Index m = 0;
    for (Eigen::Index i = 0; i < n;) {
        Eigen::Index j = i;
        while (j < n && v(j) == v(i)) ++j;
        points(m) = v(i);
        weights(m) = static_cast<double>(j - i) / static_cast<double>(n);
        ++m;
        i = j;
    }
    return {points.head(m), weights.head(m)};
}

double sample_mean(const Sample& s) { return s.values().mean(); }

double sample_variance(const Sample& s) {
    const double m = sample_mean(s);
    return (s.values() - m).square().mean();
}

Sample read_sample(std::istream& in) {
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size())
            throw InputError("not a decimal number: '" + t + "'", lineno);
        if (!std::isfinite(v)) throw InputError("value is not finite", lineno);
        if (v < 0.0) throw InputError("negative value " + t, lineno);
        values.push_back(v);
    }
    if (values.empty()) throw InputError("sample is empty", lineno);
    return Sample(std::span<const double>(values));
}

Sample read_sample_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path, 0);
    return read_sample(in);
}

// DiscreteDistribution -------------------------------------------------------

DiscreteDistribution::DiscreteDistribution(Array support, Array weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
    if (support_.size() == 0 || support_.size() != weights_.size())
        throw DomainError("support and weights must be non-empty and of equal length");
    for (Eigen::Index i = 0; i < support_.size(); ++i) {
        if (!(support_(i) >= 0.0) || !std::isfinite(support_(i)))
            throw DomainError("support points must be finite and non-negative");
        if (i > 0 && !(support_(i) > support_(i - 1)))
            throw DomainError("support points must be strictly increasing");
        if (!(weights_(i) >= 0.0) || weights_(i) > 1.0)
            throw DomainError("weights must lie in [0, 1]");
    }
    if (std::abs(weights_.sum() - 1.0) > 1e-12) throw DomainError("weights must sum to one");
}

double DiscreteDistribution::weight_at(double u) const {
    const double* first = support_.data();
    const double* last = first + support_.size();
    const double* it = std::lower_bound(first, last, u);
    return (it != last && *it == u) ? weights_(it - first) : 0.0;
}

double kl_divergence(const Eigen::Ref<const Array>& p, const Eigen::Ref<const Array>& q) {
    if (p.size() != q.size()) throw DomainError("kl_divergence: size mismatch");
    double kl = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p(i) <= 0.0) continue;
        if (q(i) <= 0.0) return std::numeric_limits<double>::infinity();
        kl += p(i) * std::log(p(i) / q(i));
    }
    return kl;
}

// RadiusSchedule -------------------------------------------------------------

RadiusSchedule RadiusSchedule::constant(double lambda) {
    if (!(lambda > 0.0)) throw DomainError("constant lambda must be positive");
    return RadiusSchedule(Constant{lambda});
}

RadiusSchedule RadiusSchedule::log_n(double c) {
    if (!(c > 0.0)) throw DomainError("log n schedule needs c > 0");
    return RadiusSchedule(LogN{c});
}

RadiusSchedule RadiusSchedule::log_log_n(double c) {
    if (!(c > 0.0)) throw DomainError("log log n schedule needs c > 0");
    return RadiusSchedule(LogLogN{c});
}

RadiusSchedule RadiusSchedule::power(double c, double beta) {
    if (!(c > 0.0) || !(beta > 0.0 && beta < 1.0))
        throw DomainError("power schedule needs c > 0 and beta in (0, 1)");
    return RadiusSchedule(Power{c, beta});
}

RadiusSchedule RadiusSchedule::constant_radius(double r) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("radius must be finite and non-negative");
    return RadiusSchedule(ConstantRadius{r});
}

double RadiusSchedule::lambda(std::size_t n) const {
    if (n < 1) throw DomainError("schedule evaluated at n = 0");
    const double nd = static_cast<double>(n);
    double value = std::visit(
        [&](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Constant>) return k.lambda;
            else if constexpr (std::is_same_v<T, LogN>) return k.c * std::log(nd);
            else if constexpr (std::is_same_v<T, LogLogN>) {
                if (n < 3) throw DomainError("log log n schedule requires n >= 3");
                return k.c * std::log(std::log(nd));
            } else if constexpr (std::is_same_v<T, Power>) return k.c * std::pow(nd, k.beta);
            else return k.r * nd;
        },
        kind_);
    if (!std::holds_alternative<ConstantRadius>(kind_) && !(value > 0.0))
        throw DomainError("schedule gives lambda(n) <= 0 at n = " + std::to_string(n));
    return value;
}

double RadiusSchedule::radius(std::size_t n) const {
    if (const auto* cr = std::get_if<ConstantRadius>(&kind_)) return cr->r;
    return lambda(n) / static_cast<double>(n);
}

std::string RadiusSchedule::describe() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Constant>) os << "const:" << k.lambda;
            else if constexpr (std::is_same_v<T, LogN>) os << "logn:" << k.c;
            else if constexpr (std::is_same_v<T, LogLogN>) os << "loglogn:" << k.c;
            else if constexpr (std::is_same_v<T, Power>) os << "power:" << k.c << ":" << k.beta;
            else os << "radius:" << k.r;
        },
        kind_);
    return os.str();
}

RadiusSchedule RadiusSchedule::parse(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.empty()) throw DomainError("empty schedule");
    const std::string& name = parts[0];
    auto arg = [&](std::size_t i, double fallback) {
        return parts.size() > i ? parse_number(parts[i]) : fallback;
    };
    if (name == "const" && parts.size() == 2) return constant(arg(1, 0.0));
    if (name == "logn" && parts.size() <= 2) return log_n(arg(1, 1.0));
    if (name == "loglogn" && parts.size() <= 2) return log_log_n(arg(1, 1.0));
    if (name == "power" && parts.size() == 3) return power(arg(1, 0.0), arg(2, 0.0));
    if (name == "radius" && parts.size() == 2) return constant_radius(arg(1, 0.0));
    throw DomainError("unknown schedule '" + text + "'");
}

// DistributionSpec -----------------------------------------------------------

void validate(const DistributionSpec& spec) {
    std::visit(
        [](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Pareto>) {
                if (!(d.tail_index > 1.0)) throw DomainError("Pareto tail index must exceed 1");
                if (!(d.scale > 0.0)) throw DomainError("Pareto scale must be positive");
            } else if constexpr (std::is_same_v<T, LogNormal>) {
                if (!std::isfinite(d.mu_log) || !(d.sigma_log > 0.0))
                    throw DomainError("lognormal needs finite mu and sigma > 0");
            } else if constexpr (std::is_same_v<T, ScaledBernoulli>) {
                if (!(d.p >= 0.0 && d.p <= 1.0)) throw DomainError("Bernoulli p must lie in [0, 1]");
                if (!(d.high >= 0.0) || !std::isfinite(d.high))
                    throw DomainError("Bernoulli high value must be finite and non-negative");
            } else if constexpr (std::is_same_v<T, PointMass>) {
                if (!(d.c >= 0.0) || !std::isfinite(d.c)) throw DomainError("point mass must be finite and non-negative");
            } else {
                if (!(d.lo >= 0.0) || !(d.hi > d.lo) || !std::isfinite(d.hi))
                    throw DomainError("uniform needs 0 <= lo < hi < inf");
            }
        },
        spec);
}

double true_mean(const DistributionSpec& spec) {
    validate(spec);
    return std::visit(
        [](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Pareto>) return d.tail_index * d.scale / (d.tail_index - 1.0);
            else if constexpr (std::is_same_v<T, LogNormal>) return std::exp(d.mu_log + 0.5 * d.sigma_log * d.sigma_log);
            else if constexpr (std::is_same_v<T, ScaledBernoulli>) return d.p * d.high;
            else if constexpr (std::is_same_v<T, PointMass>) return d.c;
            else return 0.5 * (d.lo + d.hi);
        },
        spec);
}

double survival(const DistributionSpec& spec, double u) {
    validate(spec);
    return std::visit(
        [u](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Pareto>) return u < d.scale ? 1.0 : std::pow(d.scale / u, d.tail_index);
            else if constexpr (std::is_same_v<T, LogNormal>) {
                if (u <= 0.0) return 1.0;
                return 0.5 * std::erfc((std::log(u) - d.mu_log) / (d.sigma_log * std::numbers::sqrt2));
            } else if constexpr (std::is_same_v<T, ScaledBernoulli>) {
                if (u < 0.0) return 1.0;
                return u < d.high ? d.p : 0.0;
            } else if constexpr (std::is_same_v<T, PointMass>) return u < d.c ? 1.0 : 0.0;
            else {
                if (u < d.lo) return 1.0;
                if (u >= d.hi) return 0.0;
                return (d.hi - u) / (d.hi - d.lo);
            }
        },
        spec);
}

double support_min(const DistributionSpec& spec) {
    return std::visit(
        [](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Pareto>) return d.scale;
            else if constexpr (std::is_same_v<T, ScaledBernoulli>) return d.p < 1.0 ? 0.0 : d.high;
            else if constexpr (std::is_same_v<T, PointMass>) return d.c;
            else if constexpr (std::is_same_v<T, UniformBounded>) return d.lo;
            else return 0.0;
        },
        spec);
}

std::string describe(const DistributionSpec& spec) {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Pareto>) os << "pareto:" << d.tail_index << ":" << d.scale;
            else if constexpr (std::is_same_v<T, LogNormal>) os << "lognormal:" << d.mu_log << ":" << d.sigma_log;
            else if constexpr (std::is_same_v<T, ScaledBernoulli>) os << "bern:" << d.p << ":" << d.high;
            else if constexpr (std::is_same_v<T, PointMass>) os << "point:" << d.c;
            else os << "uniform:" << d.lo << ":" << d.hi;
        },
        spec);
    return os.str();
}

DistributionSpec parse_distribution(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.empty()) throw DomainError("empty distribution");
    const std::string& name = parts[0];
    std::vector<double> args;
    for (std::size_t i = 1; i < parts.size(); ++i) args.push_back(parse_number(parts[i]));
    DistributionSpec spec;
    if (name == "pareto" && args.size() == 2) spec = Pareto{args[0], args[1]};
    else if (name == "lognormal" && args.size() == 2) spec = LogNormal{args[0], args[1]};
    else if (name == "bern" && args.size() == 2) spec = ScaledBernoulli{args[0], args[1]};
    else if (name == "point" && args.size() == 1) spec = PointMass{args[0]};
    else if (name == "uniform" && args.size() == 2) spec = UniformBounded{args[0], args[1]};
    else throw DomainError("unknown distribution '" + text + "'");
    validate(spec);
    return spec;
}

}  // namespace kldro
