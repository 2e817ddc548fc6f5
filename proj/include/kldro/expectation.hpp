#pragma once

#include "kldro/core.hpp"

#include <functional>
#include <span>
#include <stdexcept>

namespace kldro {

class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// E f(zeta) under the law. Discrete laws are summed exactly; continuous laws
/// use adaptive Gauss-Kronrod split at `breaks` (points where f changes
/// behaviour, e.g. the shift in log(alpha + zeta)).
double expectation(const DistributionSpec& spec, const std::function<double(double)>& f,
                   std::span<const double> breaks = {});

}  // namespace kldro
