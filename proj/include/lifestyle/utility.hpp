#pragma once

#include "lifestyle/errors.hpp"

#include <cmath>

namespace lifestyle {

/// CRRA utility x^{1-γ}/(1-γ), ln x at γ = 1.
inline double crra_utility(double x, double gamma) {
    if (gamma == 1.0) return std::log(x);
    return std::pow(x, 1.0 - gamma) / (1.0 - gamma);
}

/// Inverse of crra_utility. Throws SignMismatch when u lies outside the range
/// of U_γ (u >= 0 for γ > 1, u <= 0 for γ < 1).
inline double crra_inverse(double u, double gamma) {
    if (gamma == 1.0) return std::exp(u);
    const double s = (1.0 - gamma) * u;
    if (!(s > 0.0)) {
        throw Error(ErrorCode::SignMismatch, "expected utility has the wrong sign for this gamma");
    }
    return std::pow(s, 1.0 / (1.0 - gamma));
}

/// U_γ(e^φ) computed without forming e^φ first.
inline double crra_utility_of_log(double phi, double gamma) {
    if (gamma == 1.0) return phi;
    return std::exp((1.0 - gamma) * phi) / (1.0 - gamma);
}

}  // namespace lifestyle
