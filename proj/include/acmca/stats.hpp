#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

#include "acmca/error.hpp"

namespace acmca {

namespace detail {

// Regularized lower incomplete gamma P(a,x) by series expansion (x < a+1).
inline double gamma_p_series(double a, double x) {
    const int kMaxIter = 500;
    const double eps = 1e-15;
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < kMaxIter; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * eps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a,x) by Lentz continued fraction
// (x >= a+1).
inline double gamma_q_cf(double a, double x) {
    const int kMaxIter = 500;
    const double eps = 1e-15;
    const double tiny = std::numeric_limits<double>::min() / eps;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

// Regularized upper incomplete gamma Q(a, x) = Gamma(a,x)/Gamma(a).
inline double gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw UsageError("gamma_q requires a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_cf(a, x);
}

// Upper-tail probability of a chi-square statistic with `df` degrees of
// freedom. For df = 1 this equals erfc(sqrt(x/2)).
inline double chi_square_sf(double x, double df) {
    if (df <= 0.0) throw UsageError("chi_square_sf requires df > 0");
    if (x <= 0.0) return 1.0;
    return gamma_q(df / 2.0, x / 2.0);
}

}  // namespace acmca
